//! Single-head cross-attention from spatial features to a token sequence.
//!
//! Pre-norm residual block: queries come from the normalized feature map,
//! keys/values from the normalized token embeddings. Padded token positions
//! are excluded through the softmax mask.

use crate::nn::linear::Linear;
use crate::nn::norm::{RowNorm, RowNormCache};
use crate::nn::ops::{softmax_backward, softmax_rows};
use crate::nn::param::NamedSlots;
use crate::scalar::Real;
use ndarray::{s, Array2, Array3, Array4, ArrayView3};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct CrossAttention<R: Real> {
    pub norm_x: RowNorm<R>,
    pub norm_t: RowNorm<R>,
    pub wq: Linear<R>,
    pub wk: Linear<R>,
    pub wv: Linear<R>,
    pub wo: Linear<R>,
    scale: R,
}

struct SampleCache<R: Real> {
    nx_cache: RowNormCache<R>,
    xn: Array2<R>,
    tn_cache: RowNormCache<R>,
    tn: Array2<R>,
    q: Array2<R>,
    k: Array2<R>,
    v: Array2<R>,
    attn: Array2<R>,
    o: Array2<R>,
}

pub struct AttnCache<R: Real> {
    samples: Vec<SampleCache<R>>,
    h: usize,
    w: usize,
}

fn spatial_to_rows<R: Real>(x: ArrayView3<'_, R>) -> Array2<R> {
    let (c, h, w) = x.dim();
    let moved = x.permuted_axes([1, 2, 0]);
    moved
        .as_standard_layout()
        .to_owned()
        .into_shape_with_order((h * w, c))
        .expect("spatial_to_rows reshape")
}

fn rows_to_spatial<R: Real>(rows: &Array2<R>, c: usize, h: usize, w: usize) -> ndarray::Array3<R> {
    rows.view()
        .into_shape_with_order((h, w, c))
        .expect("rows_to_spatial reshape")
        .permuted_axes([2, 0, 1])
        .as_standard_layout()
        .to_owned()
}

impl<R: Real> CrossAttention<R> {
    pub fn new(channels: usize, token_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            norm_x: RowNorm::new(channels),
            norm_t: RowNorm::new(token_dim),
            wq: Linear::new(channels, channels, rng),
            wk: Linear::new(token_dim, channels, rng),
            wv: Linear::new(token_dim, channels, rng),
            wo: Linear::new(channels, channels, rng),
            scale: R::of(1.0 / (channels as f64).sqrt()),
        }
    }

    /// x: (B, C, H, W); tokens: (B, L, d); mask[b][l] marks real tokens.
    pub fn forward_train(
        &self,
        x: &Array4<R>,
        tokens: &Array3<R>,
        mask: &[Vec<bool>],
    ) -> (Array4<R>, AttnCache<R>) {
        let (bsz, c, h, w) = x.dim();
        let mut y = Array4::zeros((bsz, c, h, w));
        let mut samples = Vec::with_capacity(bsz);
        for b in 0..bsz {
            let xf = spatial_to_rows(x.slice(s![b, .., .., ..]));
            let tok = tokens.slice(s![b, .., ..]).to_owned();
            let (xn, nx_cache) = self.norm_x.forward(&xf);
            let (tn, tn_cache) = self.norm_t.forward(&tok);
            let q = self.wq.forward(&xn);
            let k = self.wk.forward(&tn);
            let v = self.wv.forward(&tn);
            let z = q.dot(&k.t()) * self.scale;
            let attn = softmax_rows(&z, Some(&mask[b]));
            let o = attn.dot(&v);
            let yo = self.wo.forward(&o);
            let yf = &xf + &yo;
            y.slice_mut(s![b, .., .., ..])
                .assign(&rows_to_spatial(&yf, c, h, w));
            samples.push(SampleCache {
                nx_cache,
                xn,
                tn_cache,
                tn,
                q,
                k,
                v,
                attn,
                o,
            });
        }
        (y, AttnCache { samples, h, w })
    }

    /// Returns (dx, dtokens); parameter grads accumulate in place.
    pub fn backward(
        &mut self,
        cache: &AttnCache<R>,
        dy: &Array4<R>,
    ) -> (Array4<R>, Array3<R>) {
        let (bsz, c, h, w) = dy.dim();
        debug_assert_eq!((h, w), (cache.h, cache.w));
        let l = cache.samples[0].tn.nrows();
        let d = cache.samples[0].tn.ncols();
        let mut dx = Array4::zeros((bsz, c, h, w));
        let mut dtokens = Array3::zeros((bsz, l, d));
        for (b, sc) in cache.samples.iter().enumerate() {
            let dyf = spatial_to_rows(dy.slice(s![b, .., .., ..]));
            let mut dxf = dyf.clone();
            let do_ = self.wo.backward(&sc.o, &dyf);
            let dattn = do_.dot(&sc.v.t());
            let dv = sc.attn.t().dot(&do_);
            let dz = softmax_backward(&sc.attn, &dattn);
            let dq = dz.dot(&sc.k) * self.scale;
            let dk = dz.t().dot(&sc.q) * self.scale;
            let dxn = self.wq.backward(&sc.xn, &dq);
            let dtn = &self.wk.backward(&sc.tn, &dk) + &self.wv.backward(&sc.tn, &dv);
            dxf = &dxf + &self.norm_x.backward(&sc.nx_cache, &dxn);
            let dtok = self.norm_t.backward(&sc.tn_cache, &dtn);
            dx.slice_mut(s![b, .., .., ..])
                .assign(&rows_to_spatial(&dxf, c, h, w));
            dtokens.slice_mut(s![b, .., ..]).assign(&dtok);
        }
        (dx, dtokens)
    }

    pub fn collect<'a>(&'a mut self, prefix: &str, out: &mut NamedSlots<'a, R>) {
        self.norm_x.collect(&format!("{prefix}.norm_x"), out);
        self.norm_t.collect(&format!("{prefix}.norm_t"), out);
        self.wq.collect(&format!("{prefix}.wq"), out);
        self.wk.collect(&format!("{prefix}.wk"), out);
        self.wv.collect(&format!("{prefix}.wv"), out);
        self.wo.collect(&format!("{prefix}.wo"), out);
    }
}

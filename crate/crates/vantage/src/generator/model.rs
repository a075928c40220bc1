//! Small conditional denoising generator.
//!
//! A two-level UNet predicts the clean image from a noised input, a
//! continuous noise level t in [0, 1], and a token sequence (caption
//! embeddings plus the viewpoint token) attended to through cross-attention
//! at the lower resolutions.

use crate::conditioning::{assemble_sequence, MlpCache, ViewpointMlp, ViewpointMlpConfig, Vocabulary};
use crate::dataset::captions::{max_sequence_len, standard_vocabulary};
use crate::error::{Error, Result};
use crate::geometry::encoding::ViewpointEncoder;
use crate::geometry::CameraPose;
use crate::nn::attention::{AttnCache, CrossAttention};
use crate::nn::conv::Conv2d;
use crate::nn::linear::Linear;
use crate::nn::norm::{
    add_channel_bias, channel_bias_grad, channels_to_rows, rows_to_channels, RowNorm, RowNormCache,
};
use crate::nn::ops::{relu, relu_backward};
use crate::nn::param::{NamedSlots, Param};
use crate::nn::pool::{avg_pool2, avg_pool2_backward, upsample_nearest2, upsample_nearest2_backward};
use crate::nn::rng::rng_for;
use crate::scalar::Real;
use ndarray::{concatenate, s, Array2, Array3, Array4, Axis, Ix2};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub image_size: usize,
    pub base_channels: usize,
    pub token_dim: usize,
    pub time_dim: usize,
    pub mlp_hidden: usize,
    pub mlp_layers: usize,
    pub sample_steps: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            base_channels: 64,
            token_dim: 64,
            time_dim: 64,
            mlp_hidden: 1024,
            mlp_layers: 3,
            sample_steps: 20,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size % 4 != 0 || self.image_size < 8 {
            return Err(Error::config("image_size must be a multiple of 4, >= 8"));
        }
        if self.sample_steps == 0 {
            return Err(Error::config("sample_steps must be >= 1"));
        }
        Ok(())
    }
}

/// Signal retention at noise level t: 1 at t=0, ~0 at t=1.
pub fn alpha_bar(t: f64) -> f64 {
    let c = (t.clamp(0.0, 1.0) * std::f64::consts::FRAC_PI_2).cos();
    c * c
}

/// Sinusoidal features of the noise level.
fn time_features<R: Real>(t: &[f64], dim: usize) -> Array2<R> {
    let half = dim / 2;
    let mut out = Array2::zeros((t.len(), dim));
    for (b, &tv) in t.iter().enumerate() {
        let x = tv * 1000.0;
        for i in 0..half {
            let freq = (-(i as f64) * (10_000.0f64).ln() / (half.max(2) - 1) as f64).exp();
            out[[b, i]] = R::of((x * freq).sin());
            out[[b, half + i]] = R::of((x * freq).cos());
        }
    }
    out
}

/// Pre-activation residual block with an additive per-channel time term.
#[derive(Debug, Clone)]
struct UResBlock<R: Real> {
    n1: RowNorm<R>,
    c1: Conv2d<R>,
    t_proj: Linear<R>,
    n2: RowNorm<R>,
    c2: Conv2d<R>,
    skip: Option<Conv2d<R>>,
}

struct URCache<R: Real> {
    x: Array4<R>,
    n1_cache: RowNormCache<R>,
    n1_out: Array2<R>,
    m1: Array4<R>,
    temb: Array2<R>,
    n2_cache: RowNormCache<R>,
    n2_out: Array2<R>,
    m2: Array4<R>,
}

impl<R: Real> UResBlock<R> {
    fn new(cin: usize, cout: usize, tdim: usize, rng: &mut impl Rng) -> Self {
        Self {
            n1: RowNorm::new(cin),
            c1: Conv2d::new(cin, cout, 3, 1, 1, rng),
            t_proj: Linear::new(tdim, cout, rng),
            n2: RowNorm::new(cout),
            c2: Conv2d::new(cout, cout, 3, 1, 1, rng),
            skip: (cin != cout).then(|| Conv2d::new(cin, cout, 1, 1, 0, rng)),
        }
    }

    fn forward_train(&self, x: &Array4<R>, temb: &Array2<R>) -> (Array4<R>, URCache<R>) {
        let (b, cin, h, w) = x.dim();
        let r1 = channels_to_rows(x);
        let (n1_out, n1_cache) = self.n1.forward(&r1);
        let a1 = relu(&n1_out);
        let m1 = rows_to_channels(&a1, b, cin, h, w);
        let mut hmap = self.c1.forward(&m1);
        let tbias = self.t_proj.forward(temb);
        add_channel_bias(&mut hmap, &tbias);
        let cout = hmap.dim().1;
        let r2 = channels_to_rows(&hmap);
        let (n2_out, n2_cache) = self.n2.forward(&r2);
        let a2 = relu(&n2_out);
        let m2 = rows_to_channels(&a2, b, cout, h, w);
        let h2 = self.c2.forward(&m2);
        let y = match &self.skip {
            Some(sk) => &sk.forward(x) + &h2,
            None => x + &h2,
        };
        (
            y,
            URCache {
                x: x.clone(),
                n1_cache,
                n1_out,
                m1,
                temb: temb.clone(),
                n2_cache,
                n2_out,
                m2,
            },
        )
    }

    /// Returns dx and accumulates dtemb.
    fn backward(&mut self, cache: &URCache<R>, dy: &Array4<R>, dtemb: &mut Array2<R>) -> Array4<R> {
        let (b, cin, h, w) = cache.x.dim();
        let dm2 = self.c2.backward(&cache.m2, dy);
        let da2 = channels_to_rows(&dm2);
        let dn2 = relu_backward(&cache.n2_out, &da2);
        let dr2 = self.n2.backward(&cache.n2_cache, &dn2);
        let cout = dy.dim().1;
        let dh = rows_to_channels(&dr2, b, cout, h, w);
        let dtbias = channel_bias_grad(&dh);
        *dtemb = &*dtemb + &self.t_proj.backward(&cache.temb, &dtbias);
        let dm1 = self.c1.backward(&cache.m1, &dh);
        let da1 = channels_to_rows(&dm1);
        let dn1 = relu_backward(&cache.n1_out, &da1);
        let dr1 = self.n1.backward(&cache.n1_cache, &dn1);
        let dx_res = rows_to_channels(&dr1, b, cin, h, w);
        match &mut self.skip {
            Some(sk) => &sk.backward(&cache.x, dy) + &dx_res,
            None => dy + &dx_res,
        }
    }

    fn collect<'a>(&'a mut self, prefix: &str, out: &mut NamedSlots<'a, R>) {
        self.n1.collect(&format!("{prefix}.n1"), out);
        self.c1.collect(&format!("{prefix}.c1"), out);
        self.t_proj.collect(&format!("{prefix}.t_proj"), out);
        self.n2.collect(&format!("{prefix}.n2"), out);
        self.c2.collect(&format!("{prefix}.c2"), out);
        if let Some(sk) = &mut self.skip {
            sk.collect(&format!("{prefix}.skip"), out);
        }
    }
}

/// The denoising backbone plus all conditioning machinery.
#[derive(Debug, Clone)]
pub struct ToyGenerator<R: Real> {
    pub cfg: GeneratorConfig,
    pub encoder: ViewpointEncoder,
    pub radius_range: (f64, f64),
    pub vocab: Vocabulary<R>,
    pub pos_embed: Param<R, Ix2>,
    pub view_mlp: ViewpointMlp<R>,
    time_fc1: Linear<R>,
    time_fc2: Linear<R>,
    conv_in: Conv2d<R>,
    enc1: UResBlock<R>,
    enc2: UResBlock<R>,
    attn2: CrossAttention<R>,
    mid1: UResBlock<R>,
    attn_m: CrossAttention<R>,
    mid2: UResBlock<R>,
    up_conv2: Conv2d<R>,
    dec2: UResBlock<R>,
    attn_d: CrossAttention<R>,
    up_conv1: Conv2d<R>,
    dec1: UResBlock<R>,
    out_norm: RowNorm<R>,
    conv_out: Conv2d<R>,
}

pub struct TokenCache<R: Real> {
    pub mlp_cache: MlpCache<R>,
    /// Per sample: real sequence length and the token-table id per row
    /// (None at the viewpoint row).
    pub source_ids: Vec<Vec<Option<u32>>>,
    pub encodings: Array2<R>,
}

pub struct UnetCache<R: Real> {
    t_feat: Array2<R>,
    t_h1: Array2<R>,
    t_a1: Array2<R>,
    x_in: Array4<R>,
    enc1: URCache<R>,
    enc1_out: Array4<R>,
    enc2: URCache<R>,
    attn2: AttnCache<R>,
    attn2_out: Array4<R>,
    mid1: URCache<R>,
    attn_m: AttnCache<R>,
    mid2: URCache<R>,
    up2_in: Array4<R>,
    dec2: URCache<R>,
    attn_d: AttnCache<R>,
    up1_in: Array4<R>,
    dec1: URCache<R>,
    out_cache: RowNormCache<R>,
    out_norm_out: Array2<R>,
    out_map: Array4<R>,
}

impl<R: Real> ToyGenerator<R> {
    pub fn new(
        cfg: GeneratorConfig,
        encoder: ViewpointEncoder,
        radius_range: (f64, f64),
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_for(seed, "generator-init", &[]);
        let d = cfg.token_dim;
        let c1 = cfg.base_channels;
        let c2 = 2 * c1;
        let td = cfg.time_dim;
        let vocab = standard_vocabulary::<R>(d, &mut rng);
        let mut pos = Array2::zeros((max_sequence_len(), d));
        crate::nn::rng::fill_normal(pos.view_mut(), 0.02, &mut rng);
        let mlp_cfg = ViewpointMlpConfig {
            input_dim: encoder.output_len(),
            hidden_dim: cfg.mlp_hidden,
            num_layers: cfg.mlp_layers,
            output_dim: d,
        };
        let view_mlp = ViewpointMlp::new(mlp_cfg, &mut rng)?;
        Ok(Self {
            cfg,
            encoder,
            radius_range,
            vocab,
            pos_embed: Param::new(pos),
            view_mlp,
            time_fc1: Linear::new(td, td, &mut rng),
            time_fc2: Linear::new(td, td, &mut rng),
            conv_in: Conv2d::new(3, c1, 3, 1, 1, &mut rng),
            enc1: UResBlock::new(c1, c1, td, &mut rng),
            enc2: UResBlock::new(c1, c2, td, &mut rng),
            attn2: CrossAttention::new(c2, d, &mut rng),
            mid1: UResBlock::new(c2, c2, td, &mut rng),
            attn_m: CrossAttention::new(c2, d, &mut rng),
            mid2: UResBlock::new(c2, c2, td, &mut rng),
            up_conv2: Conv2d::new(c2, c2, 3, 1, 1, &mut rng),
            dec2: UResBlock::new(c2 + c2, c1, td, &mut rng),
            attn_d: CrossAttention::new(c1, d, &mut rng),
            up_conv1: Conv2d::new(c1, c1, 3, 1, 1, &mut rng),
            dec1: UResBlock::new(c1 + c1, c1, td, &mut rng),
            out_norm: RowNorm::new(c1),
            conv_out: Conv2d::new(c1, 3, 3, 1, 1, &mut rng),
        })
    }

    pub fn max_seq_len(&self) -> usize {
        self.pos_embed.w.nrows()
    }

    /// Builds the padded token batch: caption embeddings with the viewpoint
    /// token inserted, positional embeddings added, and a validity mask.
    pub fn token_batch(
        &self,
        items: &[(Vec<u32>, usize, CameraPose<f64>)],
    ) -> Result<(Array3<R>, Vec<Vec<bool>>, TokenCache<R>)> {
        let d = self.cfg.token_dim;
        let max_len = self.max_seq_len();
        let bsz = items.len();
        let in_dim = self.encoder.output_len();
        let mut encodings = Array2::zeros((bsz, in_dim));
        for (b, (_, _, pose)) in items.iter().enumerate() {
            let enc = self.encoder.encode(pose, self.radius_range)?;
            for (j, v) in enc.data.iter().enumerate() {
                encodings[[b, j]] = R::of(*v);
            }
        }
        let (view_tokens, mlp_cache) = self.view_mlp.forward_train(&encodings)?;
        let mut tokens = Array3::zeros((bsz, max_len, d));
        let mut mask = vec![vec![false; max_len]; bsz];
        let mut source_ids = Vec::with_capacity(bsz);
        for (b, (ids, span, _)) in items.iter().enumerate() {
            let seq = assemble_sequence(ids, *span, view_tokens.row(b), &self.vocab)?;
            if seq.len() > max_len {
                return Err(Error::input(format!(
                    "caption of {} tokens exceeds the maximum sequence length {max_len}",
                    seq.len() - 1
                )));
            }
            for row in 0..seq.len() {
                let emb = &seq.embeddings.row(row) + &self.pos_embed.w.row(row);
                tokens.slice_mut(s![b, row, ..]).assign(&emb);
                mask[b][row] = true;
            }
            source_ids.push(seq.source_ids);
        }
        Ok((
            tokens,
            mask,
            TokenCache {
                mlp_cache,
                source_ids,
                encodings,
            },
        ))
    }

    /// Routes token gradients back into the embedding table, positional
    /// embeddings, and the viewpoint MLP. Returns the gradient w.r.t. the
    /// pose encodings.
    pub fn token_backward(&mut self, cache: &TokenCache<R>, dtokens: &Array3<R>) -> Array2<R> {
        let bsz = dtokens.dim().0;
        let d = self.cfg.token_dim;
        let mut dview = Array2::zeros((bsz, d));
        for b in 0..bsz {
            for (row, src) in cache.source_ids[b].iter().enumerate() {
                let g = dtokens.slice(s![b, row, ..]);
                match src {
                    Some(id) => {
                        let mut target = self.vocab.embed.g.row_mut(*id as usize);
                        target += &g;
                    }
                    None => {
                        let mut target = dview.row_mut(b);
                        target += &g;
                    }
                }
                let mut pos = self.pos_embed.g.row_mut(row);
                pos += &g;
            }
        }
        self.view_mlp.backward(&cache.mlp_cache, &dview)
    }

    fn time_embed_train(&self, t: &[f64]) -> (Array2<R>, Array2<R>, Array2<R>, Array2<R>) {
        let t_feat = time_features::<R>(t, self.cfg.time_dim);
        let t_h1 = self.time_fc1.forward(&t_feat);
        let t_a1 = relu(&t_h1);
        let temb = self.time_fc2.forward(&t_a1);
        (t_feat, t_h1, t_a1, temb)
    }

    /// Predicts the clean image from the noised input.
    pub fn forward_train(
        &self,
        x_t: &Array4<R>,
        t: &[f64],
        tokens: &Array3<R>,
        mask: &[Vec<bool>],
    ) -> Result<(Array4<R>, UnetCache<R>)> {
        let (b, c, h, w) = x_t.dim();
        if c != 3 || h != self.cfg.image_size || w != self.cfg.image_size {
            return Err(Error::shape(
                format!("(batch, 3, {0}, {0}) image", self.cfg.image_size),
                format!("({b}, {c}, {h}, {w})"),
            ));
        }
        let (t_feat, t_h1, t_a1, temb) = self.time_embed_train(t);
        let conv_in_out = self.conv_in.forward(x_t);
        let (enc1_out, enc1) = self.enc1.forward_train(&conv_in_out, &temb);
        let enc2_in = avg_pool2(&enc1_out);
        let (enc2_res, enc2) = self.enc2.forward_train(&enc2_in, &temb);
        let (attn2_out, attn2) = self.attn2.forward_train(&enc2_res, tokens, mask);
        let mid_in = avg_pool2(&attn2_out);
        let (mid1_out, mid1) = self.mid1.forward_train(&mid_in, &temb);
        let (attn_m_out, attn_m) = self.attn_m.forward_train(&mid1_out, tokens, mask);
        let (mid2_out, mid2) = self.mid2.forward_train(&attn_m_out, &temb);
        let up2_in = upsample_nearest2(&mid2_out);
        let up2_out = self.up_conv2.forward(&up2_in);
        let cat2 = concatenate(Axis(1), &[up2_out.view(), attn2_out.view()])
            .expect("channel concat");
        let (dec2_res, dec2) = self.dec2.forward_train(&cat2, &temb);
        let (attn_d_out, attn_d) = self.attn_d.forward_train(&dec2_res, tokens, mask);
        let up1_in = upsample_nearest2(&attn_d_out);
        let up1_out = self.up_conv1.forward(&up1_in);
        let cat1 = concatenate(Axis(1), &[up1_out.view(), enc1_out.view()])
            .expect("channel concat");
        let (dec1_out, dec1) = self.dec1.forward_train(&cat1, &temb);
        let rows = channels_to_rows(&dec1_out);
        let (out_norm_out, out_cache) = self.out_norm.forward(&rows);
        let out_act = relu(&out_norm_out);
        let c1 = self.cfg.base_channels;
        let out_map = rows_to_channels(&out_act, b, c1, h, w);
        let x0_hat = self.conv_out.forward(&out_map);
        Ok((
            x0_hat,
            UnetCache {
                t_feat,
                t_h1,
                t_a1,
                x_in: x_t.clone(),
                enc1,
                enc1_out,
                enc2,
                attn2,
                attn2_out,
                mid1,
                attn_m,
                mid2,
                up2_in,
                dec2,
                attn_d,
                up1_in,
                dec1,
                out_cache,
                out_norm_out,
                out_map,
            },
        ))
    }

    pub fn forward(
        &self,
        x_t: &Array4<R>,
        t: &[f64],
        tokens: &Array3<R>,
        mask: &[Vec<bool>],
    ) -> Result<Array4<R>> {
        Ok(self.forward_train(x_t, t, tokens, mask)?.0)
    }

    /// Backpropagates dloss/dx0_hat; accumulates all parameter grads and
    /// returns the token gradients for `token_backward`.
    pub fn backward(&mut self, cache: &UnetCache<R>, dx0: &Array4<R>) -> Array3<R> {
        let (b, _, h, w) = cache.x_in.dim();
        let c1 = self.cfg.base_channels;
        let dmap = self.conv_out.backward(&cache.out_map, dx0);
        let dact = channels_to_rows(&dmap);
        let dnorm = relu_backward(&cache.out_norm_out, &dact);
        let drows = self.out_norm.backward(&cache.out_cache, &dnorm);
        let ddec1_out = rows_to_channels(&drows, b, c1, h, w);

        let mut dtemb = Array2::zeros((b, self.cfg.time_dim));
        let dcat1 = self.dec1.backward(&cache.dec1, &ddec1_out, &mut dtemb);
        let dup1_out = dcat1.slice(s![.., ..c1, .., ..]).to_owned();
        let denc1_skip = dcat1.slice(s![.., c1.., .., ..]).to_owned();
        let dup1_in = self.up_conv1.backward(&cache.up1_in, &dup1_out);
        let dattn_d_out = upsample_nearest2_backward(&dup1_in);
        let (ddec2_res, mut dtokens) = self.attn_d.backward(&cache.attn_d, &dattn_d_out);
        let dcat2 = self.dec2.backward(&cache.dec2, &ddec2_res, &mut dtemb);
        let c2 = 2 * c1;
        let dup2_out = dcat2.slice(s![.., ..c2, .., ..]).to_owned();
        let dattn2_skip = dcat2.slice(s![.., c2.., .., ..]).to_owned();
        let dup2_in = self.up_conv2.backward(&cache.up2_in, &dup2_out);
        let dmid2_out = upsample_nearest2_backward(&dup2_in);
        let dattn_m_out = self.mid2.backward(&cache.mid2, &dmid2_out, &mut dtemb);
        let (dmid1_out, dtok_m) = self.attn_m.backward(&cache.attn_m, &dattn_m_out);
        dtokens = &dtokens + &dtok_m;
        let dmid_in = self.mid1.backward(&cache.mid1, &dmid1_out, &mut dtemb);
        let (_, _, h2, w2) = cache.attn2_out.dim();
        let dattn2_out = &avg_pool2_backward(&dmid_in, h2, w2) + &dattn2_skip;
        let (denc2_res, dtok_2) = self.attn2.backward(&cache.attn2, &dattn2_out);
        dtokens = &dtokens + &dtok_2;
        let denc2_in = self.enc2.backward(&cache.enc2, &denc2_res, &mut dtemb);
        let (_, _, h1, w1) = cache.enc1_out.dim();
        let denc1_out = &avg_pool2_backward(&denc2_in, h1, w1) + &denc1_skip;
        let dconv_in_out = self.enc1.backward(&cache.enc1, &denc1_out, &mut dtemb);
        let _ = self.conv_in.backward(&cache.x_in, &dconv_in_out);

        // Time embedding chain.
        let dt_a1 = self.time_fc2.backward(&cache.t_a1, &dtemb);
        let dt_h1 = relu_backward(&cache.t_h1, &dt_a1);
        let _ = self.time_fc1.backward(&cache.t_feat, &dt_h1);

        dtokens
    }

    /// Both optimizer groups in one borrow: (viewpoint MLP, backbone).
    /// The MLP trains at the higher learning rate; everything else,
    /// including the caption embedding table and positional embeddings,
    /// belongs to the backbone group.
    pub fn collect_groups(&mut self) -> (NamedSlots<'_, R>, NamedSlots<'_, R>) {
        let mut mlp = Vec::new();
        self.view_mlp.collect("view_mlp", &mut mlp);
        let mut backbone: NamedSlots<'_, R> = Vec::new();
        backbone.push(("vocab.embed".to_string(), &mut self.vocab.embed));
        backbone.push(("pos_embed".to_string(), &mut self.pos_embed));
        self.time_fc1.collect("time_fc1", &mut backbone);
        self.time_fc2.collect("time_fc2", &mut backbone);
        self.conv_in.collect("conv_in", &mut backbone);
        self.enc1.collect("enc1", &mut backbone);
        self.enc2.collect("enc2", &mut backbone);
        self.attn2.collect("attn2", &mut backbone);
        self.mid1.collect("mid1", &mut backbone);
        self.attn_m.collect("attn_m", &mut backbone);
        self.mid2.collect("mid2", &mut backbone);
        self.up_conv2.collect("up_conv2", &mut backbone);
        self.dec2.collect("dec2", &mut backbone);
        self.attn_d.collect("attn_d", &mut backbone);
        self.up_conv1.collect("up_conv1", &mut backbone);
        self.dec1.collect("dec1", &mut backbone);
        self.out_norm.collect("out_norm", &mut backbone);
        self.conv_out.collect("conv_out", &mut backbone);
        (mlp, backbone)
    }

    /// All parameters in checkpoint order: MLP group first, then backbone.
    pub fn collect_all(&mut self) -> NamedSlots<'_, R> {
        let (mut mlp, backbone) = self.collect_groups();
        mlp.extend(backbone);
        mlp
    }

    pub fn param_count(&mut self) -> usize {
        self.collect_all()
            .iter()
            .map(|(_, s)| s.num_elements())
            .sum()
    }
}

/// Mean squared error over all pixels; returns the loss and dloss/dpred.
pub fn mse_loss<R: Real>(pred: &Array4<R>, target: &Array4<R>) -> (R, Array4<R>) {
    let n = R::of(pred.len() as f64);
    let diff = pred - target;
    let loss = diff.iter().map(|&d| d * d).sum::<R>() / n;
    let grad = diff.mapv(|d| R::of(2.0) * d / n);
    (loss, grad)
}

/// Per-element noising: x_t = sqrt(ab) x0 + sqrt(1 - ab) eps.
pub fn noise_image<R: Real>(x0: &Array4<R>, eps: &Array4<R>, t: f64) -> Array4<R> {
    let ab = alpha_bar(t);
    let a = R::of(ab.sqrt());
    let b = R::of((1.0 - ab).sqrt());
    x0 * a + eps * b
}

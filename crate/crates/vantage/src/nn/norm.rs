//! Row normalization (layer norm over the last axis of a (rows, n) matrix)
//! plus helpers to apply it across the channel axis of conv feature maps.

use crate::nn::param::{NamedSlots, Param};
use crate::scalar::Real;
use ndarray::{Array1, Array2, Array4, Axis, Ix1};

#[derive(Debug, Clone)]
pub struct RowNorm<R: Real> {
    pub gamma: Param<R, Ix1>,
    pub beta: Param<R, Ix1>,
    pub eps: R,
}

#[derive(Debug, Clone)]
pub struct RowNormCache<R: Real> {
    /// Normalized pre-affine activations.
    pub xh: Array2<R>,
    pub inv_std: Array1<R>,
}

impl<R: Real> RowNorm<R> {
    pub fn new(n: usize) -> Self {
        Self {
            gamma: Param::new(Array1::ones(n)),
            beta: Param::new(Array1::zeros(n)),
            eps: R::of(1e-5),
        }
    }

    pub fn forward(&self, x: &Array2<R>) -> (Array2<R>, RowNormCache<R>) {
        let n = x.ncols();
        let inv_n = R::one() / R::of(n as f64);
        let mut xh = x.clone();
        let mut inv_std = Array1::zeros(x.nrows());
        for (mut row, istd) in xh.rows_mut().into_iter().zip(inv_std.iter_mut()) {
            let mean = row.iter().copied().sum::<R>() * inv_n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<R>() * inv_n;
            let is = R::one() / (var + self.eps).sqrt();
            *istd = is;
            row.mapv_inplace(|v| (v - mean) * is);
        }
        let mut y = xh.clone();
        for mut row in y.rows_mut() {
            row.zip_mut_with(&self.gamma.w, |v, &g| *v = *v * g);
            row += &self.beta.w;
        }
        (y, RowNormCache { xh, inv_std })
    }

    pub fn backward(&mut self, cache: &RowNormCache<R>, dy: &Array2<R>) -> Array2<R> {
        let n = dy.ncols();
        let inv_n = R::one() / R::of(n as f64);
        // Affine parameter grads.
        for (dy_row, xh_row) in dy.rows().into_iter().zip(cache.xh.rows()) {
            for ((g, &d), &xh) in self
                .gamma
                .g
                .iter_mut()
                .zip(dy_row.iter())
                .zip(xh_row.iter())
            {
                *g += d * xh;
            }
            self.beta.g.zip_mut_with(&dy_row, |b, &d| *b += d);
        }
        // Input grads.
        let mut dx = Array2::zeros(dy.raw_dim());
        for ((mut dx_row, dy_row), (xh_row, &istd)) in dx
            .rows_mut()
            .into_iter()
            .zip(dy.rows())
            .zip(cache.xh.rows().into_iter().zip(cache.inv_std.iter()))
        {
            let mut sum_d = R::zero();
            let mut sum_dx = R::zero();
            for ((&d, &g), &xh) in dy_row.iter().zip(self.gamma.w.iter()).zip(xh_row.iter()) {
                let dg = d * g;
                sum_d += dg;
                sum_dx += dg * xh;
            }
            for ((out, (&d, &g)), &xh) in dx_row
                .iter_mut()
                .zip(dy_row.iter().zip(self.gamma.w.iter()))
                .zip(xh_row.iter())
            {
                *out = istd * (d * g - inv_n * sum_d - xh * inv_n * sum_dx);
            }
        }
        dx
    }

    pub fn collect<'a>(&'a mut self, prefix: &str, out: &mut NamedSlots<'a, R>) {
        out.push((format!("{prefix}.gamma"), &mut self.gamma));
        out.push((format!("{prefix}.beta"), &mut self.beta));
    }
}

/// (B, C, H, W) -> (B*H*W, C) rows for channel-axis normalization.
pub fn channels_to_rows<R: Real>(x: &Array4<R>) -> Array2<R> {
    let (b, c, h, w) = x.dim();
    let moved = x.view().permuted_axes([0, 2, 3, 1]);
    let contiguous = moved.as_standard_layout().to_owned();
    contiguous
        .into_shape_with_order((b * h * w, c))
        .expect("channels_to_rows reshape")
}

/// Inverse of `channels_to_rows`.
pub fn rows_to_channels<R: Real>(rows: &Array2<R>, b: usize, c: usize, h: usize, w: usize) -> Array4<R> {
    let back = rows
        .view()
        .into_shape_with_order((b, h, w, c))
        .expect("rows_to_channels reshape")
        .permuted_axes([0, 3, 1, 2]);
    back.as_standard_layout().to_owned()
}

/// Mean over all elements, as a scalar.
pub fn mean_all<R: Real>(x: &Array4<R>) -> R {
    x.sum() / R::of(x.len() as f64)
}

/// Broadcast add of a per-sample channel vector onto a feature map:
/// y[b,c,h,w] = x[b,c,h,w] + v[b,c].
pub fn add_channel_bias<R: Real>(x: &mut Array4<R>, v: &Array2<R>) {
    let (bsz, c, _, _) = x.dim();
    for b in 0..bsz {
        for ch in 0..c {
            let bias = v[[b, ch]];
            x.index_axis_mut(Axis(0), b)
                .index_axis_mut(Axis(0), ch)
                .mapv_inplace(|t| t + bias);
        }
    }
}

/// Adjoint of `add_channel_bias`: dv[b,c] = sum_hw dy[b,c,h,w].
pub fn channel_bias_grad<R: Real>(dy: &Array4<R>) -> Array2<R> {
    let (bsz, c, _, _) = dy.dim();
    let mut dv = Array2::zeros((bsz, c));
    for b in 0..bsz {
        for ch in 0..c {
            dv[[b, ch]] = dy.index_axis(Axis(0), b).index_axis(Axis(0), ch).sum();
        }
    }
    dv
}

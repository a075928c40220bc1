//! 2D convolution via batched im2col matmul: one GEMM per layer call
//! covering the whole batch, which keeps the matrices large enough for the
//! blocked kernels to pay off.

use crate::nn::ops::batch_map;
use crate::nn::param::{NamedSlots, Param};
use crate::nn::rng;
use crate::scalar::Real;
use ndarray::{s, Array1, Array2, Array3, Array4, ArrayView3, ArrayViewMut2, Axis, Ix1, Ix4};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Conv2d<R: Real> {
    /// (out_channels, in_channels, k, k)
    pub w: Param<R, Ix4>,
    pub b: Param<R, Ix1>,
    pub stride: usize,
    pub pad: usize,
}

impl<R: Real> Conv2d<R> {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_ch * k * k;
        let bound = 1.0 / (fan_in as f64).sqrt();
        let mut w = Array4::zeros((out_ch, in_ch, k, k));
        rng::fill_uniform_sym(w.view_mut().into_dyn(), bound, rng);
        Self {
            w: Param::new(w),
            b: Param::new(Array1::zeros(out_ch)),
            stride,
            pad,
        }
    }

    pub fn kernel(&self) -> usize {
        self.w.w.shape()[2]
    }

    pub fn in_channels(&self) -> usize {
        self.w.w.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.w.w.shape()[0]
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let k = self.kernel();
        (
            (h + 2 * self.pad - k) / self.stride + 1,
            (w + 2 * self.pad - k) / self.stride + 1,
        )
    }

    fn weight_matrix(&self) -> Array2<R> {
        let (co, ci, k, _) = self.w.w.dim();
        self.w
            .w
            .view()
            .into_shape_with_order((co, ci * k * k))
            .expect("conv weight is standard layout")
            .to_owned()
    }

    /// im2col over the whole batch: (Cin*k*k, B*Ho*Wo).
    fn cols_all(&self, x: &Array4<R>) -> Array2<R> {
        let (bsz, ci, h, wd) = x.dim();
        let (ho, wo) = self.out_hw(h, wd);
        let hw = ho * wo;
        let k = self.kernel();
        let mut cols = Array2::zeros((ci * k * k, bsz * hw));
        // Per-sample fills write disjoint column blocks.
        let blocks = batch_map(bsz, |b| {
            let mut block = Array2::zeros((ci * k * k, hw));
            im2col_into(
                x.slice(s![b, .., .., ..]),
                k,
                self.stride,
                self.pad,
                block.view_mut(),
            );
            block
        });
        for (b, block) in blocks.into_iter().enumerate() {
            cols.slice_mut(s![.., b * hw..(b + 1) * hw]).assign(&block);
        }
        cols
    }

    pub fn forward(&self, x: &Array4<R>) -> Array4<R> {
        let (bsz, _, h, wd) = x.dim();
        let (ho, wo) = self.out_hw(h, wd);
        let hw = ho * wo;
        let co = self.out_channels();
        let cols = self.cols_all(x);
        let mut y2 = self.weight_matrix().dot(&cols);
        for (mut row, &bias) in y2.rows_mut().into_iter().zip(self.b.w.iter()) {
            row.mapv_inplace(|v| v + bias);
        }
        let mut y = Array4::zeros((bsz, co, ho, wo));
        for b in 0..bsz {
            let block = y2.slice(s![.., b * hw..(b + 1) * hw]);
            y.slice_mut(s![b, .., .., ..]).assign(
                &block
                    .into_shape_with_order((co, ho, wo))
                    .expect("conv output reshape"),
            );
        }
        y
    }

    /// Accumulates weight/bias gradients and returns dx.
    pub fn backward(&mut self, x: &Array4<R>, dy: &Array4<R>) -> Array4<R> {
        let (bsz, ci, h, wd) = x.dim();
        let (co, _, k, _) = self.w.w.dim();
        let (ho, wo) = self.out_hw(h, wd);
        let hw = ho * wo;
        let cols = self.cols_all(x);
        let mut dy_all = Array2::zeros((co, bsz * hw));
        for b in 0..bsz {
            let block = dy
                .slice(s![b, .., .., ..])
                .into_shape_with_order((co, hw))
                .expect("dy reshape");
            dy_all.slice_mut(s![.., b * hw..(b + 1) * hw]).assign(&block);
        }
        let dw2 = dy_all.dot(&cols.t());
        self.w.g = &self.w.g
            + &dw2
                .into_shape_with_order((co, ci, k, k))
                .expect("dw reshape");
        self.b.g = &self.b.g + &dy_all.sum_axis(Axis(1));
        let dcols = self.weight_matrix().t().dot(&dy_all);
        let parts = batch_map(bsz, |b| {
            col2im(
                &dcols.slice(s![.., b * hw..(b + 1) * hw]).to_owned(),
                ci,
                h,
                wd,
                k,
                self.stride,
                self.pad,
            )
        });
        let mut dx = Array4::zeros((bsz, ci, h, wd));
        for (b, part) in parts.into_iter().enumerate() {
            dx.slice_mut(s![b, .., .., ..]).assign(&part);
        }
        dx
    }

    pub fn collect<'a>(&'a mut self, prefix: &str, out: &mut NamedSlots<'a, R>) {
        out.push((format!("{prefix}.w"), &mut self.w));
        out.push((format!("{prefix}.b"), &mut self.b));
    }
}

/// Unrolls (ci, h, w) into (ci*k*k, ho*wo) patch columns.
fn im2col_into<R: Real>(
    x: ArrayView3<'_, R>,
    k: usize,
    stride: usize,
    pad: usize,
    mut cols: ArrayViewMut2<'_, R>,
) {
    let (ci, h, w) = x.dim();
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (w + 2 * pad - k) / stride + 1;
    for c in 0..ci {
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let mut out_row = cols.row_mut(row);
                for oh in 0..ho {
                    let ih = (oh * stride + ki) as isize - pad as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for ow in 0..wo {
                        let iw = (ow * stride + kj) as isize - pad as isize;
                        if iw < 0 || iw >= w as isize {
                            continue;
                        }
                        out_row[oh * wo + ow] = x[[c, ih as usize, iw as usize]];
                    }
                }
            }
        }
    }
}

/// Adjoint of im2col: scatter-adds patch columns back into an image.
fn col2im<R: Real>(
    cols: &Array2<R>,
    ci: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> Array3<R> {
    let ho = (h + 2 * pad - k) / stride + 1;
    let wo = (w + 2 * pad - k) / stride + 1;
    let mut x = Array3::zeros((ci, h, w));
    for c in 0..ci {
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                let in_row = cols.row(row);
                for oh in 0..ho {
                    let ih = (oh * stride + ki) as isize - pad as isize;
                    if ih < 0 || ih >= h as isize {
                        continue;
                    }
                    for ow in 0..wo {
                        let iw = (ow * stride + kj) as isize - pad as isize;
                        if iw < 0 || iw >= w as isize {
                            continue;
                        }
                        x[[c, ih as usize, iw as usize]] += in_row[oh * wo + ow];
                    }
                }
            }
        }
    }
    x
}

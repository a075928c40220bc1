//! 2x2 average pooling and nearest-neighbor upsampling.

use crate::scalar::Real;
use ndarray::Array4;

pub fn avg_pool2<R: Real>(x: &Array4<R>) -> Array4<R> {
    let (b, c, h, w) = x.dim();
    let quarter = R::of(0.25);
    let mut y = Array4::zeros((b, c, h / 2, w / 2));
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..h / 2 {
                for j in 0..w / 2 {
                    let s = x[[bi, ci, 2 * i, 2 * j]]
                        + x[[bi, ci, 2 * i, 2 * j + 1]]
                        + x[[bi, ci, 2 * i + 1, 2 * j]]
                        + x[[bi, ci, 2 * i + 1, 2 * j + 1]];
                    y[[bi, ci, i, j]] = s * quarter;
                }
            }
        }
    }
    y
}

pub fn avg_pool2_backward<R: Real>(dy: &Array4<R>, h: usize, w: usize) -> Array4<R> {
    let (b, c, ho, wo) = dy.dim();
    let quarter = R::of(0.25);
    let mut dx = Array4::zeros((b, c, h, w));
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..ho {
                for j in 0..wo {
                    let d = dy[[bi, ci, i, j]] * quarter;
                    dx[[bi, ci, 2 * i, 2 * j]] = d;
                    dx[[bi, ci, 2 * i, 2 * j + 1]] = d;
                    dx[[bi, ci, 2 * i + 1, 2 * j]] = d;
                    dx[[bi, ci, 2 * i + 1, 2 * j + 1]] = d;
                }
            }
        }
    }
    dx
}

pub fn upsample_nearest2<R: Real>(x: &Array4<R>) -> Array4<R> {
    let (b, c, h, w) = x.dim();
    let mut y = Array4::zeros((b, c, h * 2, w * 2));
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..h {
                for j in 0..w {
                    let v = x[[bi, ci, i, j]];
                    y[[bi, ci, 2 * i, 2 * j]] = v;
                    y[[bi, ci, 2 * i, 2 * j + 1]] = v;
                    y[[bi, ci, 2 * i + 1, 2 * j]] = v;
                    y[[bi, ci, 2 * i + 1, 2 * j + 1]] = v;
                }
            }
        }
    }
    y
}

pub fn upsample_nearest2_backward<R: Real>(dy: &Array4<R>) -> Array4<R> {
    let (b, c, h2, w2) = dy.dim();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Array4::zeros((b, c, h, w));
    for bi in 0..b {
        for ci in 0..c {
            for i in 0..h {
                for j in 0..w {
                    dx[[bi, ci, i, j]] = dy[[bi, ci, 2 * i, 2 * j]]
                        + dy[[bi, ci, 2 * i, 2 * j + 1]]
                        + dy[[bi, ci, 2 * i + 1, 2 * j]]
                        + dy[[bi, ci, 2 * i + 1, 2 * j + 1]];
                }
            }
        }
    }
    dx
}

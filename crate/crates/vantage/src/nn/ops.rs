//! Elementwise ops and batch helpers shared by the layers.

use crate::scalar::Real;
use ndarray::Array2;
use rayon::prelude::*;
use std::sync::atomic::{AtomicBool, Ordering};

/// Whether batch loops may fan out over rayon. Both paths produce
/// bit-identical results (per-sample work is independent and reductions run
/// in index order); the flag only trades memory for speed.
static PARALLEL_BATCH: AtomicBool = AtomicBool::new(true);

pub fn set_batch_parallelism(enabled: bool) {
    PARALLEL_BATCH.store(enabled, Ordering::Relaxed);
}

pub fn batch_parallelism() -> bool {
    PARALLEL_BATCH.load(Ordering::Relaxed)
}

/// Maps `f` over `0..n`, in parallel when enabled, always preserving order.
pub fn batch_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    if batch_parallelism() && n > 1 {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

pub fn relu<R: Real>(x: &Array2<R>) -> Array2<R> {
    x.mapv(|v| v.max(R::zero()))
}

/// dx = dy where x > 0 else 0.
pub fn relu_backward<R: Real>(x: &Array2<R>, dy: &Array2<R>) -> Array2<R> {
    let mut dx = dy.clone();
    dx.zip_mut_with(x, |d, &v| {
        if v <= R::zero() {
            *d = R::zero();
        }
    });
    dx
}

/// Row-wise softmax of `z` with an optional additive mask: masked-out
/// columns (mask false) are excluded from the distribution.
pub fn softmax_rows<R: Real>(z: &Array2<R>, mask: Option<&[bool]>) -> Array2<R> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let mut max = R::neg_infinity();
        for (j, v) in row.iter().enumerate() {
            if mask.map_or(true, |m| m[j]) && *v > max {
                max = *v;
            }
        }
        let mut sum = R::zero();
        for (j, v) in row.iter_mut().enumerate() {
            if mask.map_or(true, |m| m[j]) {
                *v = (*v - max).exp();
                sum += *v;
            } else {
                *v = R::zero();
            }
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Jacobian-vector product of row-wise softmax: dz = y .* (dy - sum(dy .* y)).
pub fn softmax_backward<R: Real>(y: &Array2<R>, dy: &Array2<R>) -> Array2<R> {
    let mut dz = Array2::zeros(y.raw_dim());
    for ((mut dz_row, y_row), dy_row) in dz.rows_mut().into_iter().zip(y.rows()).zip(dy.rows()) {
        let dot: R = y_row.iter().zip(dy_row.iter()).map(|(&a, &b)| a * b).sum();
        for ((d, &yv), &dyv) in dz_row.iter_mut().zip(y_row.iter()).zip(dy_row.iter()) {
            *d = yv * (dyv - dot);
        }
    }
    dz
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = array![[0.0f64, 1.0, 2.0], [5.0, 5.0, 5.0]];
        let y = softmax_rows(&z, None);
        for row in y.rows() {
            let s: f64 = row.sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_mask_zeroes_columns() {
        let z = array![[0.0f64, 100.0, 0.0]];
        let y = softmax_rows(&z, Some(&[true, false, true]));
        assert_eq!(y[[0, 1]], 0.0);
        assert!((y[[0, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let z = array![[0.3f64, -0.7, 1.1, 0.2]];
        let dy = array![[0.5f64, -1.0, 0.25, 2.0]];
        let y = softmax_rows(&z, None);
        let dz = softmax_backward(&y, &dy);
        let h = 1e-6;
        for j in 0..4 {
            let mut zp = z.clone();
            zp[[0, j]] += h;
            let mut zm = z.clone();
            zm[[0, j]] -= h;
            let f = |zz: &Array2<f64>| -> f64 {
                let yy = softmax_rows(zz, None);
                yy.iter().zip(dy.iter()).map(|(a, b)| a * b).sum()
            };
            let fd = (f(&zp) - f(&zm)) / (2.0 * h);
            assert!((dz[[0, j]] - fd).abs() < 1e-6, "col {j}: {} vs {}", dz[[0, j]], fd);
        }
    }

    #[test]
    fn batch_map_order_is_stable() {
        let seq = batch_map(64, |i| i * i);
        assert_eq!(seq, (0..64).map(|i| i * i).collect::<Vec<_>>());
    }
}

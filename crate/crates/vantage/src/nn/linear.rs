//! Fully connected layer with explicit backward.

use crate::nn::param::{NamedSlots, Param};
use crate::nn::rng;
use crate::scalar::Real;
use ndarray::{Array1, Array2, Axis, Ix1, Ix2};
use rand::Rng;

#[derive(Debug, Clone)]
pub struct Linear<R: Real> {
    /// (out, in)
    pub w: Param<R, Ix2>,
    pub b: Param<R, Ix1>,
}

impl<R: Real> Linear<R> {
    /// Fan-in scaled uniform init, zero bias.
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut w = Array2::zeros((out_dim, in_dim));
        rng::fill_uniform_sym(w.view_mut().into_dyn(), bound, rng);
        Self {
            w: Param::new(w),
            b: Param::new(Array1::zeros(out_dim)),
        }
    }

    /// Gaussian init with the given standard deviation, zero bias.
    pub fn new_gaussian(in_dim: usize, out_dim: usize, std: f64, rng: &mut impl Rng) -> Self {
        let mut w = Array2::zeros((out_dim, in_dim));
        rng::fill_normal(w.view_mut(), std, rng);
        Self {
            w: Param::new(w),
            b: Param::new(Array1::zeros(out_dim)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.w.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.w.nrows()
    }

    /// y = x . w^T + b for x of shape (batch, in).
    pub fn forward(&self, x: &Array2<R>) -> Array2<R> {
        let mut y = x.dot(&self.w.w.t());
        y += &self.b.w;
        y
    }

    /// Accumulates parameter gradients and returns dx.
    pub fn backward(&mut self, x: &Array2<R>, dy: &Array2<R>) -> Array2<R> {
        self.w.g = &self.w.g + &dy.t().dot(x);
        self.b.g = &self.b.g + &dy.sum_axis(Axis(0));
        dy.dot(&self.w.w)
    }

    /// Pure gradient computation for parallel batch processing.
    pub fn grads(&self, x: &Array2<R>, dy: &Array2<R>) -> (Array2<R>, Array1<R>, Array2<R>) {
        (dy.t().dot(x), dy.sum_axis(Axis(0)), dy.dot(&self.w.w))
    }

    pub fn collect<'a>(&'a mut self, prefix: &str, out: &mut NamedSlots<'a, R>) {
        out.push((format!("{prefix}.w"), &mut self.w));
        out.push((format!("{prefix}.b"), &mut self.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut lin = Linear::<f64>::new(3, 2, &mut rng);
        lin.w.w = array![[1.0, 0.0, 2.0], [0.0, -1.0, 1.0]];
        lin.b.w = array![0.5, -0.5];
        let y = lin.forward(&array![[1.0, 2.0, 3.0]]);
        assert_eq!(y, array![[7.5, 0.5]]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut lin = Linear::<f64>::new(4, 3, &mut rng);
        let x = Array2::from_shape_fn((2, 4), |(i, j)| 0.3 * (i as f64) - 0.2 * (j as f64) + 0.1);
        let dy = Array2::from_shape_fn((2, 3), |(i, j)| 0.7 - 0.4 * (i as f64) + 0.2 * (j as f64));
        let dx = lin.backward(&x, &dy);

        let h = 1e-6;
        let loss = |lin: &Linear<f64>, x: &Array2<f64>| -> f64 {
            lin.forward(x).iter().zip(dy.iter()).map(|(a, b)| a * b).sum()
        };
        for i in 0..3 {
            for j in 0..4 {
                let mut lp = lin.clone();
                lp.w.w[[i, j]] += h;
                let mut lm = lin.clone();
                lm.w.w[[i, j]] -= h;
                let fd = (loss(&lp, &x) - loss(&lm, &x)) / (2.0 * h);
                assert!((lin.w.g[[i, j]] - fd).abs() < 1e-6);
            }
        }
        for (i, j) in [(0usize, 0usize), (1, 3)] {
            let mut xp = x.clone();
            xp[[i, j]] += h;
            let mut xm = x.clone();
            xm[[i, j]] -= h;
            let fd = (loss(&lin, &xp) - loss(&lin, &xm)) / (2.0 * h);
            assert!((dx[[i, j]] - fd).abs() < 1e-6);
        }
    }
}

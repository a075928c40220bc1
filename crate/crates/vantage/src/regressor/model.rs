//! Reduced-depth residual CNN backbone with a three-linear-layer head.

use crate::error::Result;
use crate::nn::conv::Conv2d;
use crate::nn::linear::Linear;
use crate::nn::norm::{channels_to_rows, rows_to_channels, RowNorm, RowNormCache};
use crate::nn::ops::{relu, relu_backward};
use crate::nn::param::NamedSlots;
use crate::scalar::Real;
use ndarray::{Array2, Array4};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub image_size: usize,
    pub channels: [usize; 3],
    pub head_hidden: usize,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            channels: [16, 32, 64],
            head_hidden: 64,
        }
    }
}

/// Pre-activation residual block at fixed width.
#[derive(Debug, Clone)]
struct ConvResBlock<R: Real> {
    n1: RowNorm<R>,
    c1: Conv2d<R>,
    n2: RowNorm<R>,
    c2: Conv2d<R>,
}

struct ResCache<R: Real> {
    n1_cache: RowNormCache<R>,
    n1_out: Array2<R>,
    m1: Array4<R>,
    n2_cache: RowNormCache<R>,
    n2_out: Array2<R>,
    m2: Array4<R>,
}

impl<R: Real> ConvResBlock<R> {
    fn new(channels: usize, rng: &mut impl Rng) -> Self {
        Self {
            n1: RowNorm::new(channels),
            c1: Conv2d::new(channels, channels, 3, 1, 1, rng),
            n2: RowNorm::new(channels),
            c2: Conv2d::new(channels, channels, 3, 1, 1, rng),
        }
    }

    fn forward_train(&self, x: &Array4<R>) -> (Array4<R>, ResCache<R>) {
        let (b, c, h, w) = x.dim();
        let r1 = channels_to_rows(x);
        let (n1_out, n1_cache) = self.n1.forward(&r1);
        let a1 = relu(&n1_out);
        let m1 = rows_to_channels(&a1, b, c, h, w);
        let h1 = self.c1.forward(&m1);
        let r2 = channels_to_rows(&h1);
        let (n2_out, n2_cache) = self.n2.forward(&r2);
        let a2 = relu(&n2_out);
        let m2 = rows_to_channels(&a2, b, c, h, w);
        let h2 = self.c2.forward(&m2);
        let y = x + &h2;
        (
            y,
            ResCache {
                n1_cache,
                n1_out,
                m1,
                n2_cache,
                n2_out,
                m2,
            },
        )
    }

    fn backward(&mut self, cache: &ResCache<R>, dy: &Array4<R>) -> Array4<R> {
        let (b, c, h, w) = dy.dim();
        let dm2 = self.c2.backward(&cache.m2, dy);
        let da2 = channels_to_rows(&dm2);
        let dn2 = relu_backward(&cache.n2_out, &da2);
        let dr2 = self.n2.backward(&cache.n2_cache, &dn2);
        let dh1 = rows_to_channels(&dr2, b, c, h, w);
        let dm1 = self.c1.backward(&cache.m1, &dh1);
        let da1 = channels_to_rows(&dm1);
        let dn1 = relu_backward(&cache.n1_out, &da1);
        let dr1 = self.n1.backward(&cache.n1_cache, &dn1);
        dy + &rows_to_channels(&dr1, b, c, h, w)
    }

    fn collect<'a>(&'a mut self, prefix: &str, out: &mut NamedSlots<'a, R>) {
        self.n1.collect(&format!("{prefix}.n1"), out);
        self.c1.collect(&format!("{prefix}.c1"), out);
        self.n2.collect(&format!("{prefix}.n2"), out);
        self.c2.collect(&format!("{prefix}.c2"), out);
    }
}

#[derive(Debug, Clone)]
pub struct PoseRegressor<R: Real> {
    pub cfg: RegressorConfig,
    stem: Conv2d<R>,
    block1: ConvResBlock<R>,
    down1: Conv2d<R>,
    block2: ConvResBlock<R>,
    down2: Conv2d<R>,
    block3: ConvResBlock<R>,
    head1: Linear<R>,
    head2: Linear<R>,
    head3: Linear<R>,
}

pub struct RegressorCache<R: Real> {
    x: Array4<R>,
    b1: ResCache<R>,
    b1_out: Array4<R>,
    b2: ResCache<R>,
    b2_out: Array4<R>,
    b3: ResCache<R>,
    b3_out: Array4<R>,
    pooled: Array2<R>,
    h1: Array2<R>,
    a1: Array2<R>,
    h2: Array2<R>,
    a2: Array2<R>,
}

impl<R: Real> PoseRegressor<R> {
    pub fn new(cfg: RegressorConfig, rng: &mut impl Rng) -> Self {
        let [c0, c1, c2] = cfg.channels;
        Self {
            cfg,
            stem: Conv2d::new(3, c0, 3, 1, 1, rng),
            block1: ConvResBlock::new(c0, rng),
            down1: Conv2d::new(c0, c1, 3, 2, 1, rng),
            block2: ConvResBlock::new(c1, rng),
            down2: Conv2d::new(c1, c2, 3, 2, 1, rng),
            block3: ConvResBlock::new(c2, rng),
            head1: Linear::new(c2, cfg.head_hidden, rng),
            head2: Linear::new(cfg.head_hidden, cfg.head_hidden, rng),
            head3: Linear::new(cfg.head_hidden, 6, rng),
        }
    }

    pub fn forward_train(&self, x: &Array4<R>) -> Result<(Array2<R>, RegressorCache<R>)> {
        let (b, c, h, w) = x.dim();
        if c != 3 || h != self.cfg.image_size || w != self.cfg.image_size {
            return Err(crate::error::Error::shape(
                format!("(batch, 3, {0}, {0}) input", self.cfg.image_size),
                format!("({b}, {c}, {h}, {w})"),
            ));
        }
        let stem_out = self.stem.forward(x);
        let (b1_out, b1) = self.block1.forward_train(&stem_out);
        let d1_out = self.down1.forward(&b1_out);
        let (b2_out, b2) = self.block2.forward_train(&d1_out);
        let d2_out = self.down2.forward(&b2_out);
        let (b3_out, b3) = self.block3.forward_train(&d2_out);
        let (_, cf, hf, wf) = b3_out.dim();
        let inv_hw = R::one() / R::of((hf * wf) as f64);
        let mut pooled = Array2::zeros((b, cf));
        for bi in 0..b {
            for ci in 0..cf {
                pooled[[bi, ci]] = b3_out
                    .index_axis(ndarray::Axis(0), bi)
                    .index_axis(ndarray::Axis(0), ci)
                    .sum()
                    * inv_hw;
            }
        }
        let h1 = self.head1.forward(&pooled);
        let a1 = relu(&h1);
        let h2 = self.head2.forward(&a1);
        let a2 = relu(&h2);
        let out = self.head3.forward(&a2);
        Ok((
            out,
            RegressorCache {
                x: x.clone(),
                b1,
                b1_out,
                b2,
                b2_out,
                b3,
                b3_out,
                pooled,
                h1,
                a1,
                h2,
                a2,
            },
        ))
    }

    pub fn forward(&self, x: &Array4<R>) -> Result<Array2<R>> {
        Ok(self.forward_train(x)?.0)
    }

    pub fn backward(&mut self, cache: &RegressorCache<R>, dout: &Array2<R>) {
        let da2 = self.head3.backward(&cache.a2, dout);
        let dh2 = relu_backward(&cache.h2, &da2);
        let da1 = self.head2.backward(&cache.a1, &dh2);
        let dh1 = relu_backward(&cache.h1, &da1);
        let dpooled = self.head1.backward(&cache.pooled, &dh1);
        let (b, cf, hf, wf) = cache.b3_out.dim();
        let inv_hw = R::one() / R::of((hf * wf) as f64);
        let mut db3 = Array4::zeros((b, cf, hf, wf));
        for bi in 0..b {
            for ci in 0..cf {
                let v = dpooled[[bi, ci]] * inv_hw;
                db3.index_axis_mut(ndarray::Axis(0), bi)
                    .index_axis_mut(ndarray::Axis(0), ci)
                    .fill(v);
            }
        }
        let dd2 = self.block3.backward(&cache.b3, &db3);
        let db2 = self.down2.backward(&cache.b2_out, &dd2);
        let dd1 = self.block2.backward(&cache.b2, &db2);
        let db1 = self.down1.backward(&cache.b1_out, &dd1);
        let dstem = self.block1.backward(&cache.b1, &db1);
        let _ = self.stem.backward(&cache.x, &dstem);
    }

    pub fn collect<'a>(&'a mut self, out: &mut NamedSlots<'a, R>) {
        self.stem.collect("stem", out);
        self.block1.collect("block1", out);
        self.down1.collect("down1", out);
        self.block2.collect("block2", out);
        self.down2.collect("down2", out);
        self.block3.collect("block3", out);
        self.head1.collect("head.fc1", out);
        self.head2.collect("head.fc2", out);
        self.head3.collect("head.fc3", out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_shapes_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = RegressorConfig {
            image_size: 16,
            channels: [4, 8, 8],
            head_hidden: 16,
        };
        let model = PoseRegressor::<f64>::new(cfg, &mut rng);
        let x = Array4::from_shape_fn((2, 3, 16, 16), |(b, c, i, j)| {
            ((b + c + i + j) as f64 * 0.11).sin()
        });
        let y1 = model.forward(&x).unwrap();
        let y2 = model.forward(&x).unwrap();
        assert_eq!(y1.dim(), (2, 6));
        assert_eq!(y1, y2);
        // Wrong input size is a shape error.
        let bad = Array4::zeros((1, 3, 8, 8));
        assert!(model.forward(&bad).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = RegressorConfig {
            image_size: 8,
            channels: [3, 4, 5],
            head_hidden: 7,
        };
        let mut model = PoseRegressor::<f64>::new(cfg, &mut rng);
        let x = Array4::from_shape_fn((2, 3, 8, 8), |(b, c, i, j)| {
            ((b * 7 + c * 3 + i * 5 + j) as f64 * 0.13).cos()
        });
        let dout = Array2::from_shape_fn((2, 6), |(i, j)| 0.3 - 0.1 * (i as f64) + 0.05 * (j as f64));
        let (_, cache) = model.forward_train(&x).unwrap();
        model.backward(&cache, &dout);

        let loss = |m: &PoseRegressor<f64>| -> f64 {
            m.forward(&x)
                .unwrap()
                .iter()
                .zip(dout.iter())
                .map(|(a, b)| a * b)
                .sum()
        };
        let h = 1e-5;
        // One weight from several depths of the network.
        let grads: Vec<f64> = vec![
            model.stem.w.g[[0, 0, 1, 1]],
            model.down2.w.g[[1, 0, 0, 2]],
            model.head3.w.g[[3, 2]],
        ];
        let mut checks = Vec::new();
        {
            let mut mp = model.clone();
            mp.stem.w.w[[0, 0, 1, 1]] += h;
            let mut mm = model.clone();
            mm.stem.w.w[[0, 0, 1, 1]] -= h;
            checks.push((loss(&mp) - loss(&mm)) / (2.0 * h));
        }
        {
            let mut mp = model.clone();
            mp.down2.w.w[[1, 0, 0, 2]] += h;
            let mut mm = model.clone();
            mm.down2.w.w[[1, 0, 0, 2]] -= h;
            checks.push((loss(&mp) - loss(&mm)) / (2.0 * h));
        }
        {
            let mut mp = model.clone();
            mp.head3.w.w[[3, 2]] += h;
            let mut mm = model.clone();
            mm.head3.w.w[[3, 2]] -= h;
            checks.push((loss(&mp) - loss(&mm)) / (2.0 * h));
        }
        for (g, fd) in grads.iter().zip(&checks) {
            let denom = fd.abs().max(1e-8);
            assert!(
                ((g - fd) / denom).abs() < 1e-4,
                "analytic {g} vs finite difference {fd}"
            );
        }
    }

    #[test]
    fn head_has_exactly_three_linear_layers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut model = PoseRegressor::<f32>::new(RegressorConfig::default(), &mut rng);
        let mut slots = Vec::new();
        model.collect(&mut slots);
        let head_layers: std::collections::BTreeSet<String> = slots
            .iter()
            .filter(|(n, _)| n.starts_with("head."))
            .map(|(n, _)| n.split('.').nth(1).unwrap().to_string())
            .collect();
        assert_eq!(head_layers.len(), 3);
    }
}

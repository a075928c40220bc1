//! AdamW with decoupled weight decay, per-group learning rates, and global
//! gradient-norm clipping.

use crate::error::{Error, Result};
use crate::nn::param::NamedSlots;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

pub struct ParamGroup<'a, R: Real> {
    pub lr: f64,
    pub params: NamedSlots<'a, R>,
}

pub struct AdamW<R: Real> {
    pub cfg: AdamWConfig,
    step: u64,
    /// Per group, per parameter: (m, v) flat moment buffers.
    state: Vec<Vec<(Vec<R>, Vec<R>)>>,
}

impl<R: Real> AdamW<R> {
    pub fn new(cfg: AdamWConfig) -> Self {
        Self {
            cfg,
            step: 0,
            state: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. Groups must be passed in the same order every call.
    pub fn step(&mut self, groups: &mut [ParamGroup<'_, R>]) -> Result<()> {
        if self.state.is_empty() {
            for group in groups.iter() {
                let mut per_param = Vec::with_capacity(group.params.len());
                for (_, slot) in &group.params {
                    let n = slot.num_elements();
                    per_param.push((vec![R::zero(); n], vec![R::zero(); n]));
                }
                self.state.push(per_param);
            }
        }
        if self.state.len() != groups.len() {
            return Err(Error::config("optimizer group count changed between steps"));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        let beta1 = R::of(self.cfg.beta1);
        let beta2 = R::of(self.cfg.beta2);
        let one_m_b1 = R::of(1.0 - self.cfg.beta1);
        let one_m_b2 = R::of(1.0 - self.cfg.beta2);
        let eps = R::of(self.cfg.eps);

        for (group, state) in groups.iter_mut().zip(self.state.iter_mut()) {
            let lr = R::of(group.lr);
            let decay_mult = R::of(1.0 - group.lr * self.cfg.weight_decay);
            let inv_bc1 = R::of(1.0 / bc1);
            let inv_bc2 = R::of(1.0 / bc2);
            for ((name, slot), (m, v)) in group.params.iter_mut().zip(state.iter_mut()) {
                if slot.num_elements() != m.len() {
                    return Err(Error::config(format!(
                        "parameter {name} changed size between optimizer steps"
                    )));
                }
                let grad = slot.grad().to_owned();
                let gs = grad.as_slice().expect("grad is contiguous");
                let mut value = slot.value_mut();
                let ws = value.as_slice_mut().expect("value is contiguous");
                for i in 0..ws.len() {
                    ws[i] *= decay_mult;
                    m[i] = beta1 * m[i] + one_m_b1 * gs[i];
                    v[i] = beta2 * v[i] + one_m_b2 * gs[i] * gs[i];
                    let m_hat = m[i] * inv_bc1;
                    let v_hat = v[i] * inv_bc2;
                    ws[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

/// Scales all gradients so the global L2 norm does not exceed `max_norm`.
/// Returns the pre-clip norm. Accumulates in f64 regardless of scalar type.
pub fn clip_global_norm<R: Real>(groups: &mut [ParamGroup<'_, R>], max_norm: f64) -> f64 {
    let mut total = 0.0f64;
    for group in groups.iter() {
        for (_, slot) in &group.params {
            for &g in slot.grad().iter() {
                let g = g.to_f64_();
                total += g * g;
            }
        }
    }
    let norm = total.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = R::of(max_norm / norm);
        for group in groups.iter_mut() {
            for (_, slot) in group.params.iter_mut() {
                slot.grad_mut().mapv_inplace(|g| g * scale);
            }
        }
    }
    norm
}

pub fn zero_all_grads<R: Real>(groups: &mut [ParamGroup<'_, R>]) {
    for group in groups.iter_mut() {
        for (_, slot) in group.params.iter_mut() {
            slot.zero_grad_slot();
        }
    }
}

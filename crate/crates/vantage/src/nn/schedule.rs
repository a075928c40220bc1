//! Learning-rate schedule: linear warmup into a cosine decay to zero.

#[derive(Debug, Clone, Copy)]
pub struct WarmupCosine {
    pub total_steps: usize,
    pub warmup_steps: usize,
}

impl WarmupCosine {
    pub fn new(total_steps: usize, warmup_frac: f64) -> Self {
        let warmup_steps = ((total_steps as f64 * warmup_frac).round() as usize).max(1);
        Self {
            total_steps,
            warmup_steps,
        }
    }

    /// Multiplier in [0, 1]; 1 exactly at the end of warmup, 0 at the end of
    /// training.
    pub fn factor(&self, step: usize) -> f64 {
        if step <= self.warmup_steps {
            step as f64 / self.warmup_steps as f64
        } else if step >= self.total_steps {
            0.0
        } else {
            let span = (self.total_steps - self.warmup_steps) as f64;
            let progress = (step - self.warmup_steps) as f64 / span;
            0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
        }
    }

    pub fn lr_at(&self, step: usize, peak: f64) -> f64 {
        peak * self.factor(step)
    }
}

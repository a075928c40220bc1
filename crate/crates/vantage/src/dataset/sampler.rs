//! Equal-mixing batch sampler: every batch holds exactly half rendered and
//! half augmented samples, uniform within each split, reshuffled per epoch.

use crate::dataset::records::SplitKind;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

pub struct MixedBatchSampler {
    batch_size: usize,
    rng: ChaCha8Rng,
    rendered: SplitCursor,
    augmented: SplitCursor,
}

struct SplitCursor {
    order: Vec<usize>,
    pos: usize,
}

impl SplitCursor {
    fn new(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n, // forces a shuffle before the first draw
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> usize {
        if self.pos >= self.order.len() {
            self.order.shuffle(rng);
            self.pos = 0;
        }
        let idx = self.order[self.pos];
        self.pos += 1;
        idx
    }
}

impl MixedBatchSampler {
    pub fn new(
        rendered_len: usize,
        augmented_len: usize,
        batch_size: usize,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if batch_size == 0 || batch_size % 2 != 0 {
            return Err(Error::config(format!(
                "batch_size must be even and positive, got {batch_size}"
            )));
        }
        if rendered_len == 0 || augmented_len == 0 {
            return Err(Error::config(
                "equal mixing needs both the rendered and the augmented split",
            ));
        }
        Ok(Self {
            batch_size,
            rng,
            rendered: SplitCursor::new(rendered_len),
            augmented: SplitCursor::new(augmented_len),
        })
    }

    /// Next batch: first half rendered indices, second half augmented.
    pub fn next_batch(&mut self) -> Vec<(SplitKind, usize)> {
        let half = self.batch_size / 2;
        let mut batch = Vec::with_capacity(self.batch_size);
        for _ in 0..half {
            batch.push((SplitKind::Rendered, self.rendered.next(&mut self.rng)));
        }
        for _ in 0..half {
            batch.push((SplitKind::Augmented, self.augmented.next(&mut self.rng)));
        }
        batch
    }
}

impl Iterator for MixedBatchSampler {
    type Item = Vec<(SplitKind, usize)>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_batch())
    }
}

use crate::numeric::rng::SeededRng;

/// Endless shuffled pass over a pool of indices; reshuffles after each pass.
#[derive(Clone, Debug)]
struct Pool {
    order: Vec<usize>,
    cursor: usize,
}

impl Pool {
    fn new(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            cursor: n,
        }
    }

    /// Up to `batch` indices, never crossing a pass boundary.
    fn next(&mut self, batch: usize, rng: &mut SeededRng) -> Vec<usize> {
        if self.order.is_empty() {
            return Vec::new();
        }
        if self.cursor >= self.order.len() {
            rng.shuffle(&mut self.order);
            self.cursor = 0;
        }
        let end = (self.cursor + batch).min(self.order.len());
        let out = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        out
    }
}

/// Paired labeled/unlabeled mini-batches. Each pool is shuffled independently
/// and the smaller one cycles while the larger defines the epoch length.
#[derive(Clone, Debug)]
pub struct BatchIterator {
    labeled: Pool,
    unlabeled: Pool,
    batch_size: usize,
    rng_labeled: SeededRng,
    rng_unlabeled: SeededRng,
}

/// One step: indices into the labeled and unlabeled partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchIndices {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

impl BatchIterator {
    pub fn new(n_labeled: usize, n_unlabeled: usize, batch_size: usize, rng: &SeededRng) -> Self {
        assert!(n_labeled > 0, "labeled set must be non-empty");
        assert!(batch_size > 0, "batch size must be positive");
        Self {
            labeled: Pool::new(n_labeled),
            unlabeled: Pool::new(n_unlabeled),
            batch_size,
            rng_labeled: rng.fork(rng.stream() * 2 + 101),
            rng_unlabeled: rng.fork(rng.stream() * 2 + 102),
        }
    }

    /// Steps per epoch: enough batches to pass once over the larger pool.
    pub fn steps_per_epoch(&self) -> usize {
        let n = self.labeled.order.len().max(self.unlabeled.order.len());
        n.div_ceil(self.batch_size)
    }

    pub fn next_step(&mut self) -> BatchIndices {
        BatchIndices {
            labeled: self.labeled.next(self.batch_size, &mut self.rng_labeled),
            unlabeled: self.unlabeled.next(self.batch_size, &mut self.rng_unlabeled),
        }
    }

    /// `steps` consecutive steps (default: one epoch).
    pub fn epoch(&mut self, steps: Option<usize>) -> Vec<BatchIndices> {
        let n = steps.unwrap_or_else(|| self.steps_per_epoch());
        (0..n).map(|_| self.next_step()).collect()
    }
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Epoch-wise shuffled mini-batches without replacement. The last batch of
/// an epoch may be short, so every example is visited exactly once per
/// epoch.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
    epoch: u64,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        assert!(n > 0 && batch_size > 0, "sampler needs examples and a positive batch size");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        Self {
            order,
            batch_size,
            cursor: 0,
            epoch: 0,
            rng,
        }
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }

    /// Zero-based epoch of the batch the next call returns.
    pub fn epoch(&self) -> u64 {
        if self.cursor >= self.order.len() {
            self.epoch + 1
        } else {
            self.epoch
        }
    }

    pub fn next_batch(&mut self) -> &[usize] {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
            self.epoch += 1;
        }
        let start = self.cursor;
        self.cursor = (start + self.batch_size).min(self.order.len());
        &self.order[start..self.cursor]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_example_once_per_epoch() {
        let mut s = BatchSampler::new(23, 5, 1);
        assert_eq!(s.batches_per_epoch(), 5);
        for epoch in 0..3 {
            let mut seen = [0; 23];
            for _ in 0..5 {
                assert_eq!(s.epoch(), epoch);
                for &i in s.next_batch() {
                    seen[i] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn seeded() {
        let mut a = BatchSampler::new(50, 7, 3);
        let mut b = BatchSampler::new(50, 7, 3);
        for _ in 0..20 {
            assert_eq!(a.next_batch(), b.next_batch());
        }
    }
}

//! Seeded parallel ensembles with batch-deterministic reduction.
//!
//! Trajectories `0..n` are split into contiguous batches. Each batch is
//! processed sequentially on one worker and results are returned in batch
//! order, so the output is bit-identical for any number of workers.

use rayon::prelude::*;

use crate::rng::{stream, StreamRng};

/// Default number of batches used for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 32;

/// Contiguous range of trajectory indices forming one batch.
#[derive(Clone, Copy, Debug)]
pub struct Batch {
    pub index: usize,
    pub start: u64,
    pub end: u64,
    seed: u64,
}

impl Batch {
    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// `(trajectory index, its random stream)` for every trajectory.
    pub fn streams(&self) -> impl Iterator<Item = (u64, StreamRng)> + '_ {
        (self.start..self.end).map(move |i| (i, stream(self.seed, i)))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Ensemble {
    pub seed: u64,
    pub samples: u64,
    pub batches: usize,
}

impl Ensemble {
    pub fn new(seed: u64, samples: u64) -> Self {
        let batches = DEFAULT_BATCHES.min(samples.max(1) as usize);
        Ensemble {
            seed,
            samples,
            batches,
        }
    }

    pub fn with_batches(mut self, batches: usize) -> Self {
        self.batches = batches.clamp(1, self.samples.max(1) as usize);
        self
    }

    pub fn batch(&self, b: usize) -> Batch {
        let n = self.samples;
        let k = self.batches as u64;
        let start = n * b as u64 / k;
        let end = n * (b as u64 + 1) / k;
        Batch {
            index: b,
            start,
            end,
            seed: self.seed,
        }
    }

    /// Apply `f` to every batch in parallel; results are in batch order.
    pub fn map_batches<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Batch) -> T + Sync + Send,
    {
        (0..self.batches)
            .into_par_iter()
            .map(|b| f(self.batch(b)))
            .collect()
    }
}

/// Run `f` inside a rayon pool with `workers` threads (0 = default pool).
pub fn with_workers<T: Send, F: FnOnce() -> T + Send>(workers: usize, f: F) -> T {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
        .install(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn batches_partition_the_range() {
        let e = Ensemble::new(1, 1003);
        let mut next = 0;
        for b in 0..e.batches {
            let r = e.batch(b);
            assert_eq!(r.start, next);
            next = r.end;
        }
        assert_eq!(next, 1003);
        assert_eq!(Ensemble::new(1, 5).batches, 5);
    }

    #[test]
    fn output_is_independent_of_worker_count() {
        let run = |w| {
            with_workers(w, || {
                Ensemble::new(42, 5000)
                    .map_batches(|b| b.streams().map(|(_, mut r)| r.random::<f64>()).sum::<f64>())
            })
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one, four);
    }
}

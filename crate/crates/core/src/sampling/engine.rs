//! Deterministic block-parallel replication engine.
//!
//! `reps` replications are split into `workers` contiguous blocks; the first
//! `reps % workers` blocks get one extra replication. Block `j` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` switched to stream `j`, so every block
//! has its own independent stream. Block results are integer counts combined
//! by addition, so the total does not depend on scheduling, and builds with
//! or without the `parallel` feature produce identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Outcome;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockCounts {
    pub hits: u64,
    pub undefined: u64,
    pub trials: u64,
}

impl BlockCounts {
    pub fn record(&mut self, outcome: Outcome) {
        self.trials += 1;
        match outcome {
            Outcome::Hit => self.hits += 1,
            Outcome::Miss => {}
            Outcome::Undefined => self.undefined += 1,
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            hits: self.hits + other.hits,
            undefined: self.undefined + other.undefined,
            trials: self.trials + other.trials,
        }
    }
}

pub fn block_sizes(reps: u64, workers: usize) -> Vec<u64> {
    let w = workers as u64;
    (0..w).map(|j| reps / w + u64::from(j < reps % w)).collect()
}

/// The random stream owned by block `block`.
pub fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// Runs `block(rng, block_reps)` for each block and sums the counts.
pub fn run_blocks<F>(reps: u64, seed: u64, workers: usize, block: F) -> Result<BlockCounts>
where
    F: Fn(&mut ChaCha8Rng, u64) -> BlockCounts + Sync,
{
    let counts = map_blocks(reps, seed, workers, block)?;
    Ok(counts.into_iter().fold(BlockCounts::default(), BlockCounts::merge))
}

/// Runs `block(rng, block_reps)` for each block; results come back in block
/// order regardless of scheduling.
pub fn map_blocks<T, F>(reps: u64, seed: u64, workers: usize, block: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync,
{
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    if workers == 0 {
        return Err(Error::InvalidParameter("workers must be at least 1".into()));
    }
    let sizes = block_sizes(reps, workers);
    let run = |(j, &size): (usize, &u64)| block(&mut block_rng(seed, j), size);

    #[cfg(feature = "parallel")]
    let out = {
        use rayon::prelude::*;
        sizes.par_iter().enumerate().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let out = sizes.iter().enumerate().map(run).collect();

    Ok(out)
}

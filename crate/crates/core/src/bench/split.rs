use rand::seq::{index, SliceRandom};
use serde::Serialize;

use super::BenchError;
use crate::ad::seeded_rng;

pub const DEFAULT_DOWNSAMPLE: usize = 1000;
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub downsample_n: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl SplitPlan {
    pub fn sampled(&self) -> impl Iterator<Item = usize> + '_ {
        self.train_indices.iter().chain(&self.test_indices).copied()
    }
}

/// Samples min(`downsample_n`, n) of `n` records without replacement,
/// shuffles them and puts the first round(0.8 m) in the training set.
pub fn sample_and_split(n: usize, downsample_n: usize, seed: u64) -> Result<SplitPlan, BenchError> {
    if n < 10 {
        return Err(BenchError::TooFewRecords { n, min: 10 });
    }
    let mut rng = seeded_rng(seed);
    let m = downsample_n.min(n);
    let mut sampled = index::sample(&mut rng, n, m).into_vec();
    sampled.shuffle(&mut rng);
    let n_train = (TRAIN_FRACTION * m as f64).round() as usize;
    let test_indices = sampled.split_off(n_train);
    Ok(SplitPlan {
        seed,
        downsample_n,
        train_indices: sampled,
        test_indices,
    })
}

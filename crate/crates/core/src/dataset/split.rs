use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, Result};

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.70, 0.15, 0.15);

/// Scene ids of the train/validation/test partitions, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitAssignment {
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

impl SplitAssignment {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }

    pub fn get(&self, name: &str) -> Option<&[u64]> {
        match name {
            "train" => Some(&self.train),
            "val" | "validation" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }
}

/// Shuffles `ids` with `seed` and cuts the permutation into three contiguous parts.
pub fn split(ids: &[u64], fractions: (f64, f64, f64), seed: u64) -> Result<SplitAssignment> {
    let n = ids.len();
    if n < 3 {
        return Err(DatasetError::InvalidArgument(format!(
            "need at least 3 samples to split, got {n}"
        )));
    }
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !(*f >= 0.0)) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(DatasetError::InvalidArgument(format!(
            "split fractions must be non-negative and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    let mut perm = ids.to_vec();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((a * n as f64).round() as usize).min(n);
    let n_val = ((b * n as f64).round() as usize).min(n - n_train);
    let mut train = perm[..n_train].to_vec();
    let mut val = perm[n_train..n_train + n_val].to_vec();
    let mut test = perm[n_train + n_val..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitAssignment { train, val, test })
}

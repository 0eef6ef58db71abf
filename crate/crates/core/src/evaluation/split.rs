use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitParams {
    pub n_splits: usize,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            n_splits: 10,
            test_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// Ascending.
    pub train: Vec<usize>,
    /// Ascending.
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_splits: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Smallest dataset `shuffle_split` accepts.
pub const MIN_SAMPLES: usize = 10;

/// Number of test rows per fold: `round(test_fraction * n)`, halves rounded up.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    (test_fraction * n as f64).round() as usize
}

/// ShuffleSplit folds. A single SplitMix64 stream seeded with `params.seed`
/// drives every fold in order: each fold shuffles a fresh identity
/// permutation of `0..n` with [`SplitMix64::shuffle`] and takes its first
/// `test_size` entries as the test set. Test sets of different folds may overlap.
pub fn shuffle_split(n: usize, params: &SplitParams) -> Result<FoldPlan, EvalError> {
    if n < MIN_SAMPLES {
        return Err(EvalError::TooFewSamples { n, min: MIN_SAMPLES });
    }
    if params.n_splits == 0 {
        return Err(EvalError::NoSplits);
    }
    if !(params.test_fraction > 0.0 && params.test_fraction < 1.0) {
        return Err(EvalError::InvalidTestFraction(params.test_fraction));
    }
    let t = test_size(n, params.test_fraction);
    if t == 0 || t == n {
        return Err(EvalError::DegenerateSplit { n, test: t });
    }
    let mut rng = SplitMix64::new(params.seed);
    let folds = (0..params.n_splits)
        .map(|_| {
            let mut perm: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut perm);
            let mut test = perm[..t].to_vec();
            let mut train = perm[t..].to_vec();
            test.sort_unstable();
            train.sort_unstable();
            Fold { train, test }
        })
        .collect();
    Ok(FoldPlan {
        n_splits: params.n_splits,
        test_fraction: params.test_fraction,
        seed: params.seed,
        folds,
    })
}

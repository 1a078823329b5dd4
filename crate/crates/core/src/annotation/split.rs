use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::ApparelId;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<ApparelId>,
    pub validation: Vec<ApparelId>,
    pub test: Vec<ApparelId>,
}

impl DatasetSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("cannot split an empty id list")]
    EmptyInput,
    #[error("ratios must be non-negative and sum to 1 (got {0}, {1}, {2})")]
    InvalidRatios(f64, f64, f64),
    #[error("id `{0}` appears more than once")]
    DuplicateId(String),
}

const RATIO_TOLERANCE: f64 = 1e-9;

/// Partition sizes: `floor(n * ratio)` per bucket, then the leftover ids are
/// dealt one at a time to train, validation, test, train, ...
pub fn split_sizes(n: usize, ratios: SplitRatios) -> (usize, usize, usize) {
    let floor = |r: f64| ((n as f64) * r + RATIO_TOLERANCE).floor() as usize;
    let mut sizes = [floor(ratios.train), floor(ratios.validation), floor(ratios.test)];
    let assigned: usize = sizes.iter().sum();
    for k in 0..n.saturating_sub(assigned) {
        sizes[k % 3] += 1;
    }
    (sizes[0], sizes[1], sizes[2])
}

/// Shuffles `ids` with [`SplitMix64`] seeded by `seed`, then cuts the shuffled
/// list into train, validation and test by [`split_sizes`].
pub fn split_dataset(ids: &[ApparelId], ratios: SplitRatios, seed: u64) -> Result<DatasetSplit, SplitError> {
    if ids.is_empty() {
        return Err(SplitError::EmptyInput);
    }
    let SplitRatios {
        train,
        validation,
        test,
    } = ratios;
    let finite = [train, validation, test].iter().all(|r| r.is_finite() && *r >= 0.0);
    if !finite || ((train + validation + test) - 1.0).abs() > RATIO_TOLERANCE {
        return Err(SplitError::InvalidRatios(train, validation, test));
    }
    let mut seen = HashSet::with_capacity(ids.len());
    if let Some(dup) = ids.iter().find(|id| !seen.insert(*id)) {
        return Err(SplitError::DuplicateId(dup.to_string()));
    }

    let mut shuffled = ids.to_vec();
    SplitMix64::new(seed).shuffle(&mut shuffled);
    let (n_train, n_val, _) = split_sizes(ids.len(), ratios);
    let test = shuffled.split_off(n_train + n_val);
    let validation = shuffled.split_off(n_train);
    Ok(DatasetSplit {
        train: shuffled,
        validation,
        test,
    })
}

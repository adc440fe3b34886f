use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, tags};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded random split; the train side gets `round(fraction · n)` rows.
/// Both index lists are returned in ascending order.
pub fn split(n_rows: usize, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Argument(format!(
            "train fraction must lie strictly between 0 and 1, got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * n_rows as f64).round() as usize;
    let mut perm: Vec<usize> = (0..n_rows).collect();
    perm.shuffle(&mut stream_rng(seed, &[tags::SPLIT]));
    let mut train = perm[..n_train].to_vec();
    let mut test = perm[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

use rand::seq::SliceRandom;

use super::MultilabelDataset;
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};

/// Seeded disjoint split. Both halves keep the source order.
pub fn train_val_split(
    ds: &MultilabelDataset,
    val_fraction: f64,
    seed: u64,
) -> Result<(MultilabelDataset, MultilabelDataset)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "val_fraction {val_fraction} outside (0,1)"
        )));
    }
    let (train_idx, val_idx) = split_indices(ds.len(), val_fraction, seed)?;
    Ok((ds.subset(&train_idx)?, ds.subset(&val_idx)?))
}

pub(crate) fn split_indices(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = (val_fraction * n as f64).round() as usize;
    if n < 2 || n_val == 0 || n_val >= n {
        return Err(Error::invalid(format!(
            "split of {n} samples at {val_fraction} leaves an empty side"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, &[tag::SPLIT]));
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

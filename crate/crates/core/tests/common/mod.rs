//! Oracles shared by the integration tests. Nothing here calls into the code
//! paths it is used to check.
#![allow(dead_code)]

use std::collections::BTreeSet;

use fedsim_core::data::{Image, ImageShape, LabelVector, MultilabelDataset};
use fedsim_core::learners::{loss_and_grad, LearnerSpec, ModelWeights, ProximalConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_batch(shape: ImageShape, n_labels: usize, n: usize, seed: u64) -> (Vec<Image>, Vec<LabelVector>) {
    let mut r = rng(seed);
    let images = (0..n)
        .map(|_| Image::new(shape, (0..shape.len()).map(|_| r.random::<f64>()).collect()).unwrap())
        .collect();
    let labels = (0..n)
        .map(|_| LabelVector::from_bits((0..n_labels).map(|_| r.random::<bool>()).collect()))
        .collect();
    (images, labels)
}

/// Worst relative error between the analytic gradient and central
/// differences over `n_coords` random coordinates.
pub fn gradient_check(
    spec: &LearnerSpec,
    w: &ModelWeights,
    images: &[Image],
    labels: &[LabelVector],
    prox: Option<&ProximalConfig>,
    n_coords: usize,
    seed: u64,
) -> f64 {
    const STEP: f64 = 1e-5;
    const FLOOR: f64 = 1e-6;
    let imgs: Vec<&Image> = images.iter().collect();
    let labs: Vec<&LabelVector> = labels.iter().collect();
    let (_, grad) = loss_and_grad(spec, w, &imgs, &labs, prox).unwrap();
    let loss_at = |values: Vec<f64>| {
        let wp = w.with_values(values).unwrap();
        loss_and_grad(spec, &wp, &imgs, &labs, prox).unwrap().0
    };
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..n_coords {
        let i = r.random_range(0..w.len());
        let mut plus = w.values().to_vec();
        plus[i] += STEP;
        let mut minus = w.values().to_vec();
        minus[i] -= STEP;
        let numeric = (loss_at(plus) - loss_at(minus)) / (2.0 * STEP);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    worst
}

/// Sample-size weighted mean of flat vectors, computed one scalar at a time.
pub fn scalar_weighted_mean(updates: &[(usize, Vec<f64>)]) -> Vec<f64> {
    let total: usize = updates.iter().map(|(n, _)| n).sum();
    let len = updates[0].1.len();
    let mut out = Vec::with_capacity(len);
    for j in 0..len {
        let mut num = 0.0;
        for (n, w) in updates {
            num += *n as f64 * w[j];
        }
        out.push(num / total as f64);
    }
    out
}

/// (exact match, Jaccard, F1) for one sample, from label sets. Two empty
/// sets score 1 on every measure.
pub fn set_scores(y: &LabelVector, z: &LabelVector) -> (f64, f64, f64) {
    let ys: BTreeSet<usize> = (0..y.len()).filter(|&i| y.get(i)).collect();
    let zs: BTreeSet<usize> = (0..z.len()).filter(|&i| z.get(i)).collect();
    if ys.is_empty() && zs.is_empty() {
        return (1.0, 1.0, 1.0);
    }
    let inter = ys.intersection(&zs).count() as f64;
    let union = ys.union(&zs).count() as f64;
    let exact = if ys == zs { 1.0 } else { 0.0 };
    (exact, inter / union, 2.0 * inter / (ys.len() + zs.len()) as f64)
}

pub fn random_labels(n_labels: usize, density: f64, r: &mut ChaCha8Rng) -> LabelVector {
    LabelVector::from_bits((0..n_labels).map(|_| r.random_bool(density)).collect())
}

/// Candidate sets for the monopoly labels, rebuilt from scratch: the
/// `n_clients` rarest labels of the chosen pool (ties by index), each sample
/// going to the rarest pool label it carries.
pub fn monopoly_candidates(
    ds: &MultilabelDataset,
    n_clients: usize,
    small_skew: bool,
    threshold: f64,
) -> Vec<(usize, Vec<usize>)> {
    let n = ds.len();
    let mut counts = vec![0usize; ds.n_labels()];
    for s in ds.samples() {
        for (l, c) in counts.iter_mut().enumerate() {
            if s.labels.get(l) {
                *c += 1;
            }
        }
    }
    let mut pool: Vec<usize> = (0..ds.n_labels())
        .filter(|&l| counts[l] > 0 && ((counts[l] as f64 > threshold * n as f64) != small_skew))
        .collect();
    pool.sort_by_key(|&l| (counts[l], l));
    pool.truncate(n_clients);
    let mut out: Vec<(usize, Vec<usize>)> = pool.iter().map(|&l| (l, Vec::new())).collect();
    for (i, s) in ds.samples().iter().enumerate() {
        if let Some(slot) = out.iter_mut().find(|(l, _)| s.labels.get(*l)) {
            slot.1.push(i);
        }
    }
    out
}

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Model, ModelWeights, ProximalConfig};
use crate::augment::maybe_hflip;
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            momentum: 0.9,
        }
    }
}

/// SGD with classical momentum: `v ← m·v − lr·g`, `w ← w + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: OptimizerConfig,
    pub velocity: Vec<f64>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig, n_params: usize) -> Self {
        Self {
            config,
            velocity: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, weights: &mut [f64], grad: &[f64]) {
        let OptimizerConfig {
            learning_rate: lr,
            momentum: m,
        } = self.config;
        for ((w, v), g) in weights.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = m * *v - lr * g;
            *w += *v;
        }
    }
}

/// Runs `epochs` passes of shuffled mini-batch SGD over `shard`, flipping each
/// image with probability one half per epoch. Velocity starts at zero.
/// Returns the trained weights and the number of batches run.
#[allow(clippy::too_many_arguments)]
pub fn local_train(
    model: &Model,
    w_in: &ModelWeights,
    shard: &[Sample],
    epochs: usize,
    batch_size: usize,
    opt: &OptimizerConfig,
    prox: Option<&ProximalConfig>,
    seed: u64,
) -> Result<(ModelWeights, usize)> {
    if shard.is_empty() {
        return Err(Error::invalid("local training on an empty shard"));
    }
    if epochs == 0 || batch_size == 0 {
        return Err(Error::invalid("epochs and batch size must be at least 1"));
    }
    let mut rng = rng_for(seed, &[tag::LOCAL_TRAIN]);
    let mut w = w_in.clone();
    let mut state = OptimizerState::new(*opt, w.len());
    let mut order: Vec<usize> = (0..shard.len()).collect();
    let mut batches = 0;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let images: Vec<_> = chunk
                .iter()
                .map(|&i| maybe_hflip(&shard[i].image, rng.random::<f64>()))
                .collect();
            let (inputs, n) = model.pack(&images)?;
            let targets = model.pack_labels(chunk.iter().map(|&i| &shard[i].labels))?;
            let (_, grad) = model.loss_and_grad(&w, inputs, &targets, n, prox)?;
            state.step(w.values_mut(), &grad);
            batches += 1;
        }
    }
    if w.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("weights after local training".into()));
    }
    Ok((w, batches))
}

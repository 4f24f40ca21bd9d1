use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;

use super::{fedavg_aggregate, Algorithm, CommLedger, FederationConfig, RoundRecord, RunResult};
use crate::data::{Image, LabelVector, MultilabelDataset, Sample};
use crate::error::{Error, Result};
use crate::learners::{local_train, LearnerSpec, Model, ModelWeights, ProximalConfig};
use crate::metrics::{binarize, score};
use crate::partition::PartitionPlan;
use crate::rng::{derive_seed, rng_for, tag};

/// Clients taking part in round `round`: `max(1, round(C·K))` of them,
/// uniformly without replacement, ascending.
pub fn sample_clients(k: usize, c_fraction: f64, round: usize, seed: u64) -> Vec<usize> {
    let m = ((c_fraction * k as f64).round() as usize).clamp(1, k.max(1));
    if m >= k {
        return (0..k).collect();
    }
    let mut rng = rng_for(seed, &[tag::SAMPLE_CLIENTS, round as u64]);
    let mut chosen = index::sample(&mut rng, k, m).into_vec();
    chosen.sort_unstable();
    chosen
}

/// Materializes each client's samples in ascending index order.
pub fn shards_from_plan(plan: &PartitionPlan, train: &MultilabelDataset) -> Result<Vec<Vec<Sample>>> {
    plan.assignment
        .iter()
        .map(|idx| Ok(train.subset(idx)?.samples().to_vec()))
        .collect()
}

fn local_seed(seed: u64, round: usize, client: usize) -> u64 {
    derive_seed(seed, &[tag::LOCAL_TRAIN, round as u64, client as u64])
}

/// Shared run state: compiled model, evaluation data and the outputs.
struct Session<'a> {
    cfg: &'a FederationConfig,
    model: Model,
    eval_images: Vec<&'a Image>,
    eval_labels: Vec<LabelVector>,
    global: ModelWeights,
    ledger: CommLedger,
    history: Vec<RoundRecord>,
    trajectory: Vec<ModelWeights>,
}

impl<'a> Session<'a> {
    fn new(cfg: &'a FederationConfig, spec: &LearnerSpec, eval: &'a MultilabelDataset) -> Result<Self> {
        cfg.validate()?;
        if eval.is_empty() {
            return Err(Error::invalid("evaluation set is empty"));
        }
        let model = Model::new(spec)?;
        let global = model.init(cfg.seed);
        let ledger = CommLedger::new(global.serialized_len() as u64);
        Ok(Self {
            cfg,
            eval_images: eval.samples().iter().map(|s| &s.image).collect(),
            eval_labels: eval.samples().iter().map(|s| s.labels.clone()).collect(),
            model,
            global,
            ledger,
            history: Vec::with_capacity(cfg.rounds),
            trajectory: Vec::new(),
        })
    }

    fn train(&self, w: &ModelWeights, shard: &[Sample], epochs: usize, prox: Option<&ProximalConfig>, seed: u64) -> Result<ModelWeights> {
        let (out, _) = local_train(
            &self.model,
            w,
            shard,
            epochs,
            self.cfg.batch_size,
            &self.cfg.optimizer,
            prox,
            seed,
        )?;
        Ok(out)
    }

    fn finish_round(&mut self, round: usize, transfers: u64, started: Instant) -> Result<()> {
        self.ledger.record_round(transfers);
        let probs = self.model.predict(&self.global, &self.eval_images)?;
        let preds = binarize(&probs, self.cfg.threshold);
        let s = score(&preds, &self.eval_labels)?;
        self.history.push(RoundRecord {
            round: round + 1,
            f1: s.f1,
            accuracy: s.accuracy,
            classification_accuracy: s.classification_accuracy,
            cumulative_bytes: self.ledger.bytes,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
        if self.cfg.keep_trajectory {
            self.trajectory.push(self.global.clone());
        }
        log::debug!(
            "{} round {round}: f1={:.4} bytes={}",
            self.cfg.algorithm,
            s.f1,
            self.ledger.bytes
        );
        Ok(())
    }

    fn into_result(self) -> RunResult {
        RunResult {
            final_weights: self.global,
            history: self.history,
            ledger: self.ledger,
            trajectory: self.trajectory,
        }
    }
}

fn check_shards(shards: &[Vec<Sample>]) -> Result<()> {
    if shards.is_empty() {
        return Err(Error::invalid("no client shards"));
    }
    match shards.iter().position(Vec::is_empty) {
        Some(k) => Err(Error::EmptyShard(k)),
        None => Ok(()),
    }
}

/// T epochs of plain SGD over the whole training set; no communication.
pub fn run_centralized(
    cfg: &FederationConfig,
    train: &MultilabelDataset,
    spec: &LearnerSpec,
    eval: &MultilabelDataset,
) -> Result<RunResult> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut s = Session::new(cfg, spec, eval)?;
    for t in 0..cfg.rounds {
        let started = Instant::now();
        s.global = s.train(&s.global, train.samples(), 1, None, local_seed(cfg.seed, t, 0))?;
        s.finish_round(t, 0, started)?;
    }
    Ok(s.into_result())
}

/// FedAvg, or FedProx when `cfg.algorithm` is [`Algorithm::FedProx`].
pub fn run_fedavg(
    cfg: &FederationConfig,
    shards: &[Vec<Sample>],
    spec: &LearnerSpec,
    eval: &MultilabelDataset,
) -> Result<RunResult> {
    if !matches!(cfg.algorithm, Algorithm::FedAvg | Algorithm::FedProx) {
        return Err(Error::invalid(format!("run_fedavg called for {}", cfg.algorithm)));
    }
    check_shards(shards)?;
    let k = shards.len();
    let mut s = Session::new(cfg, spec, eval)?;
    for t in 0..cfg.rounds {
        let started = Instant::now();
        let selected = sample_clients(k, cfg.c_fraction, t, cfg.seed);
        let prox = (cfg.algorithm == Algorithm::FedProx).then(|| ProximalConfig {
            mu: cfg.mu,
            anchor: s.global.clone(),
        });
        // clients train independently; results come back in `selected` order
        let updates = selected
            .par_iter()
            .map(|&c| s.train(&s.global, &shards[c], cfg.local_epochs, prox.as_ref(), local_seed(cfg.seed, t, c)))
            .collect::<Result<Vec<_>>>()?;
        let weighted: Vec<(usize, &ModelWeights)> = selected
            .iter()
            .zip(&updates)
            .map(|(&c, w)| (shards[c].len(), w))
            .collect();
        s.global = fedavg_aggregate(&weighted)?;
        s.finish_round(t, 2 * selected.len() as u64, started)?;
    }
    Ok(s.into_result())
}

fn run_chain(
    cfg: &FederationConfig,
    shards: &[Vec<Sample>],
    spec: &LearnerSpec,
    eval: &MultilabelDataset,
    per_batch: bool,
) -> Result<RunResult> {
    check_shards(shards)?;
    let k = shards.len();
    let mut s = Session::new(cfg, spec, eval)?;
    // one model hop per batch, or one per client, plus the hop back to the host
    let hops: u64 = if per_batch {
        shards.iter().map(|sh| sh.len().div_ceil(cfg.batch_size) as u64).sum::<u64>() + 1
    } else {
        k as u64 + 1
    };
    for t in 0..cfg.rounds {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..k).collect();
        order.shuffle(&mut rng_for(cfg.seed, &[tag::VISIT_ORDER, t as u64]));
        let mut w = s.global.clone();
        for c in order {
            w = s.train(&w, &shards[c], 1, None, local_seed(cfg.seed, t, c))?;
        }
        s.global = w;
        s.finish_round(t, hops, started)?;
    }
    Ok(s.into_result())
}

/// The model visits every client once per round in a shuffled order, one
/// local epoch each.
pub fn run_bsp(
    cfg: &FederationConfig,
    shards: &[Vec<Sample>],
    spec: &LearnerSpec,
    eval: &MultilabelDataset,
) -> Result<RunResult> {
    if cfg.algorithm != Algorithm::Bsp {
        return Err(Error::invalid(format!("run_bsp called for {}", cfg.algorithm)));
    }
    run_chain(cfg, shards, spec, eval, false)
}

/// Same computation as [`run_bsp`], but the model moves after every batch.
pub fn run_bsp_max(
    cfg: &FederationConfig,
    shards: &[Vec<Sample>],
    spec: &LearnerSpec,
    eval: &MultilabelDataset,
) -> Result<RunResult> {
    if cfg.algorithm != Algorithm::BspMax {
        return Err(Error::invalid(format!("run_bsp_max called for {}", cfg.algorithm)));
    }
    run_chain(cfg, shards, spec, eval, true)
}

/// Dispatches on `cfg.algorithm`. `plan` is ignored for the centralized baseline.
pub fn run(
    cfg: &FederationConfig,
    train: &MultilabelDataset,
    plan: Option<&PartitionPlan>,
    spec: &LearnerSpec,
    eval: &MultilabelDataset,
) -> Result<RunResult> {
    if cfg.algorithm == Algorithm::Centralized {
        return run_centralized(cfg, train, spec, eval);
    }
    let plan = plan.ok_or_else(|| Error::invalid(format!("{} needs a partition plan", cfg.algorithm)))?;
    if plan.n_clients() != cfg.n_clients {
        return Err(Error::invalid(format!(
            "plan has {} clients, config asks for {}",
            plan.n_clients(),
            cfg.n_clients
        )));
    }
    let shards = shards_from_plan(plan, train)?;
    match cfg.algorithm {
        Algorithm::Bsp => run_bsp(cfg, &shards, spec, eval),
        Algorithm::BspMax => run_bsp_max(cfg, &shards, spec, eval),
        Algorithm::FedAvg | Algorithm::FedProx => run_fedavg(cfg, &shards, spec, eval),
        Algorithm::Centralized => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_sizes() {
        assert_eq!(sample_clients(8, 0.75, 0, 1).len(), 6);
        assert_eq!(sample_clients(8, 1.0, 3, 1), (0..8).collect::<Vec<_>>());
        assert_eq!(sample_clients(10, 0.05, 0, 1).len(), 1);
        assert_eq!(sample_clients(8, 0.5, 4, 9), sample_clients(8, 0.5, 4, 9));
        let s = sample_clients(50, 0.5, 2, 3);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(s.iter().all(|&c| c < 50));
    }

    #[test]
    fn algorithm_names_parse() {
        for a in [
            Algorithm::Centralized,
            Algorithm::Bsp,
            Algorithm::BspMax,
            Algorithm::FedAvg,
            Algorithm::FedProx,
        ] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("BSP-max".parse::<Algorithm>().unwrap(), Algorithm::BspMax);
        assert!("gossip".parse::<Algorithm>().is_err());
    }
}

//! Experiment registry rows, the end-to-end run pipeline and sweep execution.

mod config;
mod output;

pub use config::{parse_config, read_config, CONFIG_HEADER};
pub use output::{read_run_csv, write_run_csv, write_summary_csv, RUN_CSV_HEADER};

use std::fmt::Write as _;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::augment::augment_double;
use crate::data::{label_stats, train_val_split, MultilabelDataset};
use crate::error::{Error, Result};
use crate::federation::{self, Algorithm, FederationConfig, RoundRecord, DEFAULT_MU};
use crate::learners::{Architecture, LearnerSpec, OptimizerConfig};
use crate::metrics::DEFAULT_THRESHOLD;
use crate::partition::{make_partition, SkewConfig};

/// Hidden widths of the fully connected stand-in used for `AlexNet` rows.
pub const ALEXNET_STANDIN_HIDDEN: [usize; 2] = [128, 64];

/// One experiment: the registry columns plus `seed` and `mu`.
/// `None` marks a column given as `NA`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub model: String,
    pub algorithm: Algorithm,
    pub rounds: usize,
    pub clients: Option<usize>,
    pub batch_size: usize,
    pub c_fraction: Option<f64>,
    pub skewness: Option<f64>,
    pub client_epochs: Option<usize>,
    pub small_skew: Option<bool>,
    pub seed: u64,
    pub mu: f64,
}

impl ExperimentRow {
    pub fn new(model: &str, algorithm: Algorithm) -> Self {
        Self {
            model: model.to_string(),
            algorithm,
            rounds: 100,
            clients: None,
            batch_size: 4,
            c_fraction: None,
            skewness: None,
            client_epochs: None,
            small_skew: None,
            seed: 0,
            mu: DEFAULT_MU,
        }
    }

    /// Desk-scale architecture for the row's model name.
    pub fn architecture(&self) -> Result<Architecture> {
        if self.model.trim().eq_ignore_ascii_case("alexnet") {
            return Ok(Architecture::Mlp {
                hidden: ALEXNET_STANDIN_HIDDEN.to_vec(),
            });
        }
        self.model.parse()
    }

    /// Comma-joined fields in registry column order; the input to the run id.
    pub fn canonical(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "NA".to_string(), |x| x.to_string())
        }
        let small = self.small_skew.map(|b| if b { "TRUE" } else { "FALSE" });
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.model,
            self.algorithm,
            self.rounds,
            opt(&self.clients),
            self.batch_size,
            opt(&self.c_fraction),
            opt(&self.skewness),
            opt(&self.client_epochs),
            opt(&small),
            self.seed,
            self.mu
        )
    }

    pub fn run_id(&self, dataset_id: &str) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        h.update(b"\n");
        h.update(dataset_id.as_bytes());
        hex::encode(h.finalize())[..16].to_string()
    }

    /// Resolves the row into a federation config, noting ignored columns.
    pub fn federation_config(&self, settings: &RunSettings) -> Result<(FederationConfig, Vec<String>)> {
        let mut notes = Vec::new();
        let a = self.algorithm;
        let mut cfg = FederationConfig {
            algorithm: a,
            rounds: self.rounds,
            n_clients: 1,
            c_fraction: 1.0,
            local_epochs: 1,
            batch_size: self.batch_size,
            mu: 0.0,
            seed: self.seed,
            optimizer: settings.optimizer,
            threshold: settings.threshold,
            keep_trajectory: false,
        };
        let require = |name: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(Error::invalid(format!("{a} requires the {name} column")))
            }
        };
        match a {
            Algorithm::Centralized => {
                for (name, set) in [
                    ("clients", self.clients.is_some()),
                    ("c_fraction", self.c_fraction.is_some()),
                    ("skewness", self.skewness.is_some()),
                    ("client_epochs", self.client_epochs.is_some()),
                    ("small_skew", self.small_skew.is_some()),
                ] {
                    if set {
                        notes.push(format!("{name} ignored for Centralized"));
                    }
                }
            }
            Algorithm::Bsp | Algorithm::BspMax => {
                require("clients", self.clients.is_some())?;
                cfg.n_clients = self.clients.unwrap_or(1);
                if self.c_fraction.is_some() {
                    notes.push(format!("c_fraction ignored for {a}: every client is visited"));
                }
                if self.client_epochs.is_some() {
                    notes.push(format!("client_epochs ignored for {a}: one epoch per client"));
                }
            }
            Algorithm::FedAvg | Algorithm::FedProx => {
                require("clients", self.clients.is_some())?;
                require("c_fraction", self.c_fraction.is_some())?;
                require("client_epochs", self.client_epochs.is_some())?;
                cfg.n_clients = self.clients.unwrap_or(1);
                cfg.c_fraction = self.c_fraction.unwrap_or(1.0);
                cfg.local_epochs = self.client_epochs.unwrap_or(1);
                if a == Algorithm::FedProx {
                    cfg.mu = self.mu;
                }
            }
        }
        cfg.validate()?;
        Ok((cfg, notes))
    }

    fn skew_config(&self) -> SkewConfig {
        SkewConfig {
            n_clients: self.clients.unwrap_or(1),
            skew_pct: self.skewness.unwrap_or(0.0),
            small_skew: self.small_skew.unwrap_or(false),
            seed: self.seed,
        }
    }
}

/// Pipeline knobs that are not registry columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub val_fraction: f64,
    pub optimizer: OptimizerConfig,
    pub threshold: f64,
    /// Double the dataset with corrupted copies before splitting.
    pub augment: bool,
    /// When false, `wall_seconds` is written as zero so outputs are byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            val_fraction: 0.2,
            optimizer: OptimizerConfig::default(),
            threshold: DEFAULT_THRESHOLD,
            augment: true,
            record_wall_time: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub max_f1: f64,
    pub final_f1: f64,
    pub total_bytes: u64,
    pub total_wall_seconds: f64,
}

impl RunSummary {
    pub fn from_records(records: &[RoundRecord]) -> Self {
        Self {
            max_f1: records.iter().map(|r| r.f1).fold(0.0, f64::max),
            final_f1: records.last().map_or(0.0, |r| r.f1),
            total_bytes: records.last().map_or(0, |r| r.cumulative_bytes),
            total_wall_seconds: records.iter().map(|r| r.wall_seconds).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub run_id: String,
    pub row: ExperimentRow,
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
    pub model_bytes: u64,
    pub notes: Vec<String>,
}

pub fn run_experiment(row: &ExperimentRow, dataset: &MultilabelDataset) -> Result<RunOutput> {
    run_experiment_with(row, dataset, &RunSettings::default())
}

/// augment → split → partition → orchestrate, evaluating on the held-out split
/// after every round.
pub fn run_experiment_with(
    row: &ExperimentRow,
    dataset: &MultilabelDataset,
    settings: &RunSettings,
) -> Result<RunOutput> {
    let (cfg, notes) = row.federation_config(settings).map_err(|e| e.in_stage("config"))?;
    for n in &notes {
        log::info!("{}: {n}", row.canonical());
    }
    let arch = row.architecture().map_err(|e| e.in_stage("config"))?;
    let spec = LearnerSpec::new(arch, dataset.shape(), dataset.n_labels());

    let data = if settings.augment {
        augment_double(dataset, row.seed).map_err(|e| e.in_stage("augment"))?
    } else {
        dataset.clone()
    };
    let (train, val) =
        train_val_split(&data, settings.val_fraction, row.seed).map_err(|e| e.in_stage("split"))?;
    let plan = if cfg.algorithm.is_federated() {
        let stats = label_stats(&train).map_err(|e| e.in_stage("partition"))?;
        Some(make_partition(&train, &stats, &row.skew_config()).map_err(|e| e.in_stage("partition"))?)
    } else {
        None
    };
    let result =
        federation::run(&cfg, &train, plan.as_ref(), &spec, &val).map_err(|e| e.in_stage("train"))?;

    let mut records = result.history;
    if !settings.record_wall_time {
        for r in &mut records {
            r.wall_seconds = 0.0;
        }
    }
    Ok(RunOutput {
        run_id: row.run_id(&dataset.content_id()),
        row: row.clone(),
        summary: RunSummary::from_records(&records),
        records,
        model_bytes: result.ledger.model_bytes,
        notes,
    })
}

/// Runs every row, up to `parallelism` at a time. Results line up with `rows`;
/// a failing row does not stop the others.
pub fn run_sweep(
    rows: &[ExperimentRow],
    dataset: &MultilabelDataset,
    settings: &RunSettings,
    parallelism: usize,
) -> Result<Vec<Result<RunOutput>>> {
    if rows.is_empty() {
        return Err(Error::invalid("sweep has no rows"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        rows.par_iter()
            .map(|row| run_experiment_with(row, dataset, settings))
            .collect()
    }))
}

/// One-line description of a sweep failure, for logs and the summary file.
pub fn describe_error(e: &Error) -> String {
    let mut s = e.to_string();
    let mut src = std::error::Error::source(e);
    while let Some(inner) = src {
        let _ = write!(s, ": {inner}");
        src = inner.source();
    }
    s
}

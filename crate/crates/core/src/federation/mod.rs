//! Orchestration: the centralized baseline, BSP, BSP-max, FedAvg and FedProx,
//! with per-round evaluation and communication accounting.

mod aggregate;
mod runners;

pub use aggregate::fedavg_aggregate;
pub use runners::{run, run_bsp, run_bsp_max, run_centralized, run_fedavg, sample_clients, shards_from_plan};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{ModelWeights, OptimizerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Centralized,
    Bsp,
    BspMax,
    FedAvg,
    FedProx,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Centralized => "Centralized",
            Algorithm::Bsp => "BSP",
            Algorithm::BspMax => "BSPMax",
            Algorithm::FedAvg => "FedAvg",
            Algorithm::FedProx => "FedProx",
        }
    }

    pub fn is_federated(&self) -> bool {
        !matches!(self, Algorithm::Centralized)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "centralized" | "centralised" => Ok(Algorithm::Centralized),
            "bsp" => Ok(Algorithm::Bsp),
            "bspmax" => Ok(Algorithm::BspMax),
            "fedavg" => Ok(Algorithm::FedAvg),
            "fedprox" => Ok(Algorithm::FedProx),
            _ => Err(Error::invalid(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig {
    pub algorithm: Algorithm,
    pub rounds: usize,
    pub n_clients: usize,
    pub c_fraction: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
    /// Proximal weight, used by FedProx only.
    pub mu: f64,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    /// Probability cut for turning outputs into label sets.
    pub threshold: f64,
    /// Keep a copy of the global weights after every round.
    pub keep_trajectory: bool,
}

pub const DEFAULT_MU: f64 = 0.01;

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::FedAvg,
            rounds: 100,
            n_clients: 8,
            c_fraction: 1.0,
            local_epochs: 5,
            batch_size: 4,
            mu: DEFAULT_MU,
            seed: 0,
            optimizer: OptimizerConfig::default(),
            threshold: crate::metrics::DEFAULT_THRESHOLD,
            keep_trajectory: false,
        }
    }
}

impl FederationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::invalid("rounds must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.algorithm.is_federated() && self.n_clients == 0 {
            return Err(Error::invalid("at least one client is required"));
        }
        if matches!(self.algorithm, Algorithm::FedAvg | Algorithm::FedProx) {
            if !(self.c_fraction > 0.0 && self.c_fraction <= 1.0) {
                return Err(Error::invalid(format!("client fraction {} outside (0,1]", self.c_fraction)));
            }
            if self.local_epochs == 0 {
                return Err(Error::invalid("local epochs must be at least 1"));
            }
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("mu {} must be finite and non-negative", self.mu)));
        }
        Ok(())
    }
}

/// Counts model movements and the bytes they carry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommLedger {
    /// Serialized size of one model.
    pub model_bytes: u64,
    pub transfers: u64,
    pub bytes: u64,
    pub per_round: Vec<u64>,
    pub per_round_transfers: Vec<u64>,
}

impl CommLedger {
    pub fn new(model_bytes: u64) -> Self {
        Self {
            model_bytes,
            ..Self::default()
        }
    }

    pub fn record_round(&mut self, transfers: u64) {
        let bytes = transfers * self.model_bytes;
        self.transfers += transfers;
        self.bytes += bytes;
        self.per_round.push(bytes);
        self.per_round_transfers.push(transfers);
    }
}

/// One row of a learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub f1: f64,
    pub accuracy: f64,
    pub classification_accuracy: f64,
    pub cumulative_bytes: u64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_weights: ModelWeights,
    pub history: Vec<RoundRecord>,
    pub ledger: CommLedger,
    /// Global weights after each round, when requested.
    pub trajectory: Vec<ModelWeights>,
}

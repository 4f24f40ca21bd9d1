//! Deterministic federated learning simulator for multilabel image data.
//!
//! Simulated clients hold label-skewed shards of a dataset and train small
//! from-scratch networks; the host orchestrates them with BSP, BSP-max,
//! FedAvg or FedProx, scores every round with example-based multilabel
//! metrics and counts the bytes of every model transfer.

pub mod augment;
pub mod data;
pub mod error;
pub mod experiment;
pub mod federation;
pub mod learners;
pub mod metrics;
pub mod partition;
pub mod rng;

pub use error::{Error, Result};

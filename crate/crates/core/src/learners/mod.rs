//! From-scratch differentiable learners: a small model zoo, binary
//! cross-entropy loss with an optional proximal term, and mini-batch SGD with
//! momentum.

mod gemm;
mod layers;
mod model;
mod train;
mod weights;

pub use model::{forward, init_weights, loss_and_grad, Model};
pub use train::{local_train, OptimizerConfig, OptimizerState};
pub use weights::{ModelWeights, ParamBlock};

use std::fmt;
use std::str::FromStr;

use crate::data::ImageShape;
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Architecture {
    /// Logistic regression on raw pixels.
    Linear,
    /// Fully connected ReLU network with the given hidden widths.
    Mlp { hidden: Vec<usize> },
    /// conv(6,5×5) → pool → conv(16,5×5) → pool → fc(120) → fc(L).
    LeNetStyle,
    /// conv(8,3×3) → two identity-shortcut residual blocks → global average pool → fc(L).
    TinyResidual,
}

impl Architecture {
    pub fn name(&self) -> String {
        match self {
            Architecture::Linear => "Linear".into(),
            Architecture::Mlp { hidden } => {
                let widths: Vec<String> = hidden.iter().map(usize::to_string).collect();
                format!("MLP-{}", widths.join("-"))
            }
            Architecture::LeNetStyle => "LeNet".into(),
            Architecture::TinyResidual => "ResNet".into(),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Default hidden width for a bare `MLP` name.
pub const DEFAULT_MLP_HIDDEN: usize = 64;

impl FromStr for Architecture {
    type Err = Error;

    /// Accepts `Linear`, `MLP`, `MLP-64-32`, `LeNet`/`LeNetStyle` and
    /// `ResNet`/`TinyResidual` (case-insensitive).
    fn from_str(s: &str) -> Result<Self, Error> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "linear" => return Ok(Architecture::Linear),
            "mlp" => {
                return Ok(Architecture::Mlp {
                    hidden: vec![DEFAULT_MLP_HIDDEN],
                })
            }
            "lenet" | "lenetstyle" => return Ok(Architecture::LeNetStyle),
            "resnet" | "tinyresidual" => return Ok(Architecture::TinyResidual),
            _ => {}
        }
        if let Some(rest) = lower.strip_prefix("mlp-") {
            let hidden = rest
                .split('-')
                .map(|w| w.parse::<usize>().ok().filter(|&w| w > 0))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::invalid(format!("bad MLP widths in {s:?}")))?;
            return Ok(Architecture::Mlp { hidden });
        }
        Err(Error::invalid(format!("unknown architecture {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LearnerSpec {
    pub architecture: Architecture,
    pub input: ImageShape,
    pub n_outputs: usize,
}

impl LearnerSpec {
    pub fn new(architecture: Architecture, input: ImageShape, n_outputs: usize) -> Self {
        Self {
            architecture,
            input,
            n_outputs,
        }
    }
}

/// FedProx penalty `(mu/2)·‖w − anchor‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximalConfig {
    pub mu: f64,
    pub anchor: ModelWeights,
}

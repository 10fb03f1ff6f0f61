//! Regressors: a single-convolution GNN, the GNN + fingerprint hybrid, and
//! fingerprint baselines (ridge regression, random forest).

mod forest;
mod linear;
mod neural;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ad::AdError;
use crate::fp::FpError;
use crate::gnn::{GnnError, LayerKind};
use crate::graphrep::GraphError;

pub use forest::{rf_fit, rf_predict, MaxFeatures, RandomForest, RfConfig, Tree};
pub use linear::{linreg_fit, linreg_predict, LinearModel, DEFAULT_RIDGE};
pub use neural::{
    fingerprint_rows, forward, init_params, train, Forward, ModelConfig, Parameter, TrainedModel,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{what}: expected {expected} rows, got {got}")]
    RowMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("loss became non-finite at epoch {epoch}; try a smaller learning rate")]
    NonFinite { epoch: usize },
    #[error("normal equations are singular with lambda = {lambda}; use a positive ridge penalty")]
    Singular { lambda: f64 },
    #[error("model expects {expected} parameter tensors, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Gnn(#[from] GnnError),
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Fingerprint(#[from] FpError),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Model family as named on the command line and in reports:
/// `gcn`, `gat+fp`, `linreg`, `rf`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelSpec {
    Neural { layer: LayerKind, fingerprint: bool },
    LinReg,
    Forest,
}

impl ModelSpec {
    pub fn gnn(layer: LayerKind) -> Self {
        ModelSpec::Neural {
            layer,
            fingerprint: false,
        }
    }

    pub fn hybrid(layer: LayerKind) -> Self {
        ModelSpec::Neural {
            layer,
            fingerprint: true,
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ModelSpec::Neural { .. })
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Neural { layer, fingerprint } => {
                write!(f, "{layer}{}", if *fingerprint { "+fp" } else { "" })
            }
            ModelSpec::LinReg => f.write_str("linreg"),
            ModelSpec::Forest => f.write_str("rf"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown model '{0}' (expected gcn, gat, gin, sage, <layer>+fp, linreg or rf)")]
pub struct ParseModelSpecError(String);

impl FromStr for ModelSpec {
    type Err = ParseModelSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "linreg" | "lr" => return Ok(ModelSpec::LinReg),
            "rf" => return Ok(ModelSpec::Forest),
            _ => {}
        }
        let (base, fingerprint) = match lower.strip_suffix("+fp") {
            Some(base) => (base, true),
            None => (lower.as_str(), false),
        };
        let layer = base
            .parse()
            .map_err(|_| ParseModelSpecError(s.to_string()))?;
        Ok(ModelSpec::Neural { layer, fingerprint })
    }
}

impl Serialize for ModelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Any trained model, as written to a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SavedModel {
    Neural(TrainedModel),
    Linear(LinearModel),
    Forest(RandomForest),
}

impl SavedModel {
    pub fn to_json(&self) -> Result<String, ModelError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

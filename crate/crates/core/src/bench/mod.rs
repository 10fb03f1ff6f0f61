//! Benchmark harness: dataset loading, seeded splits, grid search, bootstrap
//! evaluation, improvement tables and CKA reports.

mod config;
mod data;
mod format;
mod grid;
mod metrics;
mod run;
mod split;

use std::path::PathBuf;

use thiserror::Error;

use crate::cka::CkaError;
use crate::models::ModelError;

pub use config::{BenchConfig, DatasetConfig};
pub use data::{load_csv, Dataset, LoadedDataset, Record, Rejection};
pub use format::{fmt_g6, write_matrix_csv};
pub use grid::{grid_search, GridResult, GridSpec};
pub use metrics::{bootstrap_ci, improvement, percentile, rmse, Improvement, DEFAULT_N_BOOT};
pub use run::{run_benchmark, BenchSummary, ModelRun};
pub use split::{sample_and_split, SplitPlan, DEFAULT_DOWNSAMPLE, TRAIN_FRACTION};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: column '{column}' not found; available columns: {available}")]
    MissingColumn {
        path: PathBuf,
        column: String,
        available: String,
    },
    #[error("{path}: no valid rows ({rejected} rejected)")]
    NoValidRows { path: PathBuf, rejected: usize },
    #[error("need at least {min} records, got {n}")]
    TooFewRecords { n: usize, min: usize },
    #[error("length mismatch: {expected} targets vs {got} predictions")]
    LengthMismatch { expected: usize, got: usize },
    #[error("cannot evaluate an empty prediction set")]
    Empty,
    #[error("reference RMSE must be positive and finite, got {0}")]
    NonPositiveRmse(f64),
    #[error("every grid point failed to train")]
    AllDiverged,
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cka(#[from] CkaError),
}

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{BenchError, GridSpec, DEFAULT_DOWNSAMPLE, DEFAULT_N_BOOT};
use crate::cka::SigmaConvention;
use crate::fp::DEFAULT_BITS;
use crate::gnn::LayerKind;
use crate::models::{ModelSpec, RfConfig, DEFAULT_RIDGE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Report label; defaults to the file stem.
    pub name: Option<String>,
    /// Relative paths are resolved against the config file's directory.
    pub path: PathBuf,
    pub smiles_column: String,
    pub target_column: String,
    #[serde(default)]
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub seeds: Vec<u64>,
    pub models: Vec<ModelSpec>,
    pub downsample_n: usize,
    pub n_boot: usize,
    pub epochs: usize,
    pub fp_bits: usize,
    pub sigma_convention: SigmaConvention,
    pub normalize_features: bool,
    pub sage_l2_norm: bool,
    pub standardize_targets: bool,
    pub ridge_lambda: f64,
    pub write_embeddings: bool,
    pub grid: GridSpec,
    pub rf: RfConfig,
    pub datasets: Vec<DatasetConfig>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let mut models = vec![ModelSpec::LinReg, ModelSpec::Forest];
        models.extend(LayerKind::ALL.map(ModelSpec::gnn));
        models.extend(LayerKind::ALL.map(ModelSpec::hybrid));
        BenchConfig {
            seeds: vec![0],
            models,
            downsample_n: DEFAULT_DOWNSAMPLE,
            n_boot: DEFAULT_N_BOOT,
            epochs: 100,
            fp_bits: DEFAULT_BITS,
            sigma_convention: SigmaConvention::MedianSq,
            normalize_features: true,
            sage_l2_norm: false,
            standardize_targets: true,
            ridge_lambda: DEFAULT_RIDGE,
            write_embeddings: false,
            grid: GridSpec::default(),
            rf: RfConfig::default(),
            datasets: Vec::new(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let cfg: BenchConfig =
            toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves relative dataset paths against its
    /// directory.
    pub fn from_path(path: &Path) -> Result<Self, BenchError> {
        let text = fs::read_to_string(path).map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.datasets.is_empty() {
            return bad("no datasets listed");
        }
        if self.models.is_empty() {
            return bad("no models listed");
        }
        if self.seeds.is_empty() {
            return bad("no seeds listed");
        }
        if self.n_boot == 0 {
            return bad("n_boot must be at least 1");
        }
        if self.epochs == 0 || self.fp_bits == 0 || self.downsample_n < 10 {
            return bad("epochs and fp_bits must be positive and downsample_n at least 10");
        }
        if self.grid.points().is_empty() {
            return bad("hyperparameter grid is empty");
        }
        let mut names: Vec<String> = self.datasets.iter().map(|d| self.dataset_name(d)).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("dataset names must be unique");
        }
        Ok(())
    }

    pub fn dataset_name(&self, d: &DatasetConfig) -> String {
        d.name.clone().unwrap_or_else(|| {
            d.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }
}

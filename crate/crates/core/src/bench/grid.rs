use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{rmse, BenchError};
use crate::ad::seeded_rng;
use crate::chem::Molecule;
use crate::exec::Execution;
use crate::models::{train, ModelConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub hidden_dim: Vec<usize>,
    pub lr: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            hidden_dim: vec![32, 64, 128],
            lr: vec![1e-3, 3e-3, 1e-2],
        }
    }
}

impl GridSpec {
    /// (hidden_dim, lr) pairs, hidden_dim varying slowest.
    pub fn points(&self) -> Vec<(usize, f64)> {
        self.hidden_dim
            .iter()
            .flat_map(|&h| self.lr.iter().map(move |&lr| (h, lr)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: ModelConfig,
    /// Validation RMSE per grid point; `None` when training failed.
    pub scores: Vec<((usize, f64), Option<f64>)>,
}

/// Trains every grid point on a seeded 80/20 re-split of the training
/// molecules and keeps the lowest validation RMSE (first on ties).
pub fn grid_search(
    base: &ModelConfig,
    mols: &[Molecule],
    targets: &[f64],
    grid: &GridSpec,
    seed: u64,
    exec: Execution,
) -> Result<GridResult, BenchError> {
    let points = grid.points();
    if points.is_empty() {
        return Err(BenchError::Config("hyperparameter grid is empty".into()));
    }
    if mols.len() != targets.len() {
        return Err(BenchError::LengthMismatch {
            expected: mols.len(),
            got: targets.len(),
        });
    }
    let n = mols.len();
    if n < 2 {
        return Err(BenchError::TooFewRecords { n, min: 2 });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));
    let n_fit = ((0.8 * n as f64).round() as usize).clamp(1, n - 1);
    let (fit_idx, val_idx) = order.split_at(n_fit);
    let pick = |idx: &[usize]| -> (Vec<Molecule>, Vec<f64>) {
        (
            idx.iter().map(|&i| mols[i].clone()).collect(),
            idx.iter().map(|&i| targets[i]).collect(),
        )
    };
    let (fit_m, fit_y) = pick(fit_idx);
    let (val_m, val_y) = pick(val_idx);

    let scores = exec.map(&points, |&(hidden_dim, lr)| {
        let cfg = ModelConfig {
            hidden_dim,
            lr,
            ..base.clone()
        };
        let model = train(&cfg, &fit_m, &fit_y).ok()?;
        let pred = model.predict(&val_m).ok()?;
        rmse(&val_y, &pred).ok().filter(|r| r.is_finite())
    });
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
    }
    let (i, _) = best.ok_or(BenchError::AllDiverged)?;
    let (hidden_dim, lr) = points[i];
    Ok(GridResult {
        best: ModelConfig {
            hidden_dim,
            lr,
            ..base.clone()
        },
        scores: points.into_iter().zip(scores).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::standardize;
    use crate::gnn::LayerKind;

    fn data() -> (Vec<Molecule>, Vec<f64>) {
        let smiles = [
            "CCO",
            "CCCO",
            "CCCCO",
            "c1ccccc1",
            "Cc1ccccc1",
            "CC(=O)O",
            "CCN",
            "CCCl",
            "OCCO",
            "CC#N",
        ];
        let mols = smiles.iter().map(|s| standardize(s).unwrap()).collect();
        let y = (0..10).map(|i| i as f64 * 0.3 - 1.0).collect();
        (mols, y)
    }

    fn base() -> ModelConfig {
        let mut c = ModelConfig::new(LayerKind::Gcn, false);
        c.epochs = 5;
        c
    }

    #[test]
    fn default_grid_order() {
        let p = GridSpec::default().points();
        assert_eq!(p.len(), 9);
        assert_eq!(p[0], (32, 1e-3));
        assert_eq!(p[1], (32, 3e-3));
        assert_eq!(p[8], (128, 1e-2));
    }

    #[test]
    fn single_point_and_duplicates() {
        let (m, y) = data();
        let one = GridSpec {
            hidden_dim: vec![7],
            lr: vec![0.02],
        };
        let r = grid_search(&base(), &m, &y, &one, 1, Execution::Sequential).unwrap();
        assert_eq!((r.best.hidden_dim, r.best.lr), (7, 0.02));

        let dup = GridSpec {
            hidden_dim: vec![8, 8],
            lr: vec![0.01],
        };
        let r = grid_search(&base(), &m, &y, &dup, 1, Execution::Parallel).unwrap();
        assert_eq!(r.scores[0].1, r.scores[1].1);
        assert_eq!(r.best.hidden_dim, 8);
    }

    #[test]
    fn divergent_points_are_skipped() {
        let (m, y) = data();
        let mut b = base();
        b.standardize_targets = false;
        let grid = GridSpec {
            hidden_dim: vec![8],
            lr: vec![1e200, 1e-2],
        };
        let r = grid_search(&b, &m, &y, &grid, 2, Execution::Sequential).unwrap();
        assert_eq!(r.scores[0].1, None);
        assert_eq!(r.best.lr, 1e-2);

        let bad = GridSpec {
            hidden_dim: vec![8],
            lr: vec![1e200],
        };
        assert!(matches!(
            grid_search(&b, &m, &y, &bad, 2, Execution::Sequential),
            Err(BenchError::AllDiverged)
        ));
        let empty = GridSpec {
            hidden_dim: vec![],
            lr: vec![1e-3],
        };
        assert!(grid_search(&b, &m, &y, &empty, 2, Execution::Sequential).is_err());
    }
}

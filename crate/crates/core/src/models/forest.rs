use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::ad::seeded_rng;
use crate::exec::Execution;

/// Number of candidate features drawn at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Sqrt,
    Third,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Third => d / 3,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfConfig {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// CART regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Builder<'a, R> {
    x: &'a Array2<f64>,
    y: &'a [f64],
    cfg: &'a RfConfig,
    k: usize,
    rng: R,
    nodes: Vec<Node>,
    scratch: Vec<(f64, f64)>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn grow(&mut self, samples: &mut [usize], depth: usize) -> usize {
        let n = samples.len();
        let sum: f64 = samples.iter().map(|&i| self.y[i]).sum();
        let mean = sum / n as f64;
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(mean));

        let pure = samples.iter().all(|&i| self.y[i] == self.y[samples[0]]);
        let depth_capped = self.cfg.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped || n < 2 * self.cfg.min_leaf {
            return at;
        }
        let Some(split) = self.best_split(samples, sum) else {
            return at;
        };

        let x = self.x;
        let mut lo = 0;
        for j in 0..n {
            if x[[samples[j], split.feature]] <= split.threshold {
                samples.swap(lo, j);
                lo += 1;
            }
        }
        let (left_s, right_s) = samples.split_at_mut(lo);
        let left = self.grow(left_s, depth + 1);
        let right = self.grow(right_s, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }

    /// Visits features in random order until `k` non-constant ones have
    /// been scored, keeping the first best variance reduction.
    fn best_split(&mut self, samples: &[usize], total: f64) -> Option<Split> {
        let n = samples.len();
        let min_leaf = self.cfg.min_leaf.max(1);
        let parent = total * total / n as f64;
        let mut order: Vec<usize> = (0..self.x.ncols()).collect();
        order.shuffle(&mut self.rng);
        let mut best: Option<Split> = None;
        let mut scored = 0;
        for f in order {
            if scored == self.k {
                break;
            }
            self.scratch.clear();
            self.scratch
                .extend(samples.iter().map(|&i| (self.x[[i, f]], self.y[i])));
            let first = self.scratch[0].0;
            if self.scratch.iter().all(|&(v, _)| v == first) {
                continue;
            }
            scored += 1;
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_sum = 0.0;
            for cut in 1..n {
                left_sum += self.scratch[cut - 1].1;
                let (lv, rv) = (self.scratch[cut - 1].0, self.scratch[cut].0);
                if cut < min_leaf || n - cut < min_leaf || lv == rv {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / cut as f64
                    + right_sum * right_sum / (n - cut) as f64
                    - parent;
                if gain
                    > best
                        .as_ref()
                        .map_or(1e-12 * parent.abs().max(1.0), |b| b.gain)
                {
                    best = Some(Split {
                        feature: f,
                        threshold: 0.5 * (lv + rv),
                        gain,
                    });
                }
            }
        }
        best
    }
}

fn fit_tree(x: &Array2<f64>, y: &[f64], cfg: &RfConfig, seed: u64) -> Tree {
    let n = y.len();
    let mut rng = seeded_rng(seed);
    let mut samples: Vec<usize> = if cfg.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mut b = Builder {
        x,
        y,
        cfg,
        k: cfg.max_features.resolve(x.ncols()),
        rng,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(n),
    };
    b.grow(&mut samples, 0);
    Tree { nodes: b.nodes }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub config: RfConfig,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

/// Tree `i` uses seed `config.seed + i`, so results do not depend on how
/// trees are scheduled.
pub fn rf_fit(
    x: &Array2<f64>,
    y: &[f64],
    config: &RfConfig,
    exec: Execution,
) -> Result<RandomForest, ModelError> {
    if y.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if x.nrows() != y.len() {
        return Err(ModelError::RowMismatch {
            what: "targets",
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if config.n_trees == 0 || config.min_leaf == 0 {
        return Err(ModelError::InvalidConfig(
            "n_trees and min_leaf must be at least 1".into(),
        ));
    }
    let trees = exec.map_range(config.n_trees, |i| {
        fit_tree(x, y, config, config.seed.wrapping_add(i as u64))
    });
    Ok(RandomForest {
        config: config.clone(),
        n_features: x.ncols(),
        trees,
    })
}

impl RandomForest {
    /// Per-tree predictions, one vector per tree.
    pub fn tree_predictions(&self, x: &Array2<f64>) -> Result<Vec<Vec<f64>>, ModelError> {
        self.check(x)?;
        Ok(self
            .trees
            .iter()
            .map(|t| {
                x.rows()
                    .into_iter()
                    .map(|r| t.predict_row(&r.to_vec()))
                    .collect()
            })
            .collect())
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>, ModelError> {
        self.check(x)?;
        let mut out = vec![0.0; x.nrows()];
        for (i, row) in x.rows().into_iter().enumerate() {
            let row = row.to_vec();
            let sum: f64 = self.trees.iter().map(|t| t.predict_row(&row)).sum();
            out[i] = sum / self.trees.len() as f64;
        }
        Ok(out)
    }

    fn check(&self, x: &Array2<f64>) -> Result<(), ModelError> {
        if x.ncols() != self.n_features {
            return Err(ModelError::InvalidConfig(format!(
                "expected {} feature columns, got {}",
                self.n_features,
                x.ncols()
            )));
        }
        Ok(())
    }
}

pub fn rf_predict(model: &RandomForest, x: &Array2<f64>) -> Result<Vec<f64>, ModelError> {
    model.predict(x)
}

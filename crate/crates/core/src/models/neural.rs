use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::ad::{glorot_uniform, seeded_rng, Adam, AdamConfig, Tape, Var};
use crate::chem::Molecule;
use crate::fp::{dense_matrix, ecfp4_bits, DEFAULT_BITS};
use crate::gnn::{conv_forward, global_mean_pool, BatchedGraphs, LayerKind};
use crate::graphrep::{featurize, FeatureStats, MolGraph, NODE_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layer_kind: LayerKind,
    pub hidden_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub use_fingerprint: bool,
    pub fp_bits: usize,
    /// Z-score node features with training-set statistics.
    pub normalize_features: bool,
    pub sage_l2_norm: bool,
    /// Fit on z-scored targets and map predictions back.
    pub standardize_targets: bool,
}

impl ModelConfig {
    pub fn new(layer_kind: LayerKind, use_fingerprint: bool) -> Self {
        ModelConfig {
            layer_kind,
            hidden_dim: 64,
            lr: 3e-3,
            epochs: 100,
            seed: 0,
            use_fingerprint,
            fp_bits: DEFAULT_BITS,
            normalize_features: true,
            sage_l2_norm: false,
            standardize_targets: true,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.use_fingerprint && self.fp_bits == 0 {
            return bad("fp_bits must be at least 1");
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad("lr must be finite and non-negative");
        }
        Ok(())
    }

    /// Names and shapes of every parameter, in forward order.
    pub fn param_shapes(&self) -> Vec<(String, (usize, usize))> {
        let h = self.hidden_dim;
        let mut shapes: Vec<(String, (usize, usize))> = self
            .layer_kind
            .param_shapes(NODE_FEATURES, h)
            .into_iter()
            .map(|(n, s)| (n.to_string(), s))
            .collect();
        let head_in = if self.use_fingerprint {
            shapes.push(("fp.weight".into(), (self.fp_bits, h)));
            shapes.push(("fp.bias".into(), (1, h)));
            2 * h
        } else {
            h
        };
        shapes.push(("head1.weight".into(), (head_in, h)));
        shapes.push(("head1.bias".into(), (1, h)));
        shapes.push(("head2.weight".into(), (h, 1)));
        shapes.push(("head2.bias".into(), (1, 1)));
        shapes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: Array2<f64>,
}

/// Glorot-uniform weights and zero biases, drawn in forward order from a
/// generator seeded with `config.seed`.
pub fn init_params(config: &ModelConfig) -> Vec<Parameter> {
    let mut rng = seeded_rng(config.seed);
    config
        .param_shapes()
        .into_iter()
        .map(|(name, (r, c))| {
            let value = if name.ends_with("bias") {
                Array2::zeros((r, c))
            } else {
                glorot_uniform(r, c, &mut rng)
            };
            Parameter { name, value }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct Forward {
    /// n_graphs x 1
    pub prediction: Var,
    /// Pooled graph embedding, or the concatenated graph/fingerprint
    /// embedding for hybrids.
    pub embedding: Var,
}

/// Records the model on `tape`. `params` must follow
/// [`ModelConfig::param_shapes`]; `fingerprints` is required exactly when
/// the config uses them.
pub fn forward(
    tape: &mut Tape,
    config: &ModelConfig,
    params: &[Var],
    batch: &BatchedGraphs,
    fingerprints: Option<Var>,
) -> Result<Forward, ModelError> {
    let n_conv = config.layer_kind.param_shapes(1, 1).len();
    let expected = config.param_shapes().len();
    if params.len() != expected {
        return Err(ModelError::ParamCount {
            expected,
            got: params.len(),
        });
    }
    let x = tape.constant(batch.features.clone());
    let h = conv_forward(
        tape,
        config.layer_kind,
        batch,
        x,
        &params[..n_conv],
        config.sage_l2_norm,
    )?;
    let h = tape.relu(h);
    let pooled = global_mean_pool(tape, batch, h)?;
    let mut rest = &params[n_conv..];

    let embedding = match (config.use_fingerprint, fingerprints) {
        (true, Some(fp)) => {
            let rows = tape.shape(fp).0;
            if rows != batch.n_graphs {
                return Err(ModelError::RowMismatch {
                    what: "fingerprints",
                    expected: batch.n_graphs,
                    got: rows,
                });
            }
            let z = tape.matmul(fp, rest[0])?;
            let z = tape.add_row_broadcast(z, rest[1])?;
            let z = tape.relu(z);
            rest = &rest[2..];
            tape.concat_cols(pooled, z)?
        }
        (false, None) => pooled,
        (true, None) => {
            return Err(ModelError::InvalidConfig(
                "hybrid model needs fingerprint input".into(),
            ))
        }
        (false, Some(_)) => {
            return Err(ModelError::InvalidConfig(
                "graph-only model was given fingerprint input".into(),
            ))
        }
    };

    let z = tape.matmul(embedding, rest[0])?;
    let z = tape.add_row_broadcast(z, rest[1])?;
    let z = tape.relu(z);
    let z = tape.matmul(z, rest[2])?;
    let prediction = tape.add_row_broadcast(z, rest[3])?;
    Ok(Forward {
        prediction,
        embedding,
    })
}

/// Folded radius-2 fingerprints as an n x `n_bits` 0/1 matrix.
pub fn fingerprint_rows(mols: &[Molecule], n_bits: usize) -> Result<Array2<f64>, ModelError> {
    let fps = mols
        .iter()
        .map(|m| ecfp4_bits(m, n_bits))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(dense_matrix(&fps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub parameters: Vec<Parameter>,
    pub feature_stats: FeatureStats,
    pub target_mean: f64,
    pub target_std: f64,
    /// Training MSE before each epoch's update, in target units.
    pub train_loss_curve: Vec<f64>,
}

struct Inputs {
    batch: BatchedGraphs,
    fingerprints: Option<Array2<f64>>,
}

fn prepare(
    config: &ModelConfig,
    graphs: &[MolGraph],
    mols: &[Molecule],
    stats: &FeatureStats,
) -> Result<Inputs, ModelError> {
    let normalized: Vec<MolGraph> = graphs.iter().map(|g| stats.apply(g)).collect();
    let batch = BatchedGraphs::new(&normalized)?;
    let fingerprints = if config.use_fingerprint {
        Some(fingerprint_rows(mols, config.fp_bits)?)
    } else {
        None
    };
    Ok(Inputs {
        batch,
        fingerprints,
    })
}

fn record(
    tape: &mut Tape,
    config: &ModelConfig,
    params: &[Array2<f64>],
    inputs: &Inputs,
    trainable: bool,
) -> Result<(Vec<Var>, Forward), ModelError> {
    let vars: Vec<Var> = params
        .iter()
        .map(|p| tape.leaf(p.clone(), trainable))
        .collect();
    let fp = inputs
        .fingerprints
        .as_ref()
        .map(|f| tape.constant(f.clone()));
    let out = forward(tape, config, &vars, &inputs.batch, fp)?;
    Ok((vars, out))
}

/// Full-batch Adam on mean squared error.
pub fn train(
    config: &ModelConfig,
    mols: &[Molecule],
    targets: &[f64],
) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    if mols.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if targets.len() != mols.len() {
        return Err(ModelError::RowMismatch {
            what: "targets",
            expected: mols.len(),
            got: targets.len(),
        });
    }
    let graphs = mols.iter().map(featurize).collect::<Result<Vec<_>, _>>()?;
    let stats = if config.normalize_features {
        FeatureStats::fit(&graphs)
    } else {
        FeatureStats::identity()
    };
    let inputs = prepare(config, &graphs, mols, &stats)?;

    let (target_mean, target_std) = if config.standardize_targets {
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        (mean, if std > 1e-12 { std } else { 1.0 })
    } else {
        (0.0, 1.0)
    };
    let y = Array2::from_shape_fn((targets.len(), 1), |(i, _)| {
        (targets[i] - target_mean) / target_std
    });

    let init = init_params(config);
    let names: Vec<String> = init.iter().map(|p| p.name.clone()).collect();
    let mut params: Vec<Array2<f64>> = init.into_iter().map(|p| p.value).collect();
    let mut adam = Adam::new(AdamConfig::with_lr(config.lr), &params);
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let mut tape = Tape::new();
        let (vars, out) = record(&mut tape, config, &params, &inputs, true)?;
        let target = tape.constant(y.clone());
        let loss = tape.mse(out.prediction, target)?;
        let value = tape.value(loss)[[0, 0]];
        if !value.is_finite() {
            return Err(ModelError::NonFinite { epoch });
        }
        curve.push(value * target_std * target_std);
        tape.backward(loss)?;
        let grads: Vec<Array2<f64>> = vars.iter().map(|&v| tape.grad(v)).collect();
        adam.step(params.iter_mut(), &grads);
    }
    if params.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
        return Err(ModelError::NonFinite {
            epoch: config.epochs,
        });
    }

    Ok(TrainedModel {
        config: config.clone(),
        parameters: names
            .into_iter()
            .zip(params)
            .map(|(name, value)| Parameter { name, value })
            .collect(),
        feature_stats: stats,
        target_mean,
        target_std,
        train_loss_curve: curve,
    })
}

impl TrainedModel {
    /// Predictions in target units plus the embedding rows.
    pub fn predict_with_embeddings(
        &self,
        mols: &[Molecule],
    ) -> Result<(Vec<f64>, Array2<f64>), ModelError> {
        let graphs = mols.iter().map(featurize).collect::<Result<Vec<_>, _>>()?;
        let inputs = prepare(&self.config, &graphs, mols, &self.feature_stats)?;
        let params: Vec<Array2<f64>> = self.parameters.iter().map(|p| p.value.clone()).collect();
        let mut tape = Tape::new();
        let (_, out) = record(&mut tape, &self.config, &params, &inputs, false)?;
        let preds = tape
            .value(out.prediction)
            .iter()
            .map(|p| p * self.target_std + self.target_mean)
            .collect();
        Ok((preds, tape.value(out.embedding).clone()))
    }

    pub fn predict(&self, mols: &[Molecule]) -> Result<Vec<f64>, ModelError> {
        Ok(self.predict_with_embeddings(mols)?.0)
    }

    pub fn embed(&self, mols: &[Molecule]) -> Result<Array2<f64>, ModelError> {
        Ok(self.predict_with_embeddings(mols)?.1)
    }

    pub fn parameter(&self, name: &str) -> Option<&Array2<f64>> {
        self.parameters
            .iter()
            .find(|p| p.name == name)
            .map(|p| &p.value)
    }
}

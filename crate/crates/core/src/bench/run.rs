use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::format::{fmt_g6, write_matrix_csv};
use super::{
    bootstrap_ci, grid_search, improvement, load_csv, rmse, sample_and_split, BenchConfig,
    BenchError, Dataset, Rejection, SplitPlan,
};
use crate::cka::{cka, cka_matrix};
use crate::exec::Execution;
use crate::gnn::LayerKind;
use crate::models::{
    fingerprint_rows, linreg_fit, rf_fit, train, ModelConfig, ModelError, ModelSpec, RfConfig,
};

/// Outcome of one (dataset, seed, model) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelRun {
    pub dataset: String,
    pub seed: u64,
    pub model: ModelSpec,
    pub n_train: usize,
    pub n_test: usize,
    pub outcome: Result<RunMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub rmse: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Selected hyperparameters, neural models only.
    pub hidden_dim: Option<usize>,
    pub lr: Option<f64>,
    pub y_true: Vec<f64>,
    pub y_pred: Vec<f64>,
    /// Test-set embedding, neural models only.
    pub embedding: Option<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CkaRun {
    pub dataset: String,
    pub seed: u64,
    pub left: String,
    pub right: String,
    pub value: Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub runs: Vec<ModelRun>,
    pub cka_runs: Vec<CkaRun>,
    pub rejections: BTreeMap<String, Vec<Rejection>>,
}

impl BenchSummary {
    pub fn rmse(&self, dataset: &str, seed: u64, model: ModelSpec) -> Option<f64> {
        self.runs
            .iter()
            .find(|r| r.dataset == dataset && r.seed == seed && r.model == model)
            .and_then(|r| r.outcome.as_ref().ok())
            .map(|m| m.rmse)
    }

    pub fn cka(&self, dataset: &str, seed: u64, left: &str, right: &str) -> Option<f64> {
        self.cka_runs
            .iter()
            .find(|c| c.dataset == dataset && c.seed == seed && c.left == left && c.right == right)
            .and_then(|c| c.value.as_ref().ok().copied())
    }
}

struct Cell<'a> {
    dataset: &'a Dataset,
    split: &'a SplitPlan,
    seed: u64,
    model: ModelSpec,
}

fn neural_config(cfg: &BenchConfig, layer: LayerKind, fingerprint: bool, seed: u64) -> ModelConfig {
    ModelConfig {
        epochs: cfg.epochs,
        seed,
        fp_bits: cfg.fp_bits,
        normalize_features: cfg.normalize_features,
        sage_l2_norm: cfg.sage_l2_norm,
        standardize_targets: cfg.standardize_targets,
        ..ModelConfig::new(layer, fingerprint)
    }
}

fn run_cell(cfg: &BenchConfig, cell: &Cell, exec: Execution) -> Result<RunMetrics, BenchError> {
    let train_m = cell.dataset.molecules(&cell.split.train_indices);
    let train_y = cell.dataset.targets(&cell.split.train_indices);
    let test_m = cell.dataset.molecules(&cell.split.test_indices);
    let y_true = cell.dataset.targets(&cell.split.test_indices);

    let (y_pred, hidden_dim, lr, embedding) = match cell.model {
        ModelSpec::Neural { layer, fingerprint } => {
            let base = neural_config(cfg, layer, fingerprint, cell.seed);
            let best = grid_search(&base, &train_m, &train_y, &cfg.grid, cell.seed, exec)?.best;
            let model = train(&best, &train_m, &train_y)?;
            let (pred, emb) = model.predict_with_embeddings(&test_m)?;
            (pred, Some(best.hidden_dim), Some(best.lr), Some(emb))
        }
        ModelSpec::LinReg => {
            let x = fingerprint_rows(&train_m, cfg.fp_bits)?;
            let model = linreg_fit(&x, &train_y, cfg.ridge_lambda)?;
            (
                model.predict(&fingerprint_rows(&test_m, cfg.fp_bits)?)?,
                None,
                None,
                None,
            )
        }
        ModelSpec::Forest => {
            let x = fingerprint_rows(&train_m, cfg.fp_bits)?;
            let rf_cfg = RfConfig {
                seed: cell.seed,
                ..cfg.rf.clone()
            };
            let model = rf_fit(&x, &train_y, &rf_cfg, exec)?;
            (
                model.predict(&fingerprint_rows(&test_m, cfg.fp_bits)?)?,
                None,
                None,
                None,
            )
        }
    };
    if y_pred.iter().any(|p| !p.is_finite()) {
        return Err(ModelError::NonFinite { epoch: cfg.epochs }.into());
    }
    let point = rmse(&y_true, &y_pred)?;
    let (ci_low, ci_high) = bootstrap_ci(&y_true, &y_pred, cfg.n_boot, cell.seed, exec)?;
    Ok(RunMetrics {
        rmse: point,
        ci_low,
        ci_high,
        hidden_dim,
        lr,
        y_true,
        y_pred,
        embedding,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, BenchError> {
    csv::Writer::from_path(path).map_err(|source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_result<T>(path: &Path, r: Result<T, csv::Error>) -> Result<T, BenchError> {
    r.map_err(|source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_g6).unwrap_or_default()
}

fn category(model: ModelSpec) -> &'static str {
    match model {
        ModelSpec::LinReg | ModelSpec::Forest => "ML Models",
        ModelSpec::Neural {
            fingerprint: false, ..
        } => "GNN Models",
        ModelSpec::Neural {
            fingerprint: true, ..
        } => "Hybrid (GNN+FP)",
    }
}

fn file_label(model: ModelSpec) -> String {
    model.to_string().replace('+', "_")
}

/// Runs every (dataset, seed, model) cell and writes the report files into
/// `out_dir`. Individual model failures are recorded, not propagated.
pub fn run_benchmark(
    cfg: &BenchConfig,
    out_dir: &Path,
    exec: Execution,
) -> Result<BenchSummary, BenchError> {
    cfg.validate()?;
    let mut datasets = Vec::new();
    let mut rejections = BTreeMap::new();
    for d in &cfg.datasets {
        let mut loaded = load_csv(&d.path, &d.smiles_column, &d.target_column)?;
        loaded.dataset.name = cfg.dataset_name(d);
        loaded.dataset.target_units = d.units.clone();
        rejections.insert(loaded.dataset.name.clone(), loaded.rejections);
        datasets.push(loaded.dataset);
    }
    let mut splits = Vec::new();
    for (di, ds) in datasets.iter().enumerate() {
        for &seed in &cfg.seeds {
            splits.push((
                di,
                seed,
                sample_and_split(ds.len(), cfg.downsample_n, seed)?,
            ));
        }
    }
    let ds_ref = &datasets;
    let cells: Vec<Cell> = splits
        .iter()
        .flat_map(|(di, seed, split)| {
            cfg.models.iter().map(move |&model| Cell {
                dataset: &ds_ref[*di],
                split,
                seed: *seed,
                model,
            })
        })
        .collect();

    let outcomes = exec.map(&cells, |cell| {
        run_cell(cfg, cell, exec).map_err(|e| e.to_string())
    });
    let runs: Vec<ModelRun> = cells
        .iter()
        .zip(outcomes)
        .map(|(cell, outcome)| ModelRun {
            dataset: cell.dataset.name.clone(),
            seed: cell.seed,
            model: cell.model,
            n_train: cell.split.train_indices.len(),
            n_test: cell.split.test_indices.len(),
            outcome,
        })
        .collect();

    let cka_runs = cka_for_runs(cfg, &datasets, &splits, &runs, exec);
    let summary = BenchSummary {
        runs,
        cka_runs,
        rejections,
    };
    write_outputs(cfg, &datasets, &splits, &summary, out_dir)?;
    Ok(summary)
}

fn standalone(cfg: &BenchConfig) -> Vec<ModelSpec> {
    LayerKind::ALL
        .map(ModelSpec::gnn)
        .into_iter()
        .filter(|m| cfg.models.contains(m))
        .collect()
}

fn cka_for_runs(
    cfg: &BenchConfig,
    datasets: &[Dataset],
    splits: &[(usize, u64, SplitPlan)],
    runs: &[ModelRun],
    exec: Execution,
) -> Vec<CkaRun> {
    let gnns = standalone(cfg);
    let mut out = Vec::new();
    for (di, seed, split) in splits {
        let ds = &datasets[*di];
        let embedding = |m: ModelSpec| -> Result<&Array2<f64>, String> {
            let run = runs
                .iter()
                .find(|r| r.dataset == ds.name && r.seed == *seed && r.model == m)
                .expect("run exists for every configured model");
            match &run.outcome {
                Ok(metrics) => Ok(metrics.embedding.as_ref().expect("neural run")),
                Err(e) => Err(format!("{m} failed: {e}")),
            }
        };
        let fps = fingerprint_rows(&ds.molecules(&split.test_indices), cfg.fp_bits)
            .map_err(|e| e.to_string());
        for &m in &gnns {
            let value = match (embedding(m), &fps) {
                (Ok(e), Ok(f)) => cka(e, f, cfg.sigma_convention)
                    .map(|s| s.value)
                    .map_err(|e| e.to_string()),
                (Err(e), _) => Err(e),
                (_, Err(e)) => Err(e.clone()),
            };
            out.push(CkaRun {
                dataset: ds.name.clone(),
                seed: *seed,
                left: m.to_string(),
                right: "ecfp4".into(),
                value,
            });
        }
        for (i, &a) in gnns.iter().enumerate() {
            for &b in &gnns[i + 1..] {
                let value = match (embedding(a), embedding(b)) {
                    (Ok(x), Ok(y)) => {
                        cka_matrix(&[x.clone(), y.clone()], cfg.sigma_convention, exec)
                            .map(|m| m[[0, 1]])
                            .map_err(|e| e.to_string())
                    }
                    (Err(e), _) | (_, Err(e)) => Err(e),
                };
                out.push(CkaRun {
                    dataset: ds.name.clone(),
                    seed: *seed,
                    left: a.to_string(),
                    right: b.to_string(),
                    value,
                });
            }
        }
    }
    out
}

/// Mean over seeds, or `None` if any seed failed.
fn seed_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| mean(&v))
}

fn write_outputs(
    cfg: &BenchConfig,
    datasets: &[Dataset],
    splits: &[(usize, u64, SplitPlan)],
    s: &BenchSummary,
    out_dir: &Path,
) -> Result<(), BenchError> {
    fs::create_dir_all(out_dir.join("predictions")).map_err(io_err(out_dir))?;
    let names: Vec<&str> = datasets.iter().map(|d| d.name.as_str()).collect();
    let metric = |ds: &str, model: ModelSpec, f: fn(&RunMetrics) -> f64| {
        seed_mean(cfg.seeds.iter().map(|&seed| {
            s.runs
                .iter()
                .find(|r| r.dataset == ds && r.seed == seed && r.model == model)
                .and_then(|r| r.outcome.as_ref().ok())
                .map(f)
        }))
    };

    // Per-seed rows.
    let path = out_dir.join("runs.csv");
    let mut w = csv_writer(&path)?;
    csv_result(
        &path,
        w.write_record([
            "dataset",
            "seed",
            "model",
            "status",
            "rmse",
            "ci_low",
            "ci_high",
            "n_train",
            "n_test",
            "hidden_dim",
            "lr",
            "error",
        ]),
    )?;
    for r in &s.runs {
        let row = match &r.outcome {
            Ok(m) => [
                "ok".to_string(),
                fmt_g6(m.rmse),
                fmt_g6(m.ci_low),
                fmt_g6(m.ci_high),
                r.n_train.to_string(),
                r.n_test.to_string(),
                m.hidden_dim.map(|h| h.to_string()).unwrap_or_default(),
                opt(m.lr),
                String::new(),
            ],
            Err(e) => [
                "failed".to_string(),
                String::new(),
                String::new(),
                String::new(),
                r.n_train.to_string(),
                r.n_test.to_string(),
                String::new(),
                String::new(),
                e.clone(),
            ],
        };
        let mut rec = vec![r.dataset.clone(), r.seed.to_string(), r.model.to_string()];
        rec.extend(row);
        csv_result(&path, w.write_record(&rec))?;
    }
    csv_result(&path, w.flush().map_err(csv::Error::from))?;

    // Model x dataset table of seed-averaged RMSE and interval bounds.
    let mut models = cfg.models.clone();
    models.sort_by_key(|m| (category(*m), *m));
    let path = out_dir.join("report.csv");
    let mut w = csv_writer(&path)?;
    let mut header = vec!["category".to_string(), "model".to_string()];
    for n in &names {
        header.extend([
            format!("{n}_rmse"),
            format!("{n}_ci_low"),
            format!("{n}_ci_high"),
        ]);
    }
    csv_result(&path, w.write_record(&header))?;
    for &m in &models {
        let mut rec = vec![category(m).to_string(), m.to_string()];
        for n in &names {
            rec.push(opt(metric(n, m, |r| r.rmse)));
            rec.push(opt(metric(n, m, |r| r.ci_low)));
            rec.push(opt(metric(n, m, |r| r.ci_high)));
        }
        csv_result(&path, w.write_record(&rec))?;
    }
    csv_result(&path, w.flush().map_err(csv::Error::from))?;

    // Improvement of each hybrid over its graph-only counterpart.
    let pairs: Vec<LayerKind> = LayerKind::ALL
        .into_iter()
        .filter(|&k| {
            cfg.models.contains(&ModelSpec::gnn(k)) && cfg.models.contains(&ModelSpec::hybrid(k))
        })
        .collect();
    let path = out_dir.join("improvement.csv");
    let mut w = csv_writer(&path)?;
    let mut header = vec!["model".to_string()];
    for n in &names {
        header.extend([format!("{n}_delta_rmse"), format!("{n}_pct_improvement")]);
    }
    csv_result(&path, w.write_record(&header))?;
    let mut pct_by_ds: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    let mut delta_by_ds: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for &k in &pairs {
        let mut rec = vec![format!("{k} (+fp)")];
        for (j, n) in names.iter().enumerate() {
            let imp = match (
                metric(n, ModelSpec::gnn(k), |r| r.rmse),
                metric(n, ModelSpec::hybrid(k), |r| r.rmse),
            ) {
                (Some(g), Some(h)) => improvement(g, h).ok(),
                _ => None,
            };
            rec.push(opt(imp.map(|i| i.delta_rmse)));
            rec.push(opt(imp.map(|i| i.pct_improvement)));
            delta_by_ds[j].push(imp.map(|i| i.delta_rmse));
            pct_by_ds[j].push(imp.map(|i| i.pct_improvement));
        }
        csv_result(&path, w.write_record(&rec))?;
    }
    if pairs.len() > 1 {
        let mut rec = vec!["average".to_string()];
        for j in 0..names.len() {
            rec.push(opt(seed_mean(delta_by_ds[j].iter().copied())));
            rec.push(opt(seed_mean(pct_by_ds[j].iter().copied())));
        }
        csv_result(&path, w.write_record(&rec))?;
    }
    csv_result(&path, w.flush().map_err(csv::Error::from))?;

    // CKA tables.
    let cka_mean =
        |ds: &str, a: &str, b: &str| seed_mean(cfg.seeds.iter().map(|&seed| s.cka(ds, seed, a, b)));
    let gnns: Vec<String> = standalone(cfg).iter().map(|m| m.to_string()).collect();
    let path = out_dir.join("cka_gnn_fp.csv");
    let mut w = csv_writer(&path)?;
    let mut header = vec!["model".to_string()];
    header.extend(names.iter().map(|n| n.to_string()));
    csv_result(&path, w.write_record(&header))?;
    for g in &gnns {
        let mut rec = vec![g.clone()];
        rec.extend(names.iter().map(|n| opt(cka_mean(n, g, "ecfp4"))));
        csv_result(&path, w.write_record(&rec))?;
    }
    csv_result(&path, w.flush().map_err(csv::Error::from))?;

    for n in &names {
        let k = gnns.len();
        let matrix = Array2::from_shape_fn((k, k), |(i, j)| {
            if i == j {
                return 1.0;
            }
            let (a, b) = if i < j {
                (&gnns[i], &gnns[j])
            } else {
                (&gnns[j], &gnns[i])
            };
            cka_mean(n, a, b).unwrap_or(f64::NAN)
        });
        let path = out_dir.join(format!("cka_gnn_gnn_{n}.csv"));
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        csv_result(&path, write_matrix_csv(file, &gnns, &matrix))?;
    }

    let path = out_dir.join("cka_runs.csv");
    let mut w = csv_writer(&path)?;
    csv_result(
        &path,
        w.write_record(["dataset", "seed", "left", "right", "cka", "error"]),
    )?;
    for c in &s.cka_runs {
        let (v, e) = match &c.value {
            Ok(v) => (fmt_g6(*v), String::new()),
            Err(e) => (String::new(), e.clone()),
        };
        csv_result(
            &path,
            w.write_record([
                c.dataset.clone(),
                c.seed.to_string(),
                c.left.clone(),
                c.right.clone(),
                v,
                e,
            ]),
        )?;
    }
    csv_result(&path, w.flush().map_err(csv::Error::from))?;

    // Predictions and optional embeddings.
    for &m in &cfg.models {
        let path = out_dir
            .join("predictions")
            .join(format!("{}.csv", file_label(m)));
        let mut w = csv_writer(&path)?;
        csv_result(
            &path,
            w.write_record(["dataset", "seed", "row", "smiles", "y_true", "y_pred"]),
        )?;
        for r in s.runs.iter().filter(|r| r.model == m) {
            let Ok(metrics) = &r.outcome else { continue };
            let (di, _, split) = splits
                .iter()
                .find(|(di, seed, _)| datasets[*di].name == r.dataset && *seed == r.seed)
                .expect("split exists");
            for (k, &row) in split.test_indices.iter().enumerate() {
                csv_result(
                    &path,
                    w.write_record([
                        r.dataset.clone(),
                        r.seed.to_string(),
                        row.to_string(),
                        datasets[*di].records[row].smiles.clone(),
                        fmt_g6(metrics.y_true[k]),
                        fmt_g6(metrics.y_pred[k]),
                    ]),
                )?;
            }
        }
        csv_result(&path, w.flush().map_err(csv::Error::from))?;

        if cfg.write_embeddings && m.is_neural() {
            let dir = out_dir.join("embeddings");
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            for r in s.runs.iter().filter(|r| r.model == m) {
                let Some(emb) = r.outcome.as_ref().ok().and_then(|x| x.embedding.as_ref()) else {
                    continue;
                };
                let path = dir.join(format!(
                    "{}_{}_seed{}.csv",
                    r.dataset,
                    file_label(m),
                    r.seed
                ));
                let mut w = csv_writer(&path)?;
                let header: Vec<String> = (0..emb.ncols()).map(|j| format!("e{j}")).collect();
                csv_result(&path, w.write_record(&header))?;
                for row in emb.rows() {
                    csv_result(&path, w.write_record(row.iter().map(|&v| fmt_g6(v))))?;
                }
                csv_result(&path, w.flush().map_err(csv::Error::from))?;
            }
        }
    }

    for (name, rej) in &s.rejections {
        let path = out_dir.join(format!("rejections_{name}.csv"));
        let mut w = csv_writer(&path)?;
        csv_result(&path, w.write_record(["line", "smiles", "reason"]))?;
        for r in rej {
            csv_result(
                &path,
                w.write_record([r.line.to_string(), r.smiles.clone(), r.reason.clone()]),
            )?;
        }
        csv_result(&path, w.flush().map_err(csv::Error::from))?;
    }

    let mut meta = String::new();
    meta.push_str("# Benchmark run metadata\n");
    meta.push_str("protocol = \"artifact\"\n");
    meta.push_str(&format!(
        "crate_version = \"{}\"\n",
        env!("CARGO_PKG_VERSION")
    ));
    meta.push_str("absent_models = [\"svm\", \"xgboost\"]\n");
    meta.push_str("grid_selection = \"inner 80/20 split of the training set\"\n");
    meta.push_str("cka_split = \"test\"\n");
    for (name, rej) in &s.rejections {
        meta.push_str(&format!("rejected_rows.{name} = {}\n", rej.len()));
    }
    meta.push('\n');
    meta.push_str(&cfg.to_toml());
    let path = out_dir.join("run_meta.toml");
    fs::write(&path, meta).map_err(io_err(&path))?;
    Ok(())
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ndarray::Array2;

use molbench::bench::{fmt_g6, load_csv, run_benchmark, BenchConfig};
use molbench::chem::to_smiles;
use molbench::cka::{cka, SigmaConvention};
use molbench::exec::Execution;
use molbench::models::{
    fingerprint_rows, linreg_fit, rf_fit, train, ModelConfig, ModelSpec, RfConfig, SavedModel,
    DEFAULT_RIDGE,
};

#[derive(Parser)]
#[command(
    name = "molbench",
    version,
    about = "Molecular property benchmarking with GNNs, fingerprints and CKA"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standardize a SMILES CSV and log rejected rows.
    Prep {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        smiles_col: String,
        #[arg(long)]
        target_col: String,
        #[arg(long)]
        out: PathBuf,
        /// Reject log path. Defaults to `<out>.rejects.csv`.
        #[arg(long)]
        rejects: Option<PathBuf>,
    },
    /// Train one model on a whole CSV and write a model file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: ModelSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long, default_value_t = 100)]
        epochs: usize,
        #[arg(long, default_value = "smiles")]
        smiles_col: String,
        #[arg(long, default_value = "target")]
        target_col: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict targets for a SMILES CSV with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "smiles")]
        smiles_col: String,
        #[arg(long, default_value = "target")]
        target_col: String,
    },
    /// Run the full benchmark described by a TOML config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run every stage on the calling thread.
        #[arg(long)]
        sequential: bool,
    },
    /// RBF-kernel CKA between two headered embedding CSVs.
    Cka {
        #[arg(long)]
        embeddings_a: PathBuf,
        #[arg(long)]
        embeddings_b: PathBuf,
        #[arg(long, default_value = "median_sq")]
        sigma_convention: SigmaConvention,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Prep {
            input,
            smiles_col,
            target_col,
            out,
            rejects,
        } => prep(&input, &smiles_col, &target_col, &out, rejects),
        Command::Train {
            data,
            model,
            seed,
            hidden,
            lr,
            epochs,
            smiles_col,
            target_col,
            out,
        } => {
            let loaded = load_csv(&data, &smiles_col, &target_col)?;
            report_rejections(&data, loaded.rejections.len());
            let ds = loaded.dataset;
            let all: Vec<usize> = (0..ds.len()).collect();
            let (mols, y) = (ds.molecules(&all), ds.targets(&all));
            let saved = match model {
                ModelSpec::Neural { layer, fingerprint } => {
                    let mut cfg = ModelConfig::new(layer, fingerprint);
                    cfg.seed = seed;
                    cfg.epochs = epochs;
                    cfg.hidden_dim = hidden.unwrap_or(cfg.hidden_dim);
                    cfg.lr = lr.unwrap_or(cfg.lr);
                    let trained = train(&cfg, &mols, &y)?;
                    if let Some(last) = trained.train_loss_curve.last() {
                        eprintln!("final training MSE {}", fmt_g6(*last));
                    }
                    SavedModel::Neural(trained)
                }
                ModelSpec::LinReg => SavedModel::Linear(linreg_fit(
                    &fingerprint_rows(&mols, 1024)?,
                    &y,
                    DEFAULT_RIDGE,
                )?),
                ModelSpec::Forest => {
                    let cfg = RfConfig {
                        seed,
                        ..RfConfig::default()
                    };
                    SavedModel::Forest(rf_fit(
                        &fingerprint_rows(&mols, 1024)?,
                        &y,
                        &cfg,
                        Execution::default(),
                    )?)
                }
            };
            saved
                .save(&out)
                .with_context(|| format!("writing {}", out.display()))?;
            Ok(())
        }
        Command::Predict {
            model,
            data,
            smiles_col,
            target_col,
        } => {
            let saved =
                SavedModel::load(&model).with_context(|| format!("loading {}", model.display()))?;
            let loaded = load_csv(&data, &smiles_col, &target_col)?;
            report_rejections(&data, loaded.rejections.len());
            let ds = loaded.dataset;
            let all: Vec<usize> = (0..ds.len()).collect();
            let mols = ds.molecules(&all);
            let pred = match &saved {
                SavedModel::Neural(m) => m.predict(&mols)?,
                SavedModel::Linear(m) => m.predict(&fingerprint_rows(&mols, m.weights.len())?)?,
                SavedModel::Forest(m) => m.predict(&fingerprint_rows(&mols, m.n_features)?)?,
            };
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            w.write_record(["smiles", "target", "prediction"])?;
            for (r, p) in ds.records.iter().zip(pred) {
                w.write_record([r.smiles.clone(), fmt_g6(r.target), fmt_g6(p)])?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Bench {
            config,
            out,
            sequential,
        } => {
            let cfg = BenchConfig::from_path(&config)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::default()
            };
            let summary = run_benchmark(&cfg, &out, exec)?;
            let failed = summary.runs.iter().filter(|r| r.outcome.is_err()).count();
            eprintln!(
                "{} runs ({} failed), {} CKA scores written to {}",
                summary.runs.len(),
                failed,
                summary.cka_runs.len(),
                out.display()
            );
            Ok(())
        }
        Command::Cka {
            embeddings_a,
            embeddings_b,
            sigma_convention,
        } => {
            let a = read_matrix(&embeddings_a)?;
            let b = read_matrix(&embeddings_b)?;
            let score = cka(&a, &b, sigma_convention)?;
            println!("{}", fmt_g6(score.value));
            Ok(())
        }
    }
}

fn report_rejections(path: &Path, n: usize) {
    if n > 0 {
        eprintln!("{}: skipped {n} rows", path.display());
    }
}

fn prep(
    input: &Path,
    smiles_col: &str,
    target_col: &str,
    out: &Path,
    rejects: Option<PathBuf>,
) -> Result<()> {
    let loaded = load_csv(input, smiles_col, target_col)?;
    let mut w =
        csv::Writer::from_path(out).with_context(|| format!("writing {}", out.display()))?;
    w.write_record(["smiles", "target"])?;
    for r in &loaded.dataset.records {
        w.write_record([to_smiles(&r.molecule), fmt_g6(r.target)])?;
    }
    w.flush()?;

    let rejects = rejects.unwrap_or_else(|| {
        let mut name = out.as_os_str().to_owned();
        name.push(".rejects.csv");
        PathBuf::from(name)
    });
    let mut w = csv::Writer::from_path(&rejects)
        .with_context(|| format!("writing {}", rejects.display()))?;
    w.write_record(["line", "smiles", "reason"])?;
    for r in &loaded.rejections {
        w.write_record([r.line.to_string(), r.smiles.clone(), r.reason.clone()])?;
    }
    w.flush()?;
    eprintln!(
        "kept {} rows, rejected {} (see {})",
        loaded.dataset.len(),
        loaded.rejections.len(),
        rejects.display()
    );
    Ok(())
}

/// Reads a headered CSV of numbers into a row-major matrix.
fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut values = Vec::new();
    let mut n_cols = None;
    let mut n_rows = 0;
    for (k, row) in reader.records().enumerate() {
        let row = row.with_context(|| format!("reading {}", path.display()))?;
        match n_cols {
            None => n_cols = Some(row.len()),
            Some(c) if c != row.len() => {
                bail!(
                    "{}: row {} has {} columns, expected {c}",
                    path.display(),
                    k + 2,
                    row.len()
                )
            }
            _ => {}
        }
        for cell in row.iter() {
            let v: f64 = cell.trim().parse().with_context(|| {
                format!("{}: row {}: not a number: {cell:?}", path.display(), k + 2)
            })?;
            values.push(v);
        }
        n_rows += 1;
    }
    let n_cols = n_cols.unwrap_or(0);
    Ok(Array2::from_shape_vec((n_rows, n_cols), values)?)
}

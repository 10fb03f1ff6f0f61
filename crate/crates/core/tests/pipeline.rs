mod common;

use std::fs;
use std::path::Path;

use molbench::bench::{
    bootstrap_ci, improvement, load_csv, rmse, run_benchmark, BenchConfig, DatasetConfig, GridSpec,
};
use molbench::chem::standardize;
use molbench::exec::Execution;
use molbench::gnn::LayerKind;
use molbench::models::{
    fingerprint_rows, linreg_fit, rf_fit, train, ModelConfig, ModelSpec, RfConfig, SavedModel,
};
use rand::Rng;

use common::*;

fn small_config(models: Vec<ModelSpec>, seeds: Vec<u64>) -> BenchConfig {
    BenchConfig {
        seeds,
        models,
        downsample_n: 50,
        n_boot: 200,
        epochs: 20,
        grid: GridSpec {
            hidden_dim: vec![8, 16],
            lr: vec![1e-2],
        },
        rf: RfConfig {
            n_trees: 10,
            ..RfConfig::default()
        },
        datasets: vec![DatasetConfig {
            name: Some("esol".into()),
            path: esol_path(),
            smiles_column: "smiles".into(),
            target_column: ESOL_TARGET.into(),
            units: "log mol/L".into(),
        }],
        ..BenchConfig::default()
    }
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(
        r.records()
            .map(|rec| rec.unwrap().iter().map(String::from).collect()),
    );
    rows
}

#[test]
fn small_benchmark_produces_one_pair_and_one_cka_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(
        vec![
            ModelSpec::gnn(LayerKind::Gcn),
            ModelSpec::hybrid(LayerKind::Gcn),
        ],
        vec![7],
    );
    let summary = run_benchmark(&cfg, dir.path(), Execution::default()).unwrap();
    assert_eq!(summary.runs.len(), 2);
    assert!(summary
        .runs
        .iter()
        .all(|r| r.outcome.is_ok() && r.n_train == 40 && r.n_test == 10));

    let report = read_rows(&dir.path().join("report.csv"));
    assert_eq!(
        report[0],
        [
            "category",
            "model",
            "esol_rmse",
            "esol_ci_low",
            "esol_ci_high"
        ]
    );
    assert_eq!(report.len(), 3);

    let imp = read_rows(&dir.path().join("improvement.csv"));
    assert_eq!(imp.len(), 2);
    assert_eq!(imp[1][0], "gcn (+fp)");

    let cka = read_rows(&dir.path().join("cka_gnn_fp.csv"));
    assert_eq!(cka.len(), 2);
    let value: f64 = cka[1][1].parse().unwrap();
    assert!((0.0..=1.0).contains(&value));
    assert!(summary.cka("esol", 7, "gcn", "ecfp4").is_some());
}

#[test]
fn improvement_table_matches_report_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut models = vec![ModelSpec::LinReg, ModelSpec::Forest];
    for k in [LayerKind::Gin, LayerKind::Sage] {
        models.push(ModelSpec::gnn(k));
        models.push(ModelSpec::hybrid(k));
    }
    let cfg = small_config(models, vec![0, 1]);
    let summary = run_benchmark(&cfg, dir.path(), Execution::default()).unwrap();
    assert_eq!(summary.runs.len(), 12);

    let report = read_rows(&dir.path().join("report.csv"));
    let rmse_of = |name: &str| -> f64 {
        report.iter().find(|r| r[1] == name).unwrap()[2]
            .parse()
            .unwrap()
    };
    let imp = read_rows(&dir.path().join("improvement.csv"));
    assert_eq!(imp.len(), 4, "two pairs plus the average row");
    let mut pcts = Vec::new();
    for (row, k) in imp[1..3].iter().zip(["gin", "sage"]) {
        let expected = improvement(rmse_of(k), rmse_of(&format!("{k}+fp"))).unwrap();
        let pct: f64 = row[2].parse().unwrap();
        assert!(
            (pct - expected.pct_improvement).abs() < 0.005,
            "{k}: {pct} vs {expected:?}"
        );
        pcts.push(pct);
    }
    let avg: f64 = imp[3][2].parse().unwrap();
    assert!((avg - (pcts[0] + pcts[1]) / 2.0).abs() < 0.005);

    let gnn_gnn = read_rows(&dir.path().join("cka_gnn_gnn_esol.csv"));
    assert_eq!(gnn_gnn[0], ["", "gin", "sage"]);
    assert_eq!(gnn_gnn[1][1], "1");
    assert_eq!(gnn_gnn[1][2], gnn_gnn[2][1]);
}

#[test]
fn sequential_and_parallel_runs_write_identical_files() {
    let cfg = small_config(
        vec![
            ModelSpec::gnn(LayerKind::Gat),
            ModelSpec::hybrid(LayerKind::Gat),
            ModelSpec::Forest,
        ],
        vec![3],
    );
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_benchmark(&cfg, a.path(), Execution::Sequential).unwrap();
    run_benchmark(&cfg, b.path(), Execution::Parallel).unwrap();
    for name in [
        "report.csv",
        "improvement.csv",
        "cka_gnn_fp.csv",
        "runs.csv",
        "predictions/gat_fp.csv",
        "predictions/rf.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = small_config(
        vec![ModelSpec::LinReg, ModelSpec::hybrid(LayerKind::Sage)],
        vec![1, 2],
    );
    assert_eq!(BenchConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    assert!(BenchConfig::from_toml("seeds = [1]\nbogus = 3\n").is_err());
    assert!(BenchConfig::from_toml("models = [\"svm\"]\n").is_err());
}

#[test]
fn loader_rejects_bad_rows_and_keeps_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    fs::write(
        &path,
        "smiles,y\nCCO,1\nC(C,2\nCCN,\nc1ccccc1,nan\nCC(=O)[O-].[Na+],3\n",
    )
    .unwrap();
    let loaded = load_csv(&path, "smiles", "y").unwrap();
    assert_eq!(loaded.dataset.len(), 2);
    let lines: Vec<usize> = loaded.rejections.iter().map(|r| r.line).collect();
    assert_eq!(lines, [3, 4, 5]);
    assert_eq!(
        loaded.dataset.records[1].molecule,
        standardize("CC(=O)O").unwrap()
    );
}

#[test]
fn saved_models_round_trip_bit_exactly() {
    let smiles = esol_smiles();
    let mols: Vec<_> = smiles[..40]
        .iter()
        .map(|s| standardize(s).unwrap())
        .collect();
    let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
    let dir = tempfile::tempdir().unwrap();
    let x = fingerprint_rows(&mols, 1024).unwrap();

    let mut neural = Vec::new();
    for kind in LayerKind::ALL {
        for fp in [false, true] {
            let mut cfg = ModelConfig::new(kind, fp);
            cfg.hidden_dim = 8;
            cfg.epochs = 10;
            cfg.sage_l2_norm = fp;
            neural.push(SavedModel::Neural(train(&cfg, &mols, &y).unwrap()));
        }
    }
    let forest_cfg = RfConfig {
        n_trees: 5,
        ..RfConfig::default()
    };
    let mut all = neural;
    all.push(SavedModel::Linear(linreg_fit(&x, &y, 1e-3).unwrap()));
    all.push(SavedModel::Forest(
        rf_fit(&x, &y, &forest_cfg, Execution::default()).unwrap(),
    ));

    for (k, model) in all.iter().enumerate() {
        let path = dir.path().join(format!("m{k}.json"));
        model.save(&path).unwrap();
        let back = SavedModel::load(&path).unwrap();
        assert_eq!(&back, model);
        if let (SavedModel::Neural(a), SavedModel::Neural(b)) = (model, &back) {
            let (pa, pb) = (a.predict(&mols).unwrap(), b.predict(&mols).unwrap());
            assert!(pa.iter().zip(&pb).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }
}

#[test]
fn bootstrap_interval_usually_contains_the_point_estimate() {
    let mut inside = 0;
    let trials = 50;
    for seed in 0..trials {
        let mut rng = molbench::ad::seeded_rng(seed);
        let y: Vec<f64> = (0..60).map(|_| rng.random_range(-2.0..2.0)).collect();
        let yhat: Vec<f64> = y.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
        let point = rmse(&y, &yhat).unwrap();
        let (lo, hi) = bootstrap_ci(&y, &yhat, 500, seed, Execution::default()).unwrap();
        assert!(lo <= hi);
        if lo <= point && point <= hi {
            inside += 1;
        }
    }
    assert!(inside >= trials * 9 / 10, "{inside}/{trials}");
}

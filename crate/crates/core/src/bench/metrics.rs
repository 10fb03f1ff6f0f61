use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::BenchError;
use crate::exec::Execution;

pub const DEFAULT_N_BOOT: usize = 1000;

pub fn rmse(y: &[f64], y_hat: &[f64]) -> Result<f64, BenchError> {
    if y.len() != y_hat.len() {
        return Err(BenchError::LengthMismatch {
            expected: y.len(),
            got: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(BenchError::Empty);
    }
    let sse: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// Percentile `q` in [0, 100] of an ascending slice, interpolating linearly
/// between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty slice");
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// 95% percentile interval of the RMSE over `n_boot` paired resamples.
/// Resample `b` draws from stream `b` of a generator seeded with `seed`.
pub fn bootstrap_ci(
    y: &[f64],
    y_hat: &[f64],
    n_boot: usize,
    seed: u64,
    exec: Execution,
) -> Result<(f64, f64), BenchError> {
    let n = y.len();
    rmse(y, y_hat)?;
    if n_boot == 0 {
        return Err(BenchError::Config("n_boot must be at least 1".into()));
    }
    let sq: Vec<f64> = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    let mut stats = exec.map_range(n_boot, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let sse: f64 = (0..n).map(|_| sq[rng.random_range(0..n)]).sum();
        (sse / n as f64).sqrt()
    });
    stats.sort_by(f64::total_cmp);
    Ok((percentile(&stats, 2.5), percentile(&stats, 97.5)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Improvement {
    pub delta_rmse: f64,
    pub pct_improvement: f64,
}

/// Absolute and relative RMSE reduction of a hybrid over its graph-only
/// counterpart.
pub fn improvement(rmse_gnn: f64, rmse_hybrid: f64) -> Result<Improvement, BenchError> {
    if !(rmse_gnn.is_finite() && rmse_gnn > 0.0) {
        return Err(BenchError::NonPositiveRmse(rmse_gnn));
    }
    if !rmse_hybrid.is_finite() {
        return Err(BenchError::NonPositiveRmse(rmse_hybrid));
    }
    let delta_rmse = rmse_gnn - rmse_hybrid;
    Ok(Improvement {
        delta_rmse,
        pct_improvement: delta_rmse / rmse_gnn * 100.0,
    })
}

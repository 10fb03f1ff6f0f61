use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::ModelError;

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Ridge regression with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

/// Solves (XcᵀXc + λI) w = Xcᵀyc on column-centered data; the intercept
/// is ȳ − x̄·w. This equals the augmented-column solution with the
/// intercept left out of the penalty.
pub fn linreg_fit(x: &Array2<f64>, y: &[f64], lambda: f64) -> Result<LinearModel, ModelError> {
    let (n, d) = x.dim();
    if n == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if y.len() != n {
        return Err(ModelError::RowMismatch {
            what: "targets",
            expected: n,
            got: y.len(),
        });
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(ModelError::InvalidConfig(
            "ridge penalty must be finite and non-negative".into(),
        ));
    }
    let x_mean = x.mean_axis(Axis(0)).expect("n > 0");
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let xc = x - &x_mean.view().insert_axis(Axis(0));
    let yc = Array1::from_iter(y.iter().map(|v| v - y_mean));

    let mut gram = xc.t().dot(&xc);
    for i in 0..d {
        gram[[i, i]] += lambda;
    }
    let rhs = xc.t().dot(&yc);
    let a = DMatrix::from_row_slice(d, d, gram.as_slice().expect("standard layout"));
    let max_diag = (0..d).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    let chol = a.cholesky().ok_or(ModelError::Singular { lambda })?;
    // Cholesky succeeds on numerically singular systems with tiny pivots.
    let l = chol.l_dirty();
    let min_pivot = (0..d)
        .map(|i| l[(i, i)] * l[(i, i)])
        .fold(f64::INFINITY, f64::min);
    if d > 0 && min_pivot <= 1e-12 * max_diag.max(f64::MIN_POSITIVE) {
        return Err(ModelError::Singular { lambda });
    }
    let w = chol.solve(&DVector::from_column_slice(
        rhs.as_slice().expect("contiguous"),
    ));
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - x_mean.iter().zip(&weights).map(|(m, w)| m * w).sum::<f64>();
    Ok(LinearModel {
        weights,
        intercept,
        lambda,
    })
}

impl LinearModel {
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<f64>, ModelError> {
        if x.ncols() != self.weights.len() {
            return Err(ModelError::InvalidConfig(format!(
                "expected {} feature columns, got {}",
                self.weights.len(),
                x.ncols()
            )));
        }
        let w = Array1::from(self.weights.clone());
        Ok(x.dot(&w).iter().map(|v| v + self.intercept).collect())
    }
}

pub fn linreg_predict(model: &LinearModel, x: &Array2<f64>) -> Result<Vec<f64>, ModelError> {
    model.predict(x)
}

//! Centered kernel alignment with an RBF kernel.
//!
//! The bandwidth defaults to σ = median of the pairwise squared distances,
//! used as K = exp(−d² / 2σ²). `SigmaConvention::SqrtMedian` instead sets
//! σ² = median(d²).

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;

#[derive(Debug, Error, PartialEq)]
pub enum CkaError {
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("row counts differ: {left} vs {right}")]
    RowMismatch { left: usize, right: usize },
    #[error("degenerate representation: all embeddings are identical")]
    Degenerate,
    #[error("embedding contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaConvention {
    #[default]
    MedianSq,
    SqrtMedian,
}

impl fmt::Display for SigmaConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SigmaConvention::MedianSq => "median_sq",
            SigmaConvention::SqrtMedian => "sqrt_median",
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown sigma convention '{0}' (expected median_sq or sqrt_median)")]
pub struct ParseSigmaError(String);

impl FromStr for SigmaConvention {
    type Err = ParseSigmaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "median_sq" => Ok(SigmaConvention::MedianSq),
            "sqrt_median" => Ok(SigmaConvention::SqrtMedian),
            _ => Err(ParseSigmaError(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: Array2<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CkaScore {
    pub value: f64,
    pub n_samples: usize,
}

fn check_finite(x: &Array2<f64>) -> Result<(), CkaError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CkaError::NonFinite)
    }
}

fn sq_dist(x: &Array2<f64>, i: usize, j: usize) -> f64 {
    x.row(i)
        .iter()
        .zip(x.row(j).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn pairwise_sq(x: &Array2<f64>, exec: Execution) -> Array2<f64> {
    let n = x.nrows();
    let upper = exec.map_range(n, |i| {
        (i + 1..n).map(|j| sq_dist(x, i, j)).collect::<Vec<_>>()
    });
    let mut d = Array2::zeros((n, n));
    for (i, row) in upper.into_iter().enumerate() {
        for (k, v) in row.into_iter().enumerate() {
            d[[i, i + 1 + k]] = v;
            d[[i + 1 + k, i]] = v;
        }
    }
    d
}

fn median_of_upper(d: &Array2<f64>) -> f64 {
    let n = d.nrows();
    let mut v: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| d[[i, j]])
        .collect();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Median of the n(n−1)/2 pairwise squared distances; 1 when every point
/// coincides.
pub fn median_sq_dist(x: &Array2<f64>) -> Result<f64, CkaError> {
    if x.nrows() < 2 {
        return Err(CkaError::TooFewSamples {
            n: x.nrows(),
            min: 2,
        });
    }
    check_finite(x)?;
    let med = median_of_upper(&pairwise_sq(x, Execution::Sequential));
    Ok(if med > 0.0 { med } else { 1.0 })
}

pub fn rbf_gram(x: &Array2<f64>, convention: SigmaConvention) -> Result<GramMatrix, CkaError> {
    rbf_gram_with(x, convention, Execution::default())
}

pub fn rbf_gram_with(
    x: &Array2<f64>,
    convention: SigmaConvention,
    exec: Execution,
) -> Result<GramMatrix, CkaError> {
    let n = x.nrows();
    if n < 2 {
        return Err(CkaError::TooFewSamples { n, min: 2 });
    }
    check_finite(x)?;
    let d = pairwise_sq(x, exec);
    let med = median_of_upper(&d);
    let med = if med > 0.0 { med } else { 1.0 };
    let sigma = match convention {
        SigmaConvention::MedianSq => med,
        SigmaConvention::SqrtMedian => med.sqrt(),
    };
    let denom = 2.0 * sigma * sigma;
    let values = d.mapv(|v| (-v / denom).exp());
    Ok(GramMatrix { values, sigma })
}

/// HKH with H = I − 11ᵀ/n.
pub fn center_gram(k: &Array2<f64>) -> Array2<f64> {
    let n = k.nrows();
    let nf = n as f64;
    let row_mean: Vec<f64> = k.rows().into_iter().map(|r| r.sum() / nf).collect();
    let col_mean: Vec<f64> = k.columns().into_iter().map(|c| c.sum() / nf).collect();
    let grand = row_mean.iter().sum::<f64>() / nf;
    Array2::from_shape_fn((n, n), |(i, j)| {
        k[[i, j]] - row_mean[i] - col_mean[j] + grand
    })
}

/// tr(Kc Lc) / (n − 1)² for symmetric centered Grams.
pub fn hsic(kc: &Array2<f64>, lc: &Array2<f64>) -> f64 {
    let n = kc.nrows() as f64;
    let tr: f64 = kc.iter().zip(lc.iter()).map(|(a, b)| a * b).sum();
    tr / ((n - 1.0) * (n - 1.0))
}

fn score(kc: &Array2<f64>, lc: &Array2<f64>) -> Result<f64, CkaError> {
    let kk = hsic(kc, kc);
    let ll = hsic(lc, lc);
    if kk <= 0.0 || ll <= 0.0 {
        return Err(CkaError::Degenerate);
    }
    Ok(hsic(kc, lc) / (kk * ll).sqrt())
}

fn centered(
    x: &Array2<f64>,
    convention: SigmaConvention,
    exec: Execution,
) -> Result<Array2<f64>, CkaError> {
    Ok(center_gram(&rbf_gram_with(x, convention, exec)?.values))
}

pub fn cka(
    x: &Array2<f64>,
    y: &Array2<f64>,
    convention: SigmaConvention,
) -> Result<CkaScore, CkaError> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(CkaError::RowMismatch {
            left: n,
            right: y.nrows(),
        });
    }
    if n < 3 {
        return Err(CkaError::TooFewSamples { n, min: 3 });
    }
    let exec = Execution::default();
    let value = score(
        &centered(x, convention, exec)?,
        &centered(y, convention, exec)?,
    )?;
    Ok(CkaScore {
        value,
        n_samples: n,
    })
}

/// Symmetric matrix of pairwise scores; each Gram matrix is built once.
pub fn cka_matrix(
    embeddings: &[Array2<f64>],
    convention: SigmaConvention,
    exec: Execution,
) -> Result<Array2<f64>, CkaError> {
    let m = embeddings.len();
    if let Some(first) = embeddings.first() {
        for e in embeddings {
            if e.nrows() != first.nrows() {
                return Err(CkaError::RowMismatch {
                    left: first.nrows(),
                    right: e.nrows(),
                });
            }
        }
        if first.nrows() < 3 {
            return Err(CkaError::TooFewSamples {
                n: first.nrows(),
                min: 3,
            });
        }
    }
    let grams = embeddings
        .iter()
        .map(|e| centered(e, convention, exec))
        .collect::<Result<Vec<_>, _>>()?;
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect();
    let scores = exec.map(&pairs, |&(i, j)| score(&grams[i], &grams[j]));
    let mut out = Array2::eye(m);
    for (&(i, j), s) in pairs.iter().zip(scores) {
        let s = s?;
        out[[i, j]] = s;
        out[[j, i]] = s;
    }
    for (i, g) in grams.iter().enumerate() {
        if hsic(g, g) <= 0.0 {
            return Err(CkaError::Degenerate);
        }
        out[[i, i]] = 1.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn median_examples() {
        assert_eq!(median_sq_dist(&array![[0.0], [1.0], [3.0]]).unwrap(), 4.0);
        assert_eq!(
            median_sq_dist(&array![[2.0, 2.0], [2.0, 2.0]]).unwrap(),
            1.0
        );
        assert_eq!(
            median_sq_dist(&array![[0.0], [1.0], [2.0], [3.0]]).unwrap(),
            2.5
        );
        assert_eq!(
            median_sq_dist(&array![[1.0]]),
            Err(CkaError::TooFewSamples { n: 1, min: 2 })
        );
    }

    #[test]
    fn gram_examples() {
        let x = array![[0.0, 0.0], [3.0, 4.0]];
        let g = rbf_gram(&x, SigmaConvention::MedianSq).unwrap();
        assert_eq!(g.sigma, 25.0);
        assert_eq!(g.values[[0, 0]], 1.0);
        assert_eq!(g.values[[0, 1]], (-25.0f64 / (2.0 * 625.0)).exp());
        assert_eq!(g.values[[0, 1]], g.values[[1, 0]]);
        let s = rbf_gram(&x, SigmaConvention::SqrtMedian).unwrap();
        assert_eq!(s.sigma, 5.0);
        assert!((s.values[[0, 1]] - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn centering_examples() {
        let ones = Array2::from_elem((4, 4), 1.0);
        assert!(center_gram(&ones).iter().all(|&v| v == 0.0));
        let k = rbf_gram(
            &array![[0.0], [1.0], [5.0], [2.0]],
            SigmaConvention::MedianSq,
        )
        .unwrap()
        .values;
        let kc = center_gram(&k);
        for r in kc.rows() {
            assert!(r.sum().abs() < 1e-10);
        }
        let twice = center_gram(&kc);
        assert!(twice
            .iter()
            .zip(kc.iter())
            .all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn small_example_matches_reference() {
        // Reference value computed independently with numpy.
        let x = array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [0.5, -1.0]];
        let y = array![[1.0], [0.0], [3.0], [-2.0]];
        let s = cka(&x, &y, SigmaConvention::MedianSq).unwrap();
        assert!((s.value - REFERENCE).abs() < 1e-12, "{}", s.value);
    }

    const REFERENCE: f64 = 0.9534061909469388;

    #[test]
    fn errors() {
        let x = array![[0.0], [1.0], [2.0]];
        assert_eq!(
            cka(&x, &array![[0.0], [1.0]], SigmaConvention::MedianSq),
            Err(CkaError::RowMismatch { left: 3, right: 2 })
        );
        assert_eq!(
            cka(&x, &Array2::zeros((3, 2)), SigmaConvention::MedianSq),
            Err(CkaError::Degenerate)
        );
        assert!(matches!(
            cka(
                &array![[0.0], [1.0]],
                &array![[1.0], [0.0]],
                SigmaConvention::MedianSq
            ),
            Err(CkaError::TooFewSamples { .. })
        ));
        assert_eq!(
            cka(
                &array![[0.0], [f64::NAN], [1.0]],
                &x,
                SigmaConvention::MedianSq
            ),
            Err(CkaError::NonFinite)
        );
    }

    #[test]
    fn matrix_agrees_with_pairwise() {
        let a = array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let b = a.mapv(|v: f64| v * v);
        let c = array![[1.0], [0.0], [3.0], [-2.0], [0.1]];
        let embs = [a.clone(), b.clone(), c.clone()];
        for exec in [Execution::Sequential, Execution::Parallel] {
            let m = cka_matrix(&embs, SigmaConvention::MedianSq, exec).unwrap();
            assert_eq!(m[[0, 0]], 1.0);
            assert_eq!(
                m[[0, 1]],
                cka(&a, &b, SigmaConvention::MedianSq).unwrap().value
            );
            assert_eq!(
                m[[2, 1]],
                cka(&c, &b, SigmaConvention::MedianSq).unwrap().value
            );
            assert_eq!(m, m.t());
        }
    }
}

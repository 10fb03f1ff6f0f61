use ndarray::Array2;

use super::{AdError, Tape, Var};

/// |a - n| / max(1, |a|, |n|)
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs())
}

/// Compares reverse-mode gradients with central differences
/// `(f(p + h) - f(p - h)) / 2h` for every coordinate of every parameter and
/// returns the largest relative error.
///
/// `build` records the computation on a fresh tape given one trainable leaf
/// per entry of `params` and returns the scalar loss.
pub fn grad_check<F>(build: F, params: &[Array2<f64>], h: f64) -> Result<f64, AdError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AdError>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let eval = |values: &[Array2<f64>]| -> Result<f64, AdError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|p| tape.param(p.clone())).collect();
        let loss = build(&mut tape, &vars)?;
        Ok(tape.value(loss)[[0, 0]])
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = build(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Array2<f64>> = vars.iter().map(|&v| tape.grad(v)).collect();

    let mut work: Vec<Array2<f64>> = params.to_vec();
    let mut worst = 0.0f64;
    for p in 0..params.len() {
        for idx in 0..params[p].len() {
            let (r, c) = (idx / params[p].ncols(), idx % params[p].ncols());
            let orig = work[p][[r, c]];
            work[p][[r, c]] = orig + h;
            let plus = eval(&work)?;
            work[p][[r, c]] = orig - h;
            let minus = eval(&work)?;
            work[p][[r, c]] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(relative_error(analytic[p][[r, c]], numeric));
        }
    }
    Ok(worst)
}

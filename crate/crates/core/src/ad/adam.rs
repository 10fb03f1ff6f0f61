use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates for one parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Array2<f64>,
    pub v: Array2<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(shape: (usize, usize)) -> Self {
        AdamState {
            m: Array2::zeros(shape),
            v: Array2::zeros(shape),
            t: 0,
        }
    }

    /// One bias-corrected Adam update of `param` in place.
    pub fn step(&mut self, cfg: &AdamConfig, param: &mut Array2<f64>, grad: &Array2<f64>) {
        assert_eq!(param.dim(), grad.dim(), "parameter/gradient shape mismatch");
        assert_eq!(param.dim(), self.m.dim(), "parameter/state shape mismatch");
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        Zip::from(param)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            });
    }
}

/// Adam over an ordered list of parameter matrices.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Array2<f64>>) -> Self {
        Adam {
            config,
            states: params
                .into_iter()
                .map(|p| AdamState::new(p.dim()))
                .collect(),
        }
    }

    pub fn step<'a>(
        &mut self,
        params: impl IntoIterator<Item = &'a mut Array2<f64>>,
        grads: &[Array2<f64>],
    ) {
        let mut n = 0;
        for ((state, param), grad) in self.states.iter_mut().zip(params).zip(grads) {
            state.step(&self.config, param, grad);
            n += 1;
        }
        assert_eq!(
            n,
            self.states.len(),
            "parameter count changed between steps"
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr_against_sign() {
        let cfg = AdamConfig::with_lr(0.01);
        let mut p = array![[1.0, -2.0, 0.5]];
        let g = array![[3.0, -0.001, 250.0]];
        let mut s = AdamState::new(p.dim());
        let before = p.clone();
        s.step(&cfg, &mut p, &g);
        for ((a, b), gi) in p.iter().zip(before.iter()).zip(g.iter()) {
            let delta = a - b;
            assert!((delta + 0.01 * gi.signum()).abs() < 1e-6, "{delta}");
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let cfg = AdamConfig::with_lr(0.1);
        let mut p = array![[1.0, 2.0]];
        let mut s = AdamState::new(p.dim());
        for _ in 0..50 {
            s.step(&cfg, &mut p, &array![[0.0, 0.0]]);
        }
        assert_eq!(p, array![[1.0, 2.0]]);
        assert_eq!(s.t, 50);
    }

    #[test]
    fn repeated_gradient_steps_stay_bounded_by_lr() {
        let cfg = AdamConfig::with_lr(0.05);
        let mut p = array![[0.0, 0.0]];
        let mut s = AdamState::new(p.dim());
        let g = array![[0.7, -4.0]];
        let mut prev = p.clone();
        for _ in 0..20 {
            s.step(&cfg, &mut p, &g);
            for (a, b) in p.iter().zip(prev.iter()) {
                assert!((a - b).abs() <= cfg.lr * (1.0 + 1e-9));
            }
            prev = p.clone();
        }
    }
}

use serde::{Deserialize, Serialize};

use super::MlpParams;
use crate::error::{PllError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2 penalty: `weight_decay · θ` is added to the gradient.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

/// Bias-corrected Adam moments for one parameter buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        AdamState {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn second_moments(&self) -> &[f64] {
        &self.v
    }

    /// One Adam update of `params` in place.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams) -> Result<()> {
        self.step_slice(params.as_mut_slice(), grads.as_slice())
    }

    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(PllError::Shape(format!(
                "adam state for {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(PllError::NonFinite("gradient"));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        self.t += 1;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let g = g + weight_decay * *p;
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut st = AdamState::new(AdamConfig::new(1e-3, 0.0), 3);
        let mut p = vec![0.5, -1.0, 2.0];
        st.step_slice(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert_eq!(st.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m = 0.1, v = 0.001; m_hat = 1, v_hat = 1; step = lr / (1 + eps).
        let mut st = AdamState::new(AdamConfig::new(1e-3, 0.0), 1);
        let mut p = vec![0.0];
        st.step_slice(&mut p, &[1.0]).unwrap();
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-18, "{}", p[0]);
    }

    #[test]
    fn coupled_decay_enters_the_gradient() {
        // g = 0 + 0.5 * 2 = 1 on the first step, so the move is -lr regardless of scale.
        let mut st = AdamState::new(AdamConfig::new(1e-2, 0.5), 1);
        let mut p = vec![2.0];
        st.step_slice(&mut p, &[0.0]).unwrap();
        assert!((p[0] - (2.0 - 1e-2 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite_gradients() {
        let mut st = AdamState::new(AdamConfig::new(1e-3, 0.0), 1);
        let mut p = vec![0.0];
        assert!(st.step_slice(&mut p, &[f64::INFINITY]).is_err());
        assert_eq!(st.steps(), 0);
    }
}

//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64, beta1: f64, beta2: f64) -> Self {
        AdamState {
            lr,
            beta1,
            beta2,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    /// One update in place. Deterministic; no internal randomness.
    pub fn update(&mut self, theta: &mut [f64], grad: &[f64]) -> Result<()> {
        if theta.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::shape(format!(
                "adam state holds {} parameters, got theta {} / grad {}",
                self.m.len(),
                theta.len(),
                grad.len()
            )));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_leaves_theta_unchanged() {
        let mut adam = AdamState::new(3, 1e-3, 0.9, 0.999);
        let mut theta = vec![1.0, -2.0, 0.5];
        adam.update(&mut theta, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(theta, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn constant_grad_moves_against_its_sign_at_rate_lr() {
        // Scalar recurrence oracle: with constant gradient g, m_hat = g and
        // v_hat = g^2, so each step is -lr * g / (|g| + eps).
        let lr = 0.01;
        let g = 3.0;
        let mut adam = AdamState::new(1, lr, 0.9, 0.999);
        let mut theta = vec![0.0];
        let mut prev = theta[0];
        for _ in 0..50 {
            adam.update(&mut theta, &[g]).unwrap();
            let step = prev - theta[0];
            let expect = lr * g / (g + adam.eps);
            assert!((step - expect).abs() < 1e-9, "step {step} vs {expect}");
            prev = theta[0];
        }
        assert!(theta[0] < 0.0);
    }

    #[test]
    fn identical_runs_are_bit_equal() {
        let run = || {
            let mut adam = AdamState::new(2, 1e-2, 0.9, 0.999);
            let mut theta = vec![0.3, -0.7];
            for k in 0..20 {
                let g = [(k as f64 * 0.1).sin(), (k as f64 * 0.2).cos()];
                adam.update(&mut theta, &g).unwrap();
            }
            theta
        };
        let a = run();
        let b = run();
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut adam = AdamState::new(2, 1e-3, 0.9, 0.999);
        let mut theta = vec![0.0; 3];
        assert!(adam.update(&mut theta, &[0.0, 0.0]).is_err());
    }
}

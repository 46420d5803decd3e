//! Adam optimizer with bias-corrected moment estimates.

use super::matrix::DenseMatrix;
use crate::error::{EngineError, Result};
use serde::{Deserialize, Serialize};

/// Per-parameter first/second moment buffers plus the shared step counter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: u64,
    m: Vec<DenseMatrix>,
    v: Vec<DenseMatrix>,
}

impl AdamState {
    /// Buffers are allocated to match `shapes`, one entry per trainable
    /// parameter in flattening order.
    pub fn new(lr: f64, shapes: &[(usize, usize)]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| DenseMatrix::zeros(r, c)).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    /// One update over all parameters. `grads[i]` may be `None` when the
    /// parameter did not reach the loss (its moments still decay).
    pub fn step(
        &mut self,
        params: &mut [&mut DenseMatrix],
        grads: &[Option<DenseMatrix>],
    ) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(EngineError::contract(
                "adam_step",
                format!(
                    "expected {} parameters, got {} params / {} grads",
                    self.m.len(),
                    params.len(),
                    grads.len()
                ),
            ));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, param) in params.iter_mut().enumerate() {
            if param.shape() != self.m[i].shape() {
                return Err(EngineError::contract(
                    "adam_step",
                    format!(
                        "parameter {i} shape {:?} does not match optimizer slot {:?}",
                        param.shape(),
                        self.m[i].shape()
                    ),
                ));
            }
            let zero;
            let grad = match &grads[i] {
                Some(g) => g,
                None => {
                    zero = DenseMatrix::zeros(param.rows(), param.cols());
                    &zero
                }
            };
            if grad.shape() != param.shape() {
                return Err(EngineError::contract(
                    "adam_step",
                    format!(
                        "gradient {i} shape {:?} does not match parameter {:?}",
                        grad.shape(),
                        param.shape()
                    ),
                ));
            }
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = param.data_mut();
            for j in 0..p.len() {
                let g = grad.data()[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p[j] -= self.lr * mhat / (vhat.sqrt() + self.epsilon);
            }
            if !param.is_finite() {
                return Err(EngineError::NonFinite { op: "adam_step" });
            }
        }
        Ok(())
    }
}

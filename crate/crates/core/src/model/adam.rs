//! Adam optimizer with bias-corrected first and second moments.

use serde::{Deserialize, Serialize};

use super::math::Mat;
use super::{ModelParams, TrainConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    m: Vec<(String, Mat)>,
    v: Vec<(String, Mat)>,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let m = params
            .tensors()
            .iter()
            .map(|(n, t)| (n.to_string(), Mat::zeros_like(t)))
            .collect::<Vec<_>>();
        let v = m.clone();
        AdamState { step: 0, m, v }
    }
}

/// One update: m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2;
/// p -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let grad_tensors = grads.tensors();
    for (idx, (name, p)) in params.tensors_mut().into_iter().enumerate() {
        let (gname, g) = &grad_tensors[idx];
        let (mname, m) = &mut state.m[idx];
        let (_, v) = &mut state.v[idx];
        if name != *gname || name != mname.as_str() {
            return Err(Error::ShapeMismatch(format!(
                "optimizer state out of order at {name}"
            )));
        }
        if g.data.len() != p.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient shape differs from parameter {name}"
            )));
        }
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m.data[i] / bc1;
            let v_hat = v.data[i] / bc2;
            p.data[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
    Ok(())
}

//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f32>> = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One Adam update. Fails without touching any parameter if a gradient is
/// non-finite.
pub fn adam_step(params: &mut ParamStore, grads: &[Tensor<f32>], state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(NnError::Contract(format!(
            "adam_step: {} params, {} grads, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.value.shape() != g.shape() {
            return Err(NnError::Shape {
                op: "adam_step",
                lhs: p.value.shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
        if !g.all_finite() {
            return Err(NnError::TrainingDiverged {
                param: p.name.clone(),
            });
        }
    }
    state.step += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for (((w, &gv), mi), vi) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.iter_mut())
            .zip(v.iter_mut())
        {
            *mi = beta1 * *mi + (1.0 - beta1) * gv;
            *vi = beta2 * *vi + (1.0 - beta2) * gv * gv;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

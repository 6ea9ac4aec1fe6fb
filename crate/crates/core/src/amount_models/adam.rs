use serde::{Deserialize, Serialize};

use super::{HeadGrad, HeadParams, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates shaped like the head parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m_weights: Vec<f64>,
    v_weights: Vec<f64>,
    m_bias: Vec<f64>,
    v_bias: Vec<f64>,
}

impl AdamState {
    pub fn new(params: &HeadParams, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m_weights: vec![0.0; params.weights.len()],
            v_weights: vec![0.0; params.weights.len()],
            m_bias: vec![0.0; params.bias.len()],
            v_bias: vec![0.0; params.bias.len()],
        }
    }
}

fn update(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], cfg: &AdamConfig, bc1: f64, bc2: f64) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut HeadParams, grad: &HeadGrad, state: &mut AdamState) -> Result<(), ModelError> {
    let shapes_match = grad.weights.len() == params.weights.len()
        && grad.bias.len() == params.bias.len()
        && state.m_weights.len() == params.weights.len()
        && state.m_bias.len() == params.bias.len();
    if !shapes_match {
        return Err(ModelError::ShapeMismatch);
    }
    state.step += 1;
    let cfg = state.config;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    update(
        &mut params.weights,
        &grad.weights,
        &mut state.m_weights,
        &mut state.v_weights,
        &cfg,
        bc1,
        bc2,
    );
    update(
        &mut params.bias,
        &grad.bias,
        &mut state.m_bias,
        &mut state.v_bias,
        &cfg,
        bc1,
        bc2,
    );
    Ok(())
}

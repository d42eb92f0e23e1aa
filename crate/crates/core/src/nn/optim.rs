use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{NnError, Param, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    /// Steps taken so far.
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(shape: &[usize], config: AdamConfig) -> Self {
        Self {
            m: Tensor::zeros(shape),
            v: Tensor::zeros(shape),
            t: 0,
            config,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut Tensor,
    grads: &Tensor,
    state: &mut AdamState,
) -> Result<(), NnError> {
    grads.ensure_shape(params.shape())?;
    state.m.ensure_shape(params.shape())?;
    grads.ensure_finite()?;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - libm::pow(beta1, t);
    let c2 = 1.0 - libm::pow(beta2, t);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    for (i, (p, &g)) in params.data_mut().iter_mut().zip(grads.data()).enumerate() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        *p -= lr * m_hat / (libm::sqrt(v_hat) + epsilon);
    }
    Ok(())
}

/// Adam over a list of parameters, with one state per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            states: Vec::new(),
        }
    }

    /// Update every parameter from its accumulated gradient. Parameters
    /// must be passed in the same order on every call.
    pub fn step(&mut self, params: Vec<&mut Param>) -> Result<(), NnError> {
        if self.states.is_empty() {
            self.states = params
                .iter()
                .map(|p| AdamState::new(p.value.shape(), self.config))
                .collect();
        }
        for (p, state) in params.into_iter().zip(&mut self.states) {
            let g = p.grad_or_zeros();
            adam_step(&mut p.value, &g, state)?;
        }
        Ok(())
    }
}

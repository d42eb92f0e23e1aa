//! Elementwise activations. ACON-C is parameterized per channel:
//!
//! `f(x) = (p1 - p2) * x * sigmoid(beta * (p1 - p2) * x) + p2 * x`
//!
//! With `p1 = 1, p2 = 0, beta = 1` it is exactly SiLU; as `beta` grows it
//! approaches `max(p1 * x, p2 * x)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{NnError, Tensor};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Trainable ACON-C switches, one value per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AconCParams {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub beta: Vec<f64>,
}

impl AconCParams {
    /// Initialized to the SiLU point (`p1 = 1, p2 = 0, beta = 1`).
    pub fn new(channels: usize) -> Self {
        Self {
            p1: vec![1.0; channels],
            p2: vec![0.0; channels],
            beta: vec![1.0; channels],
        }
    }

    pub fn uniform(channels: usize, p1: f64, p2: f64, beta: f64) -> Self {
        Self {
            p1: vec![p1; channels],
            p2: vec![p2; channels],
            beta: vec![beta; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.p1.len()
    }

    fn check(&self, x: &Tensor) -> Result<(), NnError> {
        let c = self.channels();
        if self.p2.len() != c || self.beta.len() != c {
            return Err(NnError::ShapeMismatch {
                expected: vec![c, c, c],
                found: vec![self.p1.len(), self.p2.len(), self.beta.len()],
            });
        }
        if x.channels() != c {
            return Err(NnError::ShapeMismatch {
                expected: vec![c],
                found: vec![x.channels()],
            });
        }
        Ok(())
    }
}

pub fn acon_c_forward(x: &Tensor, params: &AconCParams) -> Result<Tensor, NnError> {
    params.check(x)?;
    let c = params.channels();
    let mut out = x.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        let ch = i % c;
        let (p1, p2, beta) = (params.p1[ch], params.p2[ch], params.beta[ch]);
        let d = p1 - p2;
        let xv = *v;
        *v = d * xv * sigmoid(beta * d * xv) + p2 * xv;
    }
    Ok(out)
}

/// Gradients of ACON-C contracted with an upstream gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct AconCGrads {
    pub x: Tensor,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub beta: Vec<f64>,
}

/// With `d = p1 - p2`, `s = sigmoid(beta * d * x)`, `q = s * (1 - s)`:
///
/// * `df/dx    = d*s + beta*d^2*x*q + p2`
/// * `df/dp1   = x*s + beta*d*x^2*q`
/// * `df/dp2   = x - df/dp1`
/// * `df/dbeta = d^2*x^2*q`
pub fn acon_c_backward(
    x: &Tensor,
    params: &AconCParams,
    upstream: &Tensor,
) -> Result<AconCGrads, NnError> {
    params.check(x)?;
    upstream.ensure_shape(x.shape())?;
    let c = params.channels();
    let mut gx = x.clone();
    let mut gp1 = vec![0.0; c];
    let mut gp2 = vec![0.0; c];
    let mut gbeta = vec![0.0; c];
    for (i, (&xv, &g)) in x.data().iter().zip(upstream.data()).enumerate() {
        let ch = i % c;
        let (p1, p2, beta) = (params.p1[ch], params.p2[ch], params.beta[ch]);
        let d = p1 - p2;
        let s = sigmoid(beta * d * xv);
        let q = s * (1.0 - s);
        let dp1 = xv * s + beta * d * xv * xv * q;
        gx.data_mut()[i] = g * (d * s + beta * d * d * xv * q + p2);
        gp1[ch] += g * dp1;
        gp2[ch] += g * (xv - dp1);
        gbeta[ch] += g * d * d * xv * xv * q;
    }
    Ok(AconCGrads {
        x: gx,
        p1: gp1,
        p2: gp2,
        beta: gbeta,
    })
}

pub fn silu_forward(x: &Tensor) -> Tensor {
    x.map(|v| v * sigmoid(v))
}

pub fn silu_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor, NnError> {
    upstream.ensure_shape(x.shape())?;
    let mut g = upstream.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        let s = sigmoid(xv);
        *gv *= s + xv * s * (1.0 - s);
    }
    Ok(g)
}

pub fn relu_forward(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn relu_backward(x: &Tensor, upstream: &Tensor) -> Result<Tensor, NnError> {
    upstream.ensure_shape(x.shape())?;
    let mut g = upstream.clone();
    for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
        if xv <= 0.0 {
            *gv = 0.0;
        }
    }
    Ok(g)
}

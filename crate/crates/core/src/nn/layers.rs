use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{self, AconCParams};
use super::{NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// A trainable tensor and its accumulated gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub value: Tensor,
    #[serde(skip)]
    pub grad: Option<Tensor>,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        Self { value, grad: None }
    }

    fn accumulate(&mut self, g: &[f64]) {
        let grad = self
            .grad
            .get_or_insert_with(|| Tensor::zeros(self.value.shape()));
        for (a, b) in grad.data_mut().iter_mut().zip(g) {
            *a += b;
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    /// Gradient, or zeros when nothing was accumulated.
    pub fn grad_or_zeros(&self) -> Tensor {
        self.grad
            .clone()
            .unwrap_or_else(|| Tensor::zeros(self.value.shape()))
    }
}

/// Dense map over the channel axis, applied at every position. A 1x1
/// convolution is this layer applied to a feature map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `[in, out]`
    pub weight: Param,
    /// `[out]`
    pub bias: Param,
    #[serde(skip)]
    input: Option<Tensor>,
}

impl Linear {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self, NnError> {
        if weight.rank() != 2 {
            return Err(NnError::BadShape(weight.shape().to_vec()));
        }
        bias.ensure_shape(&[weight.shape()[1]])?;
        Ok(Self {
            weight: Param::new(weight),
            bias: Param::new(bias),
            input: None,
        })
    }

    /// Glorot-uniform weights and zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = libm::sqrt(6.0 / (inputs + outputs) as f64);
        let w: Vec<f64> = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self::new(
            Tensor::new(vec![inputs, outputs], w).expect("sized above"),
            Tensor::zeros(&[outputs]),
        )
        .expect("sized above")
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let (n_in, n_out) = (self.inputs(), self.outputs());
        if x.channels() != n_in {
            return Err(NnError::ShapeMismatch {
                expected: vec![n_in],
                found: vec![x.channels()],
            });
        }
        let w = self.weight.value.data();
        let b = self.bias.value.data();
        let rows = x.rows();
        let mut out = Vec::with_capacity(rows * n_out);
        for r in 0..rows {
            let xr = x.row(r);
            let mut acc = b.to_vec();
            for (i, &xi) in xr.iter().enumerate() {
                let wr = &w[i * n_out..(i + 1) * n_out];
                for (a, &wv) in acc.iter_mut().zip(wr) {
                    *a += xi * wv;
                }
            }
            out.extend(acc);
        }
        let mut shape = x.shape().to_vec();
        *shape.last_mut().expect("non-empty") = n_out;
        Tensor::new(shape, out)
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor, NnError> {
        let y = self.apply(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor, NnError> {
        let x = self.input.as_ref().ok_or(NnError::NoForwardCache)?;
        let (n_in, n_out) = (self.inputs(), self.outputs());
        let mut out_shape = x.shape().to_vec();
        *out_shape.last_mut().expect("non-empty") = n_out;
        upstream.ensure_shape(&out_shape)?;
        let w = self.weight.value.data();
        let mut gw = vec![0.0; n_in * n_out];
        let mut gb = vec![0.0; n_out];
        let mut gx = Vec::with_capacity(x.len());
        for r in 0..x.rows() {
            let xr = x.row(r);
            let gr = upstream.row(r);
            for (a, &g) in gb.iter_mut().zip(gr) {
                *a += g;
            }
            for (i, &xi) in xr.iter().enumerate() {
                let wr = &w[i * n_out..(i + 1) * n_out];
                let gwr = &mut gw[i * n_out..(i + 1) * n_out];
                let mut dx = 0.0;
                for ((gwv, &wv), &g) in gwr.iter_mut().zip(wr).zip(gr) {
                    *gwv += xi * g;
                    dx += wv * g;
                }
                gx.push(dx);
            }
        }
        self.weight.accumulate(&gw);
        self.bias.accumulate(&gb);
        Tensor::new(x.shape().to_vec(), gx)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct BnCache {
    xhat: Tensor,
    inv_std: Vec<f64>,
    mode: Mode,
}

/// Per-channel batch normalization. Statistics are taken over every
/// position of every sample in the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Weight kept on the old running statistic at each update.
    pub momentum: f64,
    pub eps: f64,
    #[serde(skip)]
    cache: Option<BnCache>,
}

impl BatchNorm {
    pub const DEFAULT_MOMENTUM: f64 = 0.9;
    pub const DEFAULT_EPS: f64 = 1e-5;

    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(Tensor::filled(&[channels], 1.0)),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: Self::DEFAULT_MOMENTUM,
            eps: Self::DEFAULT_EPS,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let c = self.channels();
        if x.channels() != c {
            return Err(NnError::ShapeMismatch {
                expected: vec![c],
                found: vec![x.channels()],
            });
        }
        let rows = x.rows();
        let (mean, var) = match mode {
            Mode::Train => {
                if rows < 2 {
                    return Err(NnError::BatchTooSmall(rows));
                }
                let mut mean = vec![0.0; c];
                for r in 0..rows {
                    for (m, v) in mean.iter_mut().zip(x.row(r)) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= rows as f64);
                let mut var = vec![0.0; c];
                for r in 0..rows {
                    for ((s, v), m) in var.iter_mut().zip(x.row(r)).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                var.iter_mut().for_each(|s| *s /= rows as f64);
                let unbiased = rows as f64 / (rows - 1) as f64;
                for ch in 0..c {
                    self.running_mean[ch] =
                        self.momentum * self.running_mean[ch] + (1.0 - self.momentum) * mean[ch];
                    self.running_var[ch] = self.momentum * self.running_var[ch]
                        + (1.0 - self.momentum) * var[ch] * unbiased;
                }
                (mean, var)
            }
            Mode::Infer => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / libm::sqrt(v + self.eps)).collect();
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let mut xhat = x.clone();
        let mut y = x.clone();
        for (i, (xh, yv)) in xhat.data_mut().iter_mut().zip(y.data_mut()).enumerate() {
            let ch = i % c;
            *xh = (*xh - mean[ch]) * inv_std[ch];
            *yv = gamma[ch] * *xh + beta[ch];
        }
        self.cache = Some(BnCache {
            xhat,
            inv_std,
            mode,
        });
        Ok(y)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::NoForwardCache)?;
        upstream.ensure_shape(cache.xhat.shape())?;
        let c = self.channels();
        let rows = cache.xhat.rows();
        let gamma = self.gamma.value.data().to_vec();
        let mut ggamma = vec![0.0; c];
        let mut gbeta = vec![0.0; c];
        for (i, (&g, &xh)) in upstream.data().iter().zip(cache.xhat.data()).enumerate() {
            ggamma[i % c] += g * xh;
            gbeta[i % c] += g;
        }
        let mut gx = upstream.clone();
        match cache.mode {
            Mode::Infer => {
                for (i, v) in gx.data_mut().iter_mut().enumerate() {
                    *v *= gamma[i % c] * cache.inv_std[i % c];
                }
            }
            Mode::Train => {
                // dx = inv_std/N * (N*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat)),
                // with dxhat = g*gamma, so the sums are gamma*gbeta and gamma*ggamma
                let n = rows as f64;
                for (i, v) in gx.data_mut().iter_mut().enumerate() {
                    let ch = i % c;
                    let dxhat = *v * gamma[ch];
                    let xh = cache.xhat.data()[i];
                    *v = cache.inv_std[ch] / n
                        * (n * dxhat - gamma[ch] * gbeta[ch] - xh * gamma[ch] * ggamma[ch]);
                }
            }
        }
        self.gamma.accumulate(&ggamma);
        self.beta.accumulate(&gbeta);
        Ok(gx)
    }
}

/// ACON-C as a layer with trainable per-channel `p1`, `p2`, `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AconC {
    pub p1: Param,
    pub p2: Param,
    pub beta: Param,
    #[serde(skip)]
    input: Option<Tensor>,
}

impl AconC {
    pub fn new(params: AconCParams) -> Self {
        Self {
            p1: Param::new(Tensor::from_vec(params.p1)),
            p2: Param::new(Tensor::from_vec(params.p2)),
            beta: Param::new(Tensor::from_vec(params.beta)),
            input: None,
        }
    }

    pub fn params(&self) -> AconCParams {
        AconCParams {
            p1: self.p1.value.data().to_vec(),
            p2: self.p2.value.data().to_vec(),
            beta: self.beta.value.data().to_vec(),
        }
    }

    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor, NnError> {
        let y = activation::acon_c_forward(x, &self.params())?;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor, NnError> {
        let x = self.input.as_ref().ok_or(NnError::NoForwardCache)?;
        let g = activation::acon_c_backward(x, &self.params(), upstream)?;
        self.p1.accumulate(&g.p1);
        self.p2.accumulate(&g.p2);
        self.beta.accumulate(&g.beta);
        Ok(g.x)
    }
}

/// Spatial mean per channel of one `H x W x C` map.
pub fn global_average_pool(x: &Tensor) -> Result<Tensor, NnError> {
    if x.rank() != 3 {
        return Err(NnError::BadShape(x.shape().to_vec()));
    }
    let mut shape = vec![1];
    shape.extend_from_slice(x.shape());
    let batched = x.clone().reshape(shape)?;
    let pooled = GlobalAvgPool::default().forward(&batched)?;
    pooled.reshape(vec![x.channels()])
}

/// `[N, H, W, C] -> [N, C]` spatial mean.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GlobalAvgPool {
    #[serde(skip)]
    input_shape: Option<Vec<usize>>,
}

fn split_spatial(x: &Tensor) -> Result<(usize, usize, usize), NnError> {
    if x.rank() < 3 {
        return Err(NnError::BadShape(x.shape().to_vec()));
    }
    let n = x.shape()[0];
    let c = x.channels();
    let positions = x.len() / (n * c);
    Ok((n, positions, c))
}

impl GlobalAvgPool {
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor, NnError> {
        let (n, positions, c) = split_spatial(x)?;
        let mut out = vec![0.0; n * c];
        for s in 0..n {
            for p in 0..positions {
                let row = x.row(s * positions + p);
                for (o, v) in out[s * c..(s + 1) * c].iter_mut().zip(row) {
                    *o += v;
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= positions as f64);
        self.input_shape = Some(x.shape().to_vec());
        Tensor::new(vec![n, c], out)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor, NnError> {
        let shape = self.input_shape.clone().ok_or(NnError::NoForwardCache)?;
        let n = shape[0];
        let c = *shape.last().expect("non-empty");
        upstream.ensure_shape(&[n, c])?;
        let positions: usize = shape[1..shape.len() - 1].iter().product();
        let mut gx = Vec::with_capacity(n * positions * c);
        for s in 0..n {
            let g = upstream.row(s);
            for _ in 0..positions {
                gx.extend(g.iter().map(|v| v / positions as f64));
            }
        }
        Tensor::new(shape, gx)
    }
}

/// `[N, H, W, C] -> [N, C]` spatial maximum.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GlobalMaxPool {
    #[serde(skip)]
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl GlobalMaxPool {
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor, NnError> {
        let (n, positions, c) = split_spatial(x)?;
        let mut out = vec![f64::NEG_INFINITY; n * c];
        let mut argmax = vec![0usize; n * c];
        for s in 0..n {
            for p in 0..positions {
                let r = s * positions + p;
                for (ch, &v) in x.row(r).iter().enumerate() {
                    if v > out[s * c + ch] {
                        out[s * c + ch] = v;
                        argmax[s * c + ch] = r * c + ch;
                    }
                }
            }
        }
        self.cache = Some((x.shape().to_vec(), argmax));
        Tensor::new(vec![n, c], out)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor, NnError> {
        let (shape, argmax) = self.cache.as_ref().ok_or(NnError::NoForwardCache)?;
        upstream.ensure_shape(&[shape[0], *shape.last().expect("non-empty")])?;
        let mut gx = Tensor::zeros(shape);
        for (&flat, &g) in argmax.iter().zip(upstream.data()) {
            gx.data_mut()[flat] += g;
        }
        Ok(gx)
    }
}

/// Inverted dropout; identity at inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub rate: f64,
    #[serde(skip)]
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self, NnError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::BadDropout);
        }
        Ok(Self { rate, mask: None })
    }

    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor, mode: Mode, rng: &mut R) -> Tensor {
        match mode {
            Mode::Infer => {
                self.mask = None;
                x.clone()
            }
            Mode::Train => {
                let keep = 1.0 - self.rate;
                let mask: Vec<f64> = (0..x.len())
                    .map(|_| {
                        if rng.random::<f64>() < self.rate {
                            0.0
                        } else {
                            1.0 / keep
                        }
                    })
                    .collect();
                let mut y = x.clone();
                for (v, m) in y.data_mut().iter_mut().zip(&mask) {
                    *v *= m;
                }
                self.mask = Some(mask);
                y
            }
        }
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Tensor {
        let mut g = upstream.clone();
        if let Some(mask) = &self.mask {
            for (v, m) in g.data_mut().iter_mut().zip(mask) {
                *v *= m;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    /// 1x1 convolution over a feature map.
    Conv1x1(Linear),
    Dense(Linear),
    BatchNorm(BatchNorm),
    AconC(AconC),
    Silu {
        #[serde(skip)]
        input: Option<Tensor>,
    },
    Relu {
        #[serde(skip)]
        input: Option<Tensor>,
    },
    GlobalAvgPool(GlobalAvgPool),
    GlobalMaxPool(GlobalMaxPool),
    Dropout(Dropout),
}

impl Layer {
    pub fn silu() -> Self {
        Layer::Silu { input: None }
    }

    pub fn relu() -> Self {
        Layer::Relu { input: None }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv1x1(_) => "conv1x1",
            Layer::Dense(_) => "dense",
            Layer::BatchNorm(_) => "batch_norm",
            Layer::AconC(_) => "acon_c",
            Layer::Silu { .. } => "silu",
            Layer::Relu { .. } => "relu",
            Layer::GlobalAvgPool(_) => "global_avg_pool",
            Layer::GlobalMaxPool(_) => "global_max_pool",
            Layer::Dropout(_) => "dropout",
        }
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor, NnError> {
        match self {
            Layer::Conv1x1(l) | Layer::Dense(l) => l.forward(x),
            Layer::BatchNorm(b) => b.forward(x, mode),
            Layer::AconC(a) => a.forward(x),
            Layer::Silu { input } => {
                *input = Some(x.clone());
                Ok(activation::silu_forward(x))
            }
            Layer::Relu { input } => {
                *input = Some(x.clone());
                Ok(activation::relu_forward(x))
            }
            Layer::GlobalAvgPool(p) => p.forward(x),
            Layer::GlobalMaxPool(p) => p.forward(x),
            Layer::Dropout(d) => Ok(d.forward(x, mode, rng)),
        }
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor, NnError> {
        match self {
            Layer::Conv1x1(l) | Layer::Dense(l) => l.backward(upstream),
            Layer::BatchNorm(b) => b.backward(upstream),
            Layer::AconC(a) => a.backward(upstream),
            Layer::Silu { input } => {
                activation::silu_backward(input.as_ref().ok_or(NnError::NoForwardCache)?, upstream)
            }
            Layer::Relu { input } => {
                activation::relu_backward(input.as_ref().ok_or(NnError::NoForwardCache)?, upstream)
            }
            Layer::GlobalAvgPool(p) => p.backward(upstream),
            Layer::GlobalMaxPool(p) => p.backward(upstream),
            Layer::Dropout(d) => Ok(d.backward(upstream)),
        }
    }

    /// Drop whatever `forward` cached for the backward pass.
    pub fn clear_cache(&mut self) {
        match self {
            Layer::Conv1x1(l) | Layer::Dense(l) => l.input = None,
            Layer::BatchNorm(b) => b.cache = None,
            Layer::AconC(a) => a.input = None,
            Layer::Silu { input } | Layer::Relu { input } => *input = None,
            Layer::GlobalAvgPool(p) => p.input_shape = None,
            Layer::GlobalMaxPool(p) => p.cache = None,
            Layer::Dropout(d) => d.mask = None,
        }
    }

    /// Trainable parameters in a fixed order.
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Conv1x1(l) | Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::BatchNorm(b) => vec![&mut b.gamma, &mut b.beta],
            Layer::AconC(a) => vec![&mut a.p1, &mut a.p2, &mut a.beta],
            _ => Vec::new(),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Conv1x1(l) | Layer::Dense(l) => vec![&l.weight, &l.bias],
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta],
            Layer::AconC(a) => vec![&a.p1, &a.p2, &a.beta],
            _ => Vec::new(),
        }
    }
}

/// Layers applied in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        x: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Tensor, NnError> {
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, mode, rng)?;
        }
        Ok(h)
    }

    pub fn backward(&mut self, upstream: &Tensor) -> Result<Tensor, NnError> {
        let mut g = upstream.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn clear_caches(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

//! Feed-forward networks over single-channel sequences, trained by
//! mini-batch gradient descent on softmax cross-entropy.
//!
//! Activations are `(batch, channels * length)` matrices in channel-major
//! order, so flattening is free and a dense layer sees the whole row.

use ndarray::{s, Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d { filters: usize, kernel: usize },
    Dense { units: usize },
    Relu,
    MaxPool { size: usize },
    Dropout { rate: f64 },
    Flatten,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub layers: Vec<LayerSpec>,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl NetSpec {
    /// Convolutional widths 128, 64, 32, 16 with kernel 3 and one pooling
    /// stage after the first block; Adam.
    pub fn cnn() -> Self {
        use LayerSpec::*;
        NetSpec {
            layers: vec![
                Conv1d { filters: 128, kernel: 3 },
                Relu,
                MaxPool { size: 2 },
                Dropout { rate: 0.25 },
                Conv1d { filters: 64, kernel: 3 },
                Relu,
                Dropout { rate: 0.25 },
                Conv1d { filters: 32, kernel: 3 },
                Relu,
                Conv1d { filters: 16, kernel: 3 },
                Relu,
                Flatten,
                Dropout { rate: 0.5 },
                Dense { units: 2 },
            ],
            optimizer: Optimizer::adam(),
            epochs: 20,
            batch_size: 16,
            seed: 0,
        }
    }

    /// Fully connected widths 128, 64, 32, 16 with the same pooling and
    /// dropout placement; plain SGD.
    pub fn dnn() -> Self {
        use LayerSpec::*;
        NetSpec {
            layers: vec![
                Dense { units: 128 },
                Relu,
                Dropout { rate: 0.25 },
                MaxPool { size: 2 },
                Dense { units: 64 },
                Relu,
                Dropout { rate: 0.25 },
                Dense { units: 32 },
                Relu,
                Dense { units: 16 },
                Relu,
                Dropout { rate: 0.5 },
                Dense { units: 2 },
            ],
            optimizer: Optimizer::Sgd { lr: 0.01 },
            epochs: 20,
            batch_size: 16,
            seed: 0,
        }
    }

    pub fn without_dropout(mut self) -> Self {
        self.layers.retain(|l| !matches!(l, LayerSpec::Dropout { .. }));
        self
    }

    pub fn has_dropout(&self) -> bool {
        self.layers
            .iter()
            .any(|l| matches!(l, LayerSpec::Dropout { rate } if *rate > 0.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch size must be positive"));
        }
        match self.optimizer {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } if !(lr > 0.0 && lr.is_finite()) => {
                return Err(Error::config(format!("learning rate must be positive, got {lr}")));
            }
            Optimizer::Adam { beta1, beta2, eps, .. }
                if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) =>
            {
                return Err(Error::config("Adam needs betas in [0, 1) and positive eps"));
            }
            _ => {}
        }
        for l in &self.layers {
            match *l {
                LayerSpec::Conv1d { filters, kernel } if filters == 0 || kernel == 0 => {
                    return Err(Error::config("convolution needs positive filters and kernel"));
                }
                LayerSpec::Dense { units: 0 } | LayerSpec::MaxPool { size: 0 } => {
                    return Err(Error::config("zero-sized layer"));
                }
                LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                    return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Weights `(out, fan_in)` and bias of one parametric layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Param {
    fn zeros_like(&self) -> Param {
        Param {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.len()),
        }
    }

    pub fn len(&self) -> usize {
        self.w.len() + self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, i: usize) -> f64 {
        let nw = self.w.len();
        if i < nw {
            self.w.as_slice().expect("standard layout")[i]
        } else {
            self.b[i - nw]
        }
    }

    fn get_mut(&mut self, i: usize) -> &mut f64 {
        let nw = self.w.len();
        if i < nw {
            &mut self.w.as_slice_mut().expect("standard layout")[i]
        } else {
            &mut self.b[i - nw]
        }
    }
}

enum Cache {
    None,
    Conv(Array2<f64>),
    Dense(Array2<f64>),
    Relu(Array2<f64>),
    Pool(Vec<usize>),
    Dropout(Array2<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    /// `(channels, length)` entering each layer, plus the output shape.
    shapes: Vec<(usize, usize)>,
    /// Parameter slot per layer.
    slots: Vec<Option<usize>>,
    params: Vec<Param>,
}

impl Network {
    /// Builds a network for inputs of `input_len` samples with fan-in
    /// scaled uniform weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(layers: &[LayerSpec], input_len: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_for(seed, stream::MODEL, 0);
        let mut net = Self::shaped(layers, input_len)?;
        for i in 0..net.layers.len() {
            if net.slots[i].is_none() {
                continue;
            }
            let (c, l) = net.shapes[i];
            let (out, fan_in) = match net.layers[i] {
                LayerSpec::Conv1d { filters, kernel } => (filters, c * kernel),
                LayerSpec::Dense { units } => (units, c * l),
                _ => unreachable!("only conv and dense layers hold parameters"),
            };
            let limit = 1.0 / (fan_in as f64).sqrt();
            let w = Array2::from_shape_simple_fn((out, fan_in), || rng.random_range(-limit..limit));
            let b = Array1::from_shape_simple_fn(out, || rng.random_range(-limit..limit));
            net.params.push(Param { w, b });
        }
        Ok(net)
    }

    fn shaped(layers: &[LayerSpec], input_len: usize) -> Result<Self> {
        if input_len == 0 {
            return Err(Error::config("network input must be non-empty"));
        }
        let mut shapes = vec![(1, input_len)];
        let mut slots = Vec::with_capacity(layers.len());
        let mut count = 0;
        for spec in layers {
            let (c, l) = *shapes.last().expect("non-empty");
            let next = match *spec {
                LayerSpec::Conv1d { filters, kernel } => {
                    if l < kernel {
                        return Err(Error::config(format!(
                            "sequence of length {l} is shorter than kernel {kernel}"
                        )));
                    }
                    (filters, l - kernel + 1)
                }
                LayerSpec::Dense { units } => (1, units),
                LayerSpec::MaxPool { size } => {
                    if l < size {
                        return Err(Error::config(format!("sequence of length {l} cannot pool by {size}")));
                    }
                    (c, l / size)
                }
                LayerSpec::Flatten => (1, c * l),
                LayerSpec::Relu | LayerSpec::Dropout { .. } => (c, l),
            };
            if matches!(spec, LayerSpec::Conv1d { .. } | LayerSpec::Dense { .. }) {
                slots.push(Some(count));
                count += 1;
            } else {
                slots.push(None);
            }
            shapes.push(next);
        }
        if shapes.last() != Some(&(1, 2)) {
            return Err(Error::config("network must end in a two-unit layer"));
        }
        Ok(Network {
            layers: layers.to_vec(),
            shapes,
            slots,
            params: Vec::with_capacity(count),
        })
    }

    /// Rebuilds a network from stored parameters.
    pub fn from_params(layers: &[LayerSpec], input_len: usize, params: Vec<Param>) -> Result<Self> {
        let mut net = Self::shaped(layers, input_len)?;
        let template = Self::new(layers, input_len, 0)?;
        if params.len() != template.params.len()
            || params
                .iter()
                .zip(&template.params)
                .any(|(p, t)| p.w.dim() != t.w.dim() || p.b.len() != t.b.len())
        {
            return Err(Error::ModelFormat("parameter shapes do not match the architecture".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn input_len(&self) -> usize {
        self.shapes[0].1
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    fn forward(&self, x: &Array2<f64>, mut dropout: Option<&mut ChaCha8Rng>, caches: Option<&mut Vec<Cache>>) -> Array2<f64> {
        let mut keep = caches;
        let mut a = x.clone();
        for (i, spec) in self.layers.iter().enumerate() {
            let (c, l) = self.shapes[i];
            let (oc, ol) = self.shapes[i + 1];
            let (next, cache) = match *spec {
                LayerSpec::Conv1d { kernel, .. } => {
                    let p = &self.params[self.slots[i].expect("conv slot")];
                    let cols = im2col(&a, c, l, kernel, ol);
                    let y = p.w.dot(&cols);
                    let out = from_channel_blocks(&y, &p.b, a.nrows(), oc, ol);
                    (out, Cache::Conv(cols))
                }
                LayerSpec::Dense { .. } => {
                    let p = &self.params[self.slots[i].expect("dense slot")];
                    let out = a.dot(&p.w.t()) + &p.b;
                    (out, Cache::Dense(a))
                }
                LayerSpec::Relu => {
                    let out = a.mapv(|v| v.max(0.0));
                    let cache = if keep.is_some() { Cache::Relu(out.clone()) } else { Cache::None };
                    (out, cache)
                }
                LayerSpec::MaxPool { size } => {
                    let (out, arg) = max_pool(&a, c, l, size, ol);
                    (out, Cache::Pool(arg))
                }
                LayerSpec::Dropout { rate } => match dropout.as_deref_mut() {
                    Some(rng) if rate > 0.0 => {
                        let scale = 1.0 / (1.0 - rate);
                        let mask = Array2::from_shape_simple_fn(a.raw_dim(), || {
                            if rng.random::<f64>() >= rate {
                                scale
                            } else {
                                0.0
                            }
                        });
                        (&a * &mask, Cache::Dropout(mask))
                    }
                    _ => (a, Cache::None),
                },
                LayerSpec::Flatten => (a, Cache::None),
            };
            if let Some(k) = keep.as_deref_mut() {
                k.push(cache);
            }
            a = next;
        }
        a
    }

    /// Logits for a batch of rows, dropout off.
    pub fn logits(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(self.forward(x, None, None))
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_len() {
            return Err(Error::invalid(format!(
                "input of width {} for a network expecting {}",
                x.ncols(),
                self.input_len()
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy over the batch, dropout off.
    pub fn loss(&self, x: &Array2<f64>, y: &[u8]) -> Result<f64> {
        self.check_input(x)?;
        let logits = self.forward(x, None, None);
        Ok(cross_entropy(&logits, y).0)
    }

    /// Loss and parameter gradients for one batch. Dropout applies when
    /// `dropout` is given.
    pub fn loss_and_grads(&self, x: &Array2<f64>, y: &[u8], dropout: Option<&mut ChaCha8Rng>) -> Result<(f64, Array2<f64>, Vec<Param>)> {
        self.check_input(x)?;
        if y.len() != x.nrows() {
            return Err(Error::invalid("label count does not match batch size"));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let logits = self.forward(x, dropout, Some(&mut caches));
        let (loss, mut grad) = cross_entropy(&logits, y);
        let mut grads: Vec<Param> = self.params.iter().map(Param::zeros_like).collect();
        for (i, spec) in self.layers.iter().enumerate().rev() {
            let (c, l) = self.shapes[i];
            let (oc, ol) = self.shapes[i + 1];
            let cache = caches.pop().expect("one cache per layer");
            grad = match (spec, cache) {
                (LayerSpec::Conv1d { kernel, .. }, Cache::Conv(cols)) => {
                    let slot = self.slots[i].expect("conv slot");
                    let dy = to_channel_blocks(&grad, oc, ol);
                    grads[slot].w = dy.dot(&cols.t());
                    grads[slot].b = dy.sum_axis(Axis(1));
                    let dcols = self.params[slot].w.t().dot(&dy);
                    col2im(&dcols, grad.nrows(), c, l, *kernel, ol)
                }
                (LayerSpec::Dense { .. }, Cache::Dense(input)) => {
                    let slot = self.slots[i].expect("dense slot");
                    grads[slot].w = grad.t().dot(&input);
                    grads[slot].b = grad.sum_axis(Axis(0));
                    grad.dot(&self.params[slot].w)
                }
                (LayerSpec::Relu, Cache::Relu(out)) => {
                    ndarray::Zip::from(&mut grad).and(&out).for_each(|g, &o| {
                        if o <= 0.0 {
                            *g = 0.0;
                        }
                    });
                    grad
                }
                (LayerSpec::MaxPool { .. }, Cache::Pool(arg)) => {
                    let mut dx = Array2::zeros((grad.nrows(), c * l));
                    for (b, (g, mut d)) in grad.outer_iter().zip(dx.outer_iter_mut()).enumerate() {
                        let arg = &arg[b * oc * ol..(b + 1) * oc * ol];
                        for (j, &src) in arg.iter().enumerate() {
                            d[src] += g[j];
                        }
                    }
                    dx
                }
                (LayerSpec::Dropout { .. }, Cache::Dropout(mask)) => grad * &mask,
                (LayerSpec::Dropout { .. } | LayerSpec::Flatten, Cache::None) => grad,
                _ => unreachable!("cache kind follows layer kind"),
            };
        }
        Ok((loss, logits, grads))
    }
}

/// `(c*k, batch*lo)` patch matrix; row `ci*k + kk`, column `b*lo + t`
/// holds `x[b, ci*l + t + kk]`.
fn im2col(x: &Array2<f64>, c: usize, l: usize, k: usize, lo: usize) -> Array2<f64> {
    let batch = x.nrows();
    let mut cols = Array2::zeros((c * k, batch * lo));
    for (b, row) in x.outer_iter().enumerate() {
        let row = row.as_slice().expect("contiguous rows");
        for ci in 0..c {
            for kk in 0..k {
                let start = ci * l + kk;
                let mut dst = cols.slice_mut(s![ci * k + kk, b * lo..(b + 1) * lo]);
                dst.as_slice_mut()
                    .expect("contiguous row")
                    .copy_from_slice(&row[start..start + lo]);
            }
        }
    }
    cols
}

fn col2im(dcols: &Array2<f64>, batch: usize, c: usize, l: usize, k: usize, lo: usize) -> Array2<f64> {
    let mut dx = Array2::zeros((batch, c * l));
    for b in 0..batch {
        let mut row = dx.row_mut(b);
        let row = row.as_slice_mut().expect("contiguous rows");
        for ci in 0..c {
            for kk in 0..k {
                let src = dcols.slice(s![ci * k + kk, b * lo..(b + 1) * lo]);
                let start = ci * l + kk;
                for (d, v) in row[start..start + lo].iter_mut().zip(src.iter()) {
                    *d += v;
                }
            }
        }
    }
    dx
}

/// `(o, batch*lo)` plus bias to `(batch, o*lo)`.
fn from_channel_blocks(y: &Array2<f64>, bias: &Array1<f64>, batch: usize, o: usize, lo: usize) -> Array2<f64> {
    let mut out = Array2::zeros((batch, o * lo));
    for b in 0..batch {
        for oi in 0..o {
            let src = y.slice(s![oi, b * lo..(b + 1) * lo]);
            let mut dst = out.slice_mut(s![b, oi * lo..(oi + 1) * lo]);
            let bv = bias[oi];
            ndarray::Zip::from(&mut dst).and(&src).for_each(|d, &v| *d = v + bv);
        }
    }
    out
}

fn to_channel_blocks(g: &Array2<f64>, o: usize, lo: usize) -> Array2<f64> {
    let batch = g.nrows();
    let mut y = Array2::zeros((o, batch * lo));
    for b in 0..batch {
        for oi in 0..o {
            y.slice_mut(s![oi, b * lo..(b + 1) * lo])
                .assign(&g.slice(s![b, oi * lo..(oi + 1) * lo]));
        }
    }
    y
}

/// Non-overlapping max pooling; the argmax (first maximum) of each output is
/// recorded as an index into its input row.
fn max_pool(x: &Array2<f64>, c: usize, l: usize, size: usize, lo: usize) -> (Array2<f64>, Vec<usize>) {
    let batch = x.nrows();
    let mut out = Array2::zeros((batch, c * lo));
    let mut arg = Vec::with_capacity(batch * c * lo);
    for b in 0..batch {
        let row = x.row(b);
        for ci in 0..c {
            for j in 0..lo {
                let base = ci * l + j * size;
                let mut best = base;
                for t in base + 1..base + size {
                    if row[t] > row[best] {
                        best = t;
                    }
                }
                out[[b, ci * lo + j]] = row[best];
                arg.push(best);
            }
        }
    }
    (out, arg)
}

/// Row-wise softmax, shifted by the row maximum.
pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.outer_iter_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    p
}

/// Mean cross-entropy and its gradient with respect to the logits.
fn cross_entropy(logits: &Array2<f64>, y: &[u8]) -> (f64, Array2<f64>) {
    let batch = logits.nrows() as f64;
    let mut grad = softmax(logits);
    let mut loss = 0.0;
    for (mut row, (&label, lrow)) in grad.outer_iter_mut().zip(y.iter().zip(logits.outer_iter())) {
        let m = lrow.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = m + lrow.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - lrow[label as usize];
        row[label as usize] -= 1.0;
        row.mapv_inplace(|v| v / batch);
    }
    (loss / batch, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
}

struct OptimizerState {
    opt: Optimizer,
    step: i32,
    m: Vec<Param>,
    v: Vec<Param>,
}

impl OptimizerState {
    fn new(opt: Optimizer, params: &[Param]) -> Self {
        let zeros = || params.iter().map(Param::zeros_like).collect();
        OptimizerState {
            opt,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    fn apply(&mut self, params: &mut [Param], grads: &[Param]) {
        self.step += 1;
        match self.opt {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    p.w.scaled_add(-lr, &g.w);
                    p.b.scaled_add(-lr, &g.b);
                }
            }
            Optimizer::Adam { lr, beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = (1.0 - beta2.powi(self.step)).sqrt();
                let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / (v.sqrt() / c2 + eps);
                };
                for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    ndarray::Zip::from(&mut p.w)
                        .and(&g.w)
                        .and(&mut m.w)
                        .and(&mut v.w)
                        .for_each(|p, &g, m, v| update(p, g, m, v));
                    ndarray::Zip::from(&mut p.b)
                        .and(&g.b)
                        .and(&mut m.b)
                        .and(&mut v.b)
                        .for_each(|p, &g, m, v| update(p, g, m, v));
                }
            }
        }
    }
}

fn gather(x: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

/// Trains a fresh network; returns it with per-epoch training loss and
/// accuracy (measured on the dropout-perturbed forward passes).
pub fn fit(spec: &NetSpec, x: &Array2<f64>, y: &[u8]) -> Result<(Network, Vec<EpochStats>)> {
    spec.validate()?;
    let mut net = Network::new(&spec.layers, x.ncols(), spec.seed)?;
    let mut state = OptimizerState::new(spec.optimizer, &net.params);
    let mut dropout_rng = rng_for(spec.seed, stream::MODEL, 1);
    let mut order_rng = rng_for(spec.seed, stream::MODEL, 2);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut history = Vec::with_capacity(spec.epochs);
    for _ in 0..spec.epochs {
        order.shuffle(&mut order_rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(spec.batch_size) {
            let xb = gather(x, batch);
            let yb: Vec<u8> = batch.iter().map(|&i| y[i]).collect();
            let (loss, logits, grads) = net.loss_and_grads(&xb, &yb, Some(&mut dropout_rng))?;
            loss_sum += loss * batch.len() as f64;
            correct += logits
                .outer_iter()
                .zip(&yb)
                .filter(|(r, &t)| u8::from(r[1] > r[0]) == t)
                .count();
            state.apply(&mut net.params, &grads);
        }
        let n = x.nrows() as f64;
        let stats = EpochStats {
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
        };
        if !stats.loss.is_finite() {
            return Err(Error::invalid("training loss diverged"));
        }
        history.push(stats);
    }
    Ok((net, history))
}

/// Largest relative error between back-propagated gradients and central
/// differences with step `1e-5` over every parameter.
pub fn gradient_check(net: &Network, x: &Array2<f64>, y: &[u8]) -> Result<f64> {
    if net
        .layers
        .iter()
        .any(|l| matches!(l, LayerSpec::Dropout { rate } if *rate > 0.0))
    {
        return Err(Error::config("gradient check needs dropout disabled"));
    }
    const STEP: f64 = 1e-5;
    let (_, _, grads) = net.loss_and_grads(x, y, None)?;
    let mut probe = net.clone();
    let mut worst = 0.0f64;
    for (slot, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let orig = probe.params[slot].get(i);
            *probe.params[slot].get_mut(i) = orig + STEP;
            let up = probe.loss(x, y)?;
            *probe.params[slot].get_mut(i) = orig - STEP;
            let down = probe.loss(x, y)?;
            *probe.params[slot].get_mut(i) = orig;
            let numeric = (up - down) / (2.0 * STEP);
            let analytic = g.get(i);
            let err = (numeric - analytic).abs() / (numeric.abs() + analytic.abs()).max(1e-6);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

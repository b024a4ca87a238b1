//! Self-contained neural networks: 3D convolutions, pooling, dense layers,
//! the Adam optimizer, and the Huber loss.
//!
//! All parameters of a [`Network`] live in one flat `Vec<f64>` in layer
//! declaration order (weights before biases within a layer). Layers only
//! describe structure and read their slice of that vector, which makes
//! optimizer state, target-network synchronization, and checkpointing plain
//! vector operations. Forward passes take `&self`; training produces
//! per-call caches and a separate flat gradient buffer, so a network can be
//! evaluated from several threads at once.

use alloc::vec;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Dense row-major tensor of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, data: vec![0.0; numel] }
    }

    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::DimensionMismatch { expected: numel, got: data.len() });
        }
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Output spatial extent of the stride-2 subsampling pool.
fn pool_out(len: usize) -> usize {
    len.div_ceil(2)
}

/// Structural description of one layer; parameters live in the network.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// 3x3x3 convolution, stride 1, zero padding 1 (shape preserving).
    Conv3d { c_in: usize, c_out: usize },
    LeakyRelu { slope: f64 },
    /// Kernel (1,1,1), stride (2,2,2): keeps every even-indexed site.
    MaxPool3d,
    Flatten,
    Linear { in_features: usize, out_features: usize },
    Dropout { p: f64 },
}

impl Layer {
    pub fn param_len(&self) -> usize {
        match *self {
            Layer::Conv3d { c_in, c_out } => c_out * c_in * 27 + c_out,
            Layer::Linear { in_features, out_features } => {
                out_features * in_features + out_features
            }
            _ => 0,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            Layer::Conv3d { c_in, .. } => c_in * 27,
            Layer::Linear { in_features, .. } => in_features,
            _ => 0,
        }
    }

    fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>> {
        match *self {
            Layer::Conv3d { c_in, c_out } => {
                if in_shape.len() != 4 || in_shape[0] != c_in {
                    return Err(Error::invalid("conv3d expects [c_in, d, h, w] input"));
                }
                Ok(vec![c_out, in_shape[1], in_shape[2], in_shape[3]])
            }
            Layer::MaxPool3d => {
                if in_shape.len() != 4 {
                    return Err(Error::invalid("maxpool3d expects a 4-d input"));
                }
                Ok(vec![
                    in_shape[0],
                    pool_out(in_shape[1]),
                    pool_out(in_shape[2]),
                    pool_out(in_shape[3]),
                ])
            }
            Layer::Flatten => Ok(vec![in_shape.iter().product()]),
            Layer::Linear { in_features, out_features } => {
                if in_shape.len() != 1 || in_shape[0] != in_features {
                    return Err(Error::invalid("linear input shape mismatch"));
                }
                Ok(vec![out_features])
            }
            Layer::LeakyRelu { .. } | Layer::Dropout { .. } => Ok(in_shape.to_vec()),
        }
    }
}

/// Per-layer forward state consumed by the backward pass.
#[derive(Debug, Clone)]
pub enum Cache {
    None,
    Input(Tensor),
    Shape(Vec<usize>),
    Mask(Vec<f64>),
}

/// Which stack of layers to build.
#[derive(Debug, Clone, PartialEq)]
pub enum Arch {
    /// Conv/LeakyReLU/MaxPool blocks, then Flatten, Dropout, and a linear
    /// head.
    Cnn3d { channels: Vec<usize> },
    /// Flatten, then Linear/LeakyReLU/Dropout blocks and a linear head.
    Fnn { hidden: Vec<usize> },
}

/// Everything needed to build a value network deterministically.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// Input shape `[channels, depth, height, width]`.
    pub input_shape: Vec<usize>,
    pub arch: Arch,
    /// Output dimension (one value per action).
    pub actions: usize,
    pub leaky_slope: f64,
    pub dropout: f64,
    /// Optional hidden linear layer between the flattened features and the
    /// output head.
    pub head_hidden: Option<usize>,
}

impl NetworkSpec {
    pub fn cnn(input_shape: Vec<usize>, channels: Vec<usize>, actions: usize) -> Self {
        NetworkSpec {
            input_shape,
            arch: Arch::Cnn3d { channels },
            actions,
            leaky_slope: 0.01,
            dropout: 0.0,
            head_hidden: None,
        }
    }

    pub fn fnn(input_shape: Vec<usize>, hidden: Vec<usize>, actions: usize) -> Self {
        NetworkSpec {
            input_shape,
            arch: Arch::Fnn { hidden },
            actions,
            leaky_slope: 0.01,
            dropout: 0.0,
            head_hidden: None,
        }
    }
}

/// A feed-forward network with flat parameter storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

impl Network {
    /// Builds and initializes a network: He-uniform weights
    /// (`limit = sqrt(6 / fan_in)`), zero biases.
    pub fn build(spec: &NetworkSpec, rng: &mut Rng) -> Result<Self> {
        if spec.input_shape.len() != 4 {
            return Err(Error::invalid("input shape must be [c, d, h, w]"));
        }
        if spec.actions == 0 {
            return Err(Error::invalid("need at least one action output"));
        }
        if !(0.0..1.0).contains(&spec.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        let mut layers = Vec::new();
        let mut shape = spec.input_shape.clone();
        match &spec.arch {
            Arch::Cnn3d { channels } => {
                if channels.is_empty() {
                    return Err(Error::invalid("cnn needs at least one channel count"));
                }
                let mut c_in = shape[0];
                for &c_out in channels {
                    layers.push(Layer::Conv3d { c_in, c_out });
                    layers.push(Layer::LeakyRelu { slope: spec.leaky_slope });
                    layers.push(Layer::MaxPool3d);
                    c_in = c_out;
                }
                layers.push(Layer::Flatten);
                layers.push(Layer::Dropout { p: spec.dropout });
            }
            Arch::Fnn { hidden } => {
                layers.push(Layer::Flatten);
                for &h in hidden {
                    let in_features = if let Some(Layer::Linear { out_features, .. }) =
                        layers.iter().rev().find(|l| matches!(l, Layer::Linear { .. }))
                    {
                        *out_features
                    } else {
                        shape.iter().product()
                    };
                    layers.push(Layer::Linear { in_features, out_features: h });
                    layers.push(Layer::LeakyRelu { slope: spec.leaky_slope });
                    layers.push(Layer::Dropout { p: spec.dropout });
                }
            }
        }
        // Head: compute the flat size by walking shapes, then append.
        for l in &layers {
            shape = l.out_shape(&shape)?;
        }
        let mut flat = shape.iter().product();
        if let Some(h) = spec.head_hidden {
            if h == 0 {
                return Err(Error::invalid("head hidden width must be positive"));
            }
            layers.push(Layer::Linear { in_features: flat, out_features: h });
            layers.push(Layer::LeakyRelu { slope: spec.leaky_slope });
            flat = h;
        }
        layers.push(Layer::Linear { in_features: flat, out_features: spec.actions });

        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0usize;
        for l in &layers {
            offsets.push(total);
            total += l.param_len();
        }
        let mut params = vec![0.0; total];
        for (l, &off) in layers.iter().zip(offsets.iter()) {
            let plen = l.param_len();
            if plen == 0 {
                continue;
            }
            let limit = (6.0 / l.fan_in() as f64).sqrt();
            let weight_len = plen - bias_len(l);
            for w in &mut params[off..off + weight_len] {
                *w = rng.next_range(-limit, limit);
            }
            // Biases stay zero.
        }
        Ok(Network { spec: spec.clone(), layers, offsets, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Copies all parameters from a structurally identical network.
    pub fn sync_from(&mut self, other: &Network) -> Result<()> {
        if self.params.len() != other.params.len() || self.layers != other.layers {
            return Err(Error::invalid("cannot sync structurally different networks"));
        }
        self.params.copy_from_slice(&other.params);
        Ok(())
    }

    /// Inference pass; dropout is inactive.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (out, _) = self.run(input, false, &mut None)?;
        Ok(out)
    }

    /// Training pass: keeps per-layer caches and applies dropout with `rng`.
    pub fn forward_train(&self, input: &Tensor, rng: &mut Rng) -> Result<(Tensor, Vec<Cache>)> {
        let mut rng_opt = Some(rng);
        self.run(input, true, &mut rng_opt)
    }

    fn run(
        &self,
        input: &Tensor,
        train: bool,
        rng: &mut Option<&mut Rng>,
    ) -> Result<(Tensor, Vec<Cache>)> {
        if input.shape() != self.spec.input_shape.as_slice() {
            return Err(Error::invalid("network input shape mismatch"));
        }
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (l, &off) in self.layers.iter().zip(self.offsets.iter()) {
            let p = &self.params[off..off + l.param_len()];
            let (out, cache) = self.layer_forward(l, p, &x, train, rng)?;
            debug_assert!(out.is_finite(), "non-finite activation after {l:?}");
            caches.push(cache);
            x = out;
        }
        Ok((x, caches))
    }

    fn layer_forward(
        &self,
        layer: &Layer,
        p: &[f64],
        x: &Tensor,
        train: bool,
        rng: &mut Option<&mut Rng>,
    ) -> Result<(Tensor, Cache)> {
        match *layer {
            Layer::Conv3d { c_in, c_out } => {
                let out_shape = layer.out_shape(x.shape())?;
                let (d, h, w) = (x.shape()[1], x.shape()[2], x.shape()[3]);
                let mut out = Tensor::zeros(out_shape);
                conv3d_forward(p, x.data(), out.data_mut(), c_in, c_out, d, h, w);
                Ok((out, Cache::Input(x.clone())))
            }
            Layer::LeakyRelu { slope } => {
                let mut out = x.clone();
                for v in out.data_mut() {
                    if *v < 0.0 {
                        *v *= slope;
                    }
                }
                Ok((out, Cache::Input(x.clone())))
            }
            Layer::MaxPool3d => {
                let out_shape = layer.out_shape(x.shape())?;
                let (c, d, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
                let (od, oh, ow) = (pool_out(d), pool_out(h), pool_out(w));
                let mut out = Tensor::zeros(out_shape);
                for ci in 0..c {
                    for z in 0..od {
                        for y in 0..oh {
                            for xx in 0..ow {
                                let src = ((ci * d + 2 * z) * h + 2 * y) * w + 2 * xx;
                                let dst = ((ci * od + z) * oh + y) * ow + xx;
                                out.data_mut()[dst] = x.data()[src];
                            }
                        }
                    }
                }
                Ok((out, Cache::Shape(x.shape().to_vec())))
            }
            Layer::Flatten => {
                let out = Tensor::from_vec(vec![x.numel()], x.data().to_vec())?;
                Ok((out, Cache::Shape(x.shape().to_vec())))
            }
            Layer::Linear { in_features, out_features } => {
                let weights = &p[..out_features * in_features];
                let bias = &p[out_features * in_features..];
                let mut out = Tensor::zeros(vec![out_features]);
                for o in 0..out_features {
                    let row = &weights[o * in_features..(o + 1) * in_features];
                    let mut acc = bias[o];
                    for (wv, xv) in row.iter().zip(x.data()) {
                        acc += wv * xv;
                    }
                    out.data_mut()[o] = acc;
                }
                Ok((out, Cache::Input(x.clone())))
            }
            Layer::Dropout { p: drop_p } => {
                if !train || drop_p == 0.0 {
                    // Identity; no randomness consumed.
                    return Ok((x.clone(), Cache::None));
                }
                let rng = rng
                    .as_deref_mut()
                    .ok_or_else(|| Error::invalid("dropout requires an rng in training"))?;
                let keep = 1.0 - drop_p;
                let mut mask = Vec::with_capacity(x.numel());
                let mut out = x.clone();
                for v in out.data_mut() {
                    let m = if rng.next_f64() < keep { 1.0 / keep } else { 0.0 };
                    mask.push(m);
                    *v *= m;
                }
                Ok((out, Cache::Mask(mask)))
            }
        }
    }

    /// Backpropagates `grad_out` through the cached forward pass,
    /// accumulating parameter gradients into `grads` (a buffer of
    /// [`Network::param_count`] length).
    pub fn backward(
        &self,
        caches: &[Cache],
        grad_out: &Tensor,
        grads: &mut [f64],
    ) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: grads.len(),
            });
        }
        if caches.len() != self.layers.len() {
            return Err(Error::invalid("cache count does not match layer count"));
        }
        let mut g = grad_out.clone();
        for ((l, &off), cache) in
            self.layers.iter().zip(self.offsets.iter()).zip(caches.iter()).rev()
        {
            let p = &self.params[off..off + l.param_len()];
            g = self.layer_backward(l, p, cache, &g, &mut grads[off..off + l.param_len()])?;
        }
        Ok(())
    }

    fn layer_backward(
        &self,
        layer: &Layer,
        p: &[f64],
        cache: &Cache,
        grad_out: &Tensor,
        grad_p: &mut [f64],
    ) -> Result<Tensor> {
        match (layer, cache) {
            (&Layer::Conv3d { c_in, c_out }, Cache::Input(x)) => {
                let (d, h, w) = (x.shape()[1], x.shape()[2], x.shape()[3]);
                let mut grad_in = Tensor::zeros(x.shape().to_vec());
                conv3d_backward(
                    p,
                    x.data(),
                    grad_out.data(),
                    grad_in.data_mut(),
                    grad_p,
                    c_in,
                    c_out,
                    d,
                    h,
                    w,
                );
                Ok(grad_in)
            }
            (&Layer::LeakyRelu { slope }, Cache::Input(x)) => {
                let mut g = grad_out.clone();
                for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
                    if *xv < 0.0 {
                        *gv *= slope;
                    }
                }
                Ok(g)
            }
            (&Layer::MaxPool3d, Cache::Shape(in_shape)) => {
                let (c, d, h, w) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
                let (od, oh, ow) = (pool_out(d), pool_out(h), pool_out(w));
                let mut grad_in = Tensor::zeros(in_shape.clone());
                for ci in 0..c {
                    for z in 0..od {
                        for y in 0..oh {
                            for xx in 0..ow {
                                let src = ((ci * od + z) * oh + y) * ow + xx;
                                let dst = ((ci * d + 2 * z) * h + 2 * y) * w + 2 * xx;
                                grad_in.data_mut()[dst] = grad_out.data()[src];
                            }
                        }
                    }
                }
                Ok(grad_in)
            }
            (&Layer::Flatten, Cache::Shape(in_shape)) => {
                Tensor::from_vec(in_shape.clone(), grad_out.data().to_vec())
            }
            (&Layer::Linear { in_features, out_features }, Cache::Input(x)) => {
                let weights = &p[..out_features * in_features];
                let (gw, gb) = grad_p.split_at_mut(out_features * in_features);
                let mut grad_in = Tensor::zeros(vec![in_features]);
                for o in 0..out_features {
                    let go = grad_out.data()[o];
                    gb[o] += go;
                    let wrow = &weights[o * in_features..(o + 1) * in_features];
                    let grow = &mut gw[o * in_features..(o + 1) * in_features];
                    for i in 0..in_features {
                        grow[i] += go * x.data()[i];
                        grad_in.data_mut()[i] += go * wrow[i];
                    }
                }
                Ok(grad_in)
            }
            (&Layer::Dropout { .. }, Cache::None) => Ok(grad_out.clone()),
            (&Layer::Dropout { .. }, Cache::Mask(mask)) => {
                let mut g = grad_out.clone();
                for (gv, m) in g.data_mut().iter_mut().zip(mask.iter()) {
                    *gv *= m;
                }
                Ok(g)
            }
            _ => Err(Error::invalid("cache does not match layer")),
        }
    }
}

fn bias_len(layer: &Layer) -> usize {
    match *layer {
        Layer::Conv3d { c_out, .. } => c_out,
        Layer::Linear { out_features, .. } => out_features,
        _ => 0,
    }
}

#[allow(clippy::too_many_arguments)]
fn conv3d_forward(
    p: &[f64],
    x: &[f64],
    out: &mut [f64],
    c_in: usize,
    c_out: usize,
    d: usize,
    h: usize,
    w: usize,
) {
    let weights = &p[..c_out * c_in * 27];
    let bias = &p[c_out * c_in * 27..];
    for o in 0..c_out {
        let out_base = o * d * h * w;
        for v in &mut out[out_base..out_base + d * h * w] {
            *v = bias[o];
        }
        for i in 0..c_in {
            let k_base = (o * c_in + i) * 27;
            let in_base = i * d * h * w;
            for kz in 0..3usize {
                for ky in 0..3usize {
                    for kx in 0..3usize {
                        let wv = weights[k_base + (kz * 3 + ky) * 3 + kx];
                        if wv == 0.0 {
                            continue;
                        }
                        // Output site (z, y, x) reads input
                        // (z + kz - 1, y + ky - 1, x + kx - 1).
                        let z_lo = 1usize.saturating_sub(kz);
                        let z_hi = d.min(d + 1 - kz);
                        let y_lo = 1usize.saturating_sub(ky);
                        let y_hi = h.min(h + 1 - ky);
                        let x_lo = 1usize.saturating_sub(kx);
                        let x_hi = w.min(w + 1 - kx);
                        for z in z_lo..z_hi {
                            let iz = z + kz - 1;
                            for y in y_lo..y_hi {
                                let iy = y + ky - 1;
                                let orow = out_base + (z * h + y) * w;
                                let irow = in_base + (iz * h + iy) * w;
                                for xx in x_lo..x_hi {
                                    out[orow + xx] += wv * x[irow + xx + kx - 1];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv3d_backward(
    p: &[f64],
    x: &[f64],
    grad_out: &[f64],
    grad_in: &mut [f64],
    grad_p: &mut [f64],
    c_in: usize,
    c_out: usize,
    d: usize,
    h: usize,
    w: usize,
) {
    let weights = &p[..c_out * c_in * 27];
    let (gw, gb) = grad_p.split_at_mut(c_out * c_in * 27);
    for o in 0..c_out {
        let out_base = o * d * h * w;
        gb[o] += grad_out[out_base..out_base + d * h * w].iter().sum::<f64>();
        for i in 0..c_in {
            let k_base = (o * c_in + i) * 27;
            let in_base = i * d * h * w;
            for kz in 0..3usize {
                for ky in 0..3usize {
                    for kx in 0..3usize {
                        let wv = weights[k_base + (kz * 3 + ky) * 3 + kx];
                        let mut gwv = 0.0;
                        let z_lo = 1usize.saturating_sub(kz);
                        let z_hi = d.min(d + 1 - kz);
                        let y_lo = 1usize.saturating_sub(ky);
                        let y_hi = h.min(h + 1 - ky);
                        let x_lo = 1usize.saturating_sub(kx);
                        let x_hi = w.min(w + 1 - kx);
                        for z in z_lo..z_hi {
                            let iz = z + kz - 1;
                            for y in y_lo..y_hi {
                                let iy = y + ky - 1;
                                let orow = out_base + (z * h + y) * w;
                                let irow = in_base + (iz * h + iy) * w;
                                for xx in x_lo..x_hi {
                                    let go = grad_out[orow + xx];
                                    gwv += go * x[irow + xx + kx - 1];
                                    grad_in[irow + xx + kx - 1] += go * wv;
                                }
                            }
                        }
                        gw[k_base + (kz * 3 + ky) * 3 + kx] += gwv;
                    }
                }
            }
        }
    }
}

/// Huber loss with threshold `delta` on one residual.
pub fn huber(residual: f64, delta: f64) -> f64 {
    let a = residual.abs();
    if a <= delta {
        0.5 * residual * residual
    } else {
        delta * (a - 0.5 * delta)
    }
}

/// Derivative of [`huber`] with respect to the residual.
pub fn huber_grad(residual: f64, delta: f64) -> f64 {
    residual.clamp(-delta, delta)
}

/// Adam optimizer state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, param_count: usize) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// First and second moment buffers, for checkpointing.
    pub fn state(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn restore(&mut self, step: u64, m: Vec<f64>, v: Vec<f64>) -> Result<()> {
        if m.len() != self.m.len() || v.len() != self.v.len() {
            return Err(Error::DimensionMismatch { expected: self.m.len(), got: m.len() });
        }
        self.step = step;
        self.m = m;
        self.v = v;
        Ok(())
    }

    /// One bias-corrected update of `params` along `grads`.
    pub fn apply(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                got: params.len().max(grads.len()),
            });
        }
        self.step += 1;
        let b1t = 1.0 - self.beta1.powi(self.step as i32);
        let b2t = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cnn_spec() -> NetworkSpec {
        NetworkSpec::cnn(vec![1, 4, 3, 2], vec![2, 3], 5)
    }

    #[test]
    fn cnn_shape_walk_matches_hand_computation() {
        // (4,3,2) -> pool -> (2,2,1) -> pool -> (1,1,1); flatten = 3.
        let mut rng = Rng::new(1);
        let net = Network::build(&small_cnn_spec(), &mut rng).unwrap();
        let x = Tensor::zeros(vec![1, 4, 3, 2]);
        let y = net.forward(&x).unwrap();
        assert_eq!(y.shape(), &[5]);
        // Parameter count: conv1 2*1*27+2 = 56, conv2 3*2*27+3 = 165,
        // head 5*3+5 = 20.
        assert_eq!(net.param_count(), 56 + 165 + 20);
    }

    #[test]
    fn production_shape_walk() {
        // (30,7,4) -> (15,4,2) -> (8,2,1) -> (4,1,1) -> (2,1,1);
        // flatten = 256 * 2 = 512.
        let spec = NetworkSpec::cnn(vec![1, 30, 7, 4], vec![32, 64, 128, 256], 18);
        let mut rng = Rng::new(2);
        let net = Network::build(&spec, &mut rng).unwrap();
        let head = net.layers().last().unwrap();
        assert_eq!(*head, Layer::Linear { in_features: 512, out_features: 18 });
        let y = net.forward(&Tensor::zeros(vec![1, 30, 7, 4])).unwrap();
        assert_eq!(y.shape(), &[18]);
    }

    #[test]
    fn zero_input_gives_zero_output_with_zero_biases() {
        // Biases start at zero, so a zero input maps to zero through convs
        // and the linear head.
        let mut rng = Rng::new(3);
        let net = Network::build(&small_cnn_spec(), &mut rng).unwrap();
        let y = net.forward(&Tensor::zeros(vec![1, 4, 3, 2])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_respects_he_uniform_limits() {
        let spec = NetworkSpec::cnn(vec![1, 8, 7, 4], vec![4], 7);
        let mut rng = Rng::new(4);
        let net = Network::build(&spec, &mut rng).unwrap();
        // First conv: fan_in 27, limit sqrt(6/27).
        let limit = (6.0 / 27.0_f64).sqrt();
        let conv_w = &net.params()[..4 * 27];
        assert!(conv_w.iter().all(|w| w.abs() <= limit));
        assert!(conv_w.iter().any(|w| w.abs() > 0.5 * limit));
        // Conv bias all zero.
        assert!(net.params()[4 * 27..4 * 27 + 4].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn forward_is_deterministic_and_thread_safe_by_construction() {
        let mut rng = Rng::new(5);
        let net = Network::build(&small_cnn_spec(), &mut rng).unwrap();
        let mut x = Tensor::zeros(vec![1, 4, 3, 2]);
        for (i, v) in x.data_mut().iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn leaky_relu_values() {
        let spec = NetworkSpec {
            input_shape: vec![1, 1, 1, 2],
            arch: Arch::Fnn { hidden: vec![] },
            actions: 2,
            leaky_slope: 0.01,
            dropout: 0.0,
            head_hidden: None,
        };
        let mut rng = Rng::new(6);
        let net = Network::build(&spec, &mut rng).unwrap();
        // Architecture is Flatten -> Linear(2 -> 2); apply LeakyReLU
        // manually through a layer to check the elementwise rule.
        let l = Layer::LeakyRelu { slope: 0.01 };
        let x = Tensor::from_vec(vec![2], vec![-3.0, 2.0]).unwrap();
        let (y, _) = net.layer_forward(&l, &[], &x, false, &mut None).unwrap();
        assert_eq!(y.data(), &[-0.03, 2.0]);
    }

    #[test]
    fn pool_subsamples_even_sites() {
        let mut rng = Rng::new(7);
        let net = Network::build(&small_cnn_spec(), &mut rng).unwrap();
        let l = Layer::MaxPool3d;
        let x = Tensor::from_vec(
            vec![1, 2, 3, 2],
            (0..12).map(|i| i as f64).collect(),
        )
        .unwrap();
        let (y, _) = net.layer_forward(&l, &[], &x, false, &mut None).unwrap();
        // Keeps (z, y, x) = (0, 0, 0) and (0, 2, 0): flat indices 0 and 4.
        assert_eq!(y.shape(), &[1, 1, 2, 1]);
        assert_eq!(y.data(), &[0.0, 4.0]);
    }

    fn numeric_grad_check(spec: &NetworkSpec, tol: f64) {
        let mut rng = Rng::new(8);
        let mut net = Network::build(spec, &mut rng).unwrap();
        let mut x = Tensor::zeros(spec.input_shape.clone());
        for (i, v) in x.data_mut().iter_mut().enumerate() {
            *v = ((i * 7 + 3) as f64 * 0.61).sin();
        }
        // Scalar loss: weighted sum of outputs, so dL/dy is fixed.
        let coeffs: Vec<f64> = (0..spec.actions).map(|i| 0.5 + 0.25 * i as f64).collect();
        let loss = |net: &Network| -> f64 {
            let y = net.forward(&x).unwrap();
            y.data().iter().zip(&coeffs).map(|(a, b)| a * b).sum()
        };
        let (_, caches) = {
            let mut r = Rng::new(9);
            net.forward_train(&x, &mut r).unwrap()
        };
        let grad_out = Tensor::from_vec(vec![spec.actions], coeffs.clone()).unwrap();
        let mut grads = vec![0.0; net.param_count()];
        net.backward(&caches, &grad_out, &mut grads).unwrap();
        let h = 1e-5;
        // Probe a spread of parameters rather than all of them.
        let stride = (net.param_count() / 97).max(1);
        for k in (0..net.param_count()).step_by(stride) {
            let orig = net.params()[k];
            net.params_mut()[k] = orig + h;
            let lp = loss(&net);
            net.params_mut()[k] = orig - h;
            let lm = loss(&net);
            net.params_mut()[k] = orig;
            let numeric = (lp - lm) / (2.0 * h);
            let analytic = grads[k];
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            assert!(
                (numeric - analytic).abs() / denom < tol,
                "param {k}: numeric {numeric} vs analytic {analytic}"
            );
        }
    }

    #[test]
    fn gradient_check_small_cnn() {
        numeric_grad_check(&small_cnn_spec(), 1e-4);
    }

    #[test]
    fn gradient_check_fnn() {
        let spec = NetworkSpec::fnn(vec![1, 3, 3, 2], vec![10, 6], 4);
        numeric_grad_check(&spec, 1e-4);
    }

    #[test]
    fn hidden_head_shapes_and_gradients() {
        let mut spec = small_cnn_spec();
        spec.head_hidden = Some(7);
        let mut rng = Rng::new(14);
        let net = Network::build(&spec, &mut rng).unwrap();
        // Conv stack flattens to 3 features; the head becomes
        // Linear(3, 7) + LeakyReLU + Linear(7, 5).
        assert_eq!(net.param_count(), 56 + 165 + (7 * 3 + 7) + (5 * 7 + 5));
        let y = net.forward(&Tensor::zeros(vec![1, 4, 3, 2])).unwrap();
        assert_eq!(y.shape(), &[5]);
        numeric_grad_check(&spec, 1e-4);
    }

    #[test]
    fn dropout_zero_is_identity_and_consumes_no_randomness() {
        let mut rng = Rng::new(10);
        let net = Network::build(&small_cnn_spec(), &mut rng).unwrap();
        let mut x = Tensor::zeros(vec![1, 4, 3, 2]);
        x.data_mut()[3] = 1.0;
        let mut train_rng = Rng::new(11);
        let before = train_rng.position();
        let (y_train, _) = net.forward_train(&x, &mut train_rng).unwrap();
        assert_eq!(train_rng.position(), before);
        let y_eval = net.forward(&x).unwrap();
        assert_eq!(y_train, y_eval);
    }

    #[test]
    fn dropout_masks_and_rescales() {
        let spec = NetworkSpec {
            input_shape: vec![1, 1, 1, 4],
            arch: Arch::Fnn { hidden: vec![8] },
            actions: 2,
            leaky_slope: 0.01,
            dropout: 0.5,
            head_hidden: None,
        };
        let mut rng = Rng::new(12);
        let net = Network::build(&spec, &mut rng).unwrap();
        let x = Tensor::from_vec(vec![1, 1, 1, 4], vec![1.0, -0.5, 0.3, 2.0]).unwrap();
        let mut train_rng = Rng::new(13);
        let (y1, _) = net.forward_train(&x, &mut train_rng).unwrap();
        let (y2, _) = net.forward_train(&x, &mut train_rng).unwrap();
        // With p = 0.5 two passes almost surely differ.
        assert_ne!(y1, y2);
        // Inference stays deterministic.
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }

    #[test]
    fn sync_copies_parameters() {
        let mut rng = Rng::new(14);
        let a = Network::build(&small_cnn_spec(), &mut rng).unwrap();
        let mut b = Network::build(&small_cnn_spec(), &mut rng).unwrap();
        assert_ne!(a.params(), b.params());
        b.sync_from(&a).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn huber_values_and_gradient() {
        assert_eq!(huber(0.5, 1.0), 0.125);
        assert_eq!(huber(-0.5, 1.0), 0.125);
        assert_eq!(huber(2.0, 1.0), 1.5);
        assert_eq!(huber(-3.0, 1.0), 2.5);
        assert_eq!(huber_grad(0.5, 1.0), 0.5);
        assert_eq!(huber_grad(2.0, 1.0), 1.0);
        assert_eq!(huber_grad(-2.0, 1.0), -1.0);
        // Continuity at the threshold.
        let eps = 1e-9;
        assert!((huber(1.0 + eps, 1.0) - huber(1.0 - eps, 1.0)).abs() < 1e-8);
    }

    #[test]
    fn adam_matches_hand_computed_first_step() {
        let mut adam = Adam::new(0.1, 2);
        let mut params = vec![1.0, -2.0];
        let grads = vec![0.5, -1.5];
        adam.apply(&mut params, &grads).unwrap();
        // After one step mhat = g, vhat = g^2, so the update is
        // -lr * g / (|g| + eps) = -lr * sign(g) (up to eps).
        let expect0 = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
        let expect1 = -2.0 + 0.1 * 1.5 / (1.5 + 1e-8);
        assert!((params[0] - expect0).abs() < 1e-12);
        assert!((params[1] - expect1).abs() < 1e-12);
    }

    #[test]
    fn adam_converges_on_quadratic() {
        let mut adam = Adam::new(0.05, 3);
        let target = [0.3, -1.2, 2.0];
        let mut p = vec![0.0; 3];
        for _ in 0..2000 {
            let g: Vec<f64> = p.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            adam.apply(&mut p, &g).unwrap();
        }
        for (a, b) in p.iter().zip(&target) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut rng = Rng::new(15);
        let mut s = small_cnn_spec();
        s.actions = 0;
        assert!(Network::build(&s, &mut rng).is_err());
        let mut s2 = small_cnn_spec();
        s2.dropout = 1.0;
        assert!(Network::build(&s2, &mut rng).is_err());
        let s3 = NetworkSpec::cnn(vec![1, 4, 3, 2], vec![], 2);
        assert!(Network::build(&s3, &mut rng).is_err());
    }
}

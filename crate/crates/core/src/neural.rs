//! Feed-forward networks with exact reverse-mode gradients, Adam, central
//! finite-difference gradient checking and a versioned binary checkpoint
//! format.
//!
//! Everything is `f64`. Batches are row-major `rows × features` matrices and
//! all dense products go through `matrixmultiply::dgemm`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    pub fn tag(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Linear => 2,
        }
    }

    pub fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output `y`.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

/// Row-major real matrix; one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Batch {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "Batch::new",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_row(row: &[f64]) -> Self {
        Self {
            rows: 1,
            cols: row.len(),
            data: row.to_vec(),
        }
    }

    /// Stacks equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Shape {
                    op: "Batch::from_rows",
                    left: (1, r.len()),
                    right: (1, cols),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Horizontal concatenation `[a | b]`.
    pub fn hcat(a: &Batch, b: &Batch) -> Result<Self> {
        if a.rows != b.rows {
            return Err(Error::Shape {
                op: "Batch::hcat",
                left: (a.rows, a.cols),
                right: (b.rows, b.cols),
            });
        }
        let cols = a.cols + b.cols;
        let mut data = Vec::with_capacity(a.rows * cols);
        for r in 0..a.rows {
            data.extend_from_slice(a.row(r));
            data.extend_from_slice(b.row(r));
        }
        Ok(Self {
            rows: a.rows,
            cols,
            data,
        })
    }

    /// Columns `start..end` as a new batch.
    pub fn columns(&self, start: usize, end: usize) -> Batch {
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Batch {
            rows: self.rows,
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn forward(&self, x: &Batch) -> Batch {
        let mut z = Batch::zeros(x.rows, self.outputs);
        for r in 0..x.rows {
            z.row_mut(r).copy_from_slice(&self.bias);
        }
        // z += x · Wᵀ
        unsafe {
            matrixmultiply::dgemm(
                x.rows,
                self.inputs,
                self.outputs,
                1.0,
                x.data.as_ptr(),
                self.inputs as isize,
                1,
                self.weights.as_ptr(),
                1,
                self.inputs as isize,
                1.0,
                z.data.as_mut_ptr(),
                self.outputs as isize,
                1,
            );
        }
        if self.activation != Activation::Linear {
            let act = self.activation;
            z.data.iter_mut().for_each(|v| *v = act.apply(*v));
        }
        z
    }
}

/// Per-layer description used to build a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub outputs: usize,
    pub activation: Activation,
}

/// A chain of dense layers.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Layer>,
    /// Bumped on every parameter mutation; lets `backward` reject caches
    /// produced before an update.
    version: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("Mlp::from_layers"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Shape {
                    op: "Mlp layer chain",
                    left: (i, pair[0].outputs),
                    right: (i + 1, pair[1].inputs),
                });
            }
        }
        for l in &layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::Shape {
                    op: "Mlp layer parameters",
                    left: (l.outputs, l.inputs),
                    right: (l.weights.len(), l.bias.len()),
                });
            }
        }
        Ok(Self { layers, version: 0 })
    }

    /// Uniform `±1/sqrt(fan_in)` initialisation. When `final_range` is set,
    /// the last layer is drawn from `±final_range` instead.
    pub fn init(
        inputs: usize,
        specs: &[LayerSpec],
        final_range: Option<f64>,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if inputs == 0 || specs.is_empty() || specs.iter().any(|s| s.outputs == 0) {
            return Err(Error::Empty("Mlp::init"));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut fan_in = inputs;
        for (i, spec) in specs.iter().enumerate() {
            let range = match final_range {
                Some(r) if i + 1 == specs.len() => r,
                _ => 1.0 / (fan_in as f64).sqrt(),
            };
            let mut layer = Layer::zeros(fan_in, spec.outputs, spec.activation);
            for w in layer.weights.iter_mut() {
                *w = rng.random_range(-range..=range);
            }
            for b in layer.bias.iter_mut() {
                *b = rng.random_range(-range..=range);
            }
            layers.push(layer);
            fan_in = spec.outputs;
        }
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn is_congruent(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.inputs == b.inputs && a.outputs == b.outputs && a.activation == b.activation
            })
    }

    fn touch(&mut self) {
        self.version = self.version.wrapping_add(1);
    }

    /// Parameters in canonical order: layer by layer, weights then biases.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Shape {
                op: "Mlp::set_flat_params",
                left: (params.len(), 1),
                right: (self.param_count(), 1),
            });
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[offset..offset + nb]);
            offset += nb;
        }
        self.touch();
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Hash of the exact parameter bits.
    pub fn param_hash(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for l in &self.layers {
            l.inputs.hash(&mut h);
            l.outputs.hash(&mut h);
            l.activation.hash(&mut h);
            for v in l.weights.iter().chain(&l.bias) {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    pub fn forward_batch(&self, x: &Batch) -> Result<(Batch, ForwardCache)> {
        if x.cols != self.input_dim() {
            return Err(Error::Shape {
                op: "Mlp::forward",
                left: (x.rows, x.cols),
                right: (x.rows, self.input_dim()),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let y = layer.forward(activations.last().expect("non-empty"));
            activations.push(y);
        }
        let y = activations.last().expect("non-empty").clone();
        Ok((
            y,
            ForwardCache {
                version: self.version,
                shapes: self.shapes(),
                activations,
            },
        ))
    }

    /// Forward pass without keeping intermediate activations.
    pub fn predict_batch(&self, x: &Batch) -> Result<Batch> {
        if x.cols != self.input_dim() {
            return Err(Error::Shape {
                op: "Mlp::predict",
                left: (x.rows, x.cols),
                right: (x.rows, self.input_dim()),
            });
        }
        let mut y = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            y = layer.forward(&y);
        }
        Ok(y)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let (y, cache) = self.forward_batch(&Batch::from_row(x))?;
        Ok((y.into_data(), cache))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_batch(&Batch::from_row(x))?.into_data())
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|l| (l.inputs, l.outputs)).collect()
    }

    /// Reverse pass for the scalar `Σ_rows yᵀ dy`. Parameter gradients are
    /// summed over the batch; the gradient with respect to the input batch is
    /// returned alongside.
    pub fn backward_batch(&self, cache: &ForwardCache, dy: &Batch) -> Result<(GradientSet, Batch)> {
        let mut grads = GradientSet::zeros_like(self);
        let dx = self.reverse(cache, dy, Some(&mut grads))?;
        Ok((grads, dx))
    }

    /// Gradient with respect to the input only; skips the weight products.
    pub fn input_gradient(&self, cache: &ForwardCache, dy: &Batch) -> Result<Batch> {
        self.reverse(cache, dy, None)
    }

    fn reverse(
        &self,
        cache: &ForwardCache,
        dy: &Batch,
        mut grads: Option<&mut GradientSet>,
    ) -> Result<Batch> {
        if cache.version != self.version || cache.shapes != self.shapes() {
            return Err(Error::StaleCache(
                "cache does not belong to this network state",
            ));
        }
        let batch = cache.activations[0].rows;
        if dy.rows != batch || dy.cols != self.output_dim() {
            return Err(Error::Shape {
                op: "Mlp::backward",
                left: (dy.rows, dy.cols),
                right: (batch, self.output_dim()),
            });
        }
        let mut delta = dy.clone();
        for (li, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.activations[li + 1];
            let x = &cache.activations[li];
            if layer.activation != Activation::Linear {
                for (d, &yv) in delta.data.iter_mut().zip(&y.data) {
                    *d *= layer.activation.derivative_from_output(yv);
                }
            }
            if let Some(grads) = grads.as_deref_mut() {
                let g = &mut grads.layers[li];
                for r in 0..batch {
                    for (gb, d) in g.bias.iter_mut().zip(delta.row(r)) {
                        *gb += d;
                    }
                }
                // dW = δᵀ · x
                unsafe {
                    matrixmultiply::dgemm(
                        layer.outputs,
                        batch,
                        layer.inputs,
                        1.0,
                        delta.data.as_ptr(),
                        1,
                        layer.outputs as isize,
                        x.data.as_ptr(),
                        layer.inputs as isize,
                        1,
                        0.0,
                        g.weights.as_mut_ptr(),
                        layer.inputs as isize,
                        1,
                    );
                }
            }
            // dx = δ · W
            let mut dx = Batch::zeros(batch, layer.inputs);
            unsafe {
                matrixmultiply::dgemm(
                    batch,
                    layer.outputs,
                    layer.inputs,
                    1.0,
                    delta.data.as_ptr(),
                    layer.outputs as isize,
                    1,
                    layer.weights.as_ptr(),
                    layer.inputs as isize,
                    1,
                    0.0,
                    dx.data.as_mut_ptr(),
                    layer.inputs as isize,
                    1,
                );
            }
            delta = dx;
        }
        Ok(delta)
    }

    pub fn backward(&self, cache: &ForwardCache, dy: &[f64]) -> Result<GradientSet> {
        Ok(self.backward_batch(cache, &Batch::from_row(dy))?.0)
    }

    /// Polyak averaging `self ← eta·online + (1 − eta)·self`.
    pub fn soft_update_from(&mut self, online: &Mlp, eta: f64) -> Result<()> {
        if !self.is_congruent(online) {
            return Err(Error::Shape {
                op: "soft_update",
                left: (self.layers.len(), self.param_count()),
                right: (online.layers.len(), online.param_count()),
            });
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::config(
                "agent.tau",
                "soft update rate must lie in (0, 1]",
            ));
        }
        let keep = 1.0 - eta;
        for (t, o) in self.layers.iter_mut().zip(&online.layers) {
            for (tv, ov) in t.weights.iter_mut().zip(&o.weights) {
                *tv = eta * ov + keep * *tv;
            }
            for (tv, ov) in t.bias.iter_mut().zip(&o.bias) {
                *tv = eta * ov + keep * *tv;
            }
        }
        self.touch();
        Ok(())
    }

    /// Whether each ReLU unit is active, for every sample in the cache.
    pub fn relu_pattern(&self, cache: &ForwardCache) -> u64 {
        let mut h = DefaultHasher::new();
        for (li, layer) in self.layers.iter().enumerate() {
            if layer.activation == Activation::Relu {
                for v in &cache.activations[li + 1].data {
                    (*v > 0.0).hash(&mut h);
                }
            }
        }
        h.finish()
    }
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    shapes: Vec<(usize, usize)>,
    /// Input followed by every layer output.
    activations: Vec<Batch>,
}

impl ForwardCache {
    pub fn output(&self) -> &Batch {
        self.activations.last().expect("non-empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients shaped like the parameters of an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<LayerGrad>,
}

impl GradientSet {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn is_congruent(&self, net: &Mlp) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.layers {
            g.weights
                .iter_mut()
                .chain(g.bias.iter_mut())
                .for_each(|v| *v *= s);
        }
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, other: &GradientSet, s: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += s * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += s * y;
            }
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.extend_from_slice(&g.weights);
            out.extend_from_slice(&g.bias);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(&g.bias))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    #[default]
    Adam,
    /// Plain `p ← p − lr·g`.
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub rule: UpdateRule,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            rule: UpdateRule::Adam,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: GradientSet,
    second: GradientSet,
    step: u64,
}

impl AdamState {
    pub fn new(net: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            first: GradientSet::zeros_like(net),
            second: GradientSet::zeros_like(net),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update (or plain SGD when so configured).
pub fn adam_step(net: &mut Mlp, grads: &GradientSet, state: &mut AdamState) -> Result<()> {
    if !grads.is_congruent(net) || !state.first.is_congruent(net) {
        return Err(Error::Shape {
            op: "adam_step",
            left: (grads.layers.len(), 0),
            right: (net.layers.len(), net.param_count()),
        });
    }
    state.step += 1;
    let cfg = state.config;
    match cfg.rule {
        UpdateRule::Sgd => {
            for (l, g) in net.layers.iter_mut().zip(&grads.layers) {
                for (p, gv) in l.weights.iter_mut().zip(&g.weights) {
                    *p -= cfg.lr * gv;
                }
                for (p, gv) in l.bias.iter_mut().zip(&g.bias) {
                    *p -= cfg.lr * gv;
                }
            }
        }
        UpdateRule::Adam => {
            let t = state.step as i32;
            let c1 = 1.0 - cfg.beta1.powi(t);
            let c2 = 1.0 - cfg.beta2.powi(t);
            let (b1, b2) = (cfg.beta1, cfg.beta2);
            let (step, eps) = (cfg.lr / c1, cfg.eps);
            let inv_c2 = 1.0 / c2;
            // straight-line zipped loop so the compiler can vectorise sqrt/div
            let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
                for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                    let mut mv = b1 * *m + (1.0 - b1) * g;
                    let mut vv = b2 * *v + (1.0 - b2) * g * g;
                    // β·denorm_min rounds back to denorm_min, so a moment with
                    // zero gradient would sit in the (slow) subnormal range forever
                    mv = if mv.abs() < f64::MIN_POSITIVE {
                        0.0
                    } else {
                        mv
                    };
                    vv = if vv < f64::MIN_POSITIVE { 0.0 } else { vv };
                    *m = mv;
                    *v = vv;
                    *p -= step * mv / ((vv * inv_c2).sqrt() + eps);
                }
            };
            for (li, l) in net.layers.iter_mut().enumerate() {
                let g = &grads.layers[li];
                let m = &mut state.first.layers[li];
                let v = &mut state.second.layers[li];
                update(&mut l.weights, &g.weights, &mut m.weights, &mut v.weights);
                update(&mut l.bias, &g.bias, &mut m.bias, &mut v.bias);
            }
        }
    }
    net.touch();
    Ok(())
}

/// Scalar loss on the network output used by [`gradient_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    /// `½ ‖y − target‖²`.
    Quadratic { target: Vec<f64> },
    /// `weightsᵀ y`.
    Linear { weights: Vec<f64> },
}

impl LossSpec {
    fn value(&self, y: &[f64]) -> f64 {
        match self {
            LossSpec::Quadratic { target } => {
                0.5 * y
                    .iter()
                    .zip(target)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }
            LossSpec::Linear { weights } => y.iter().zip(weights).map(|(a, b)| a * b).sum(),
        }
    }

    fn seed(&self, y: &[f64]) -> Vec<f64> {
        match self {
            LossSpec::Quadratic { target } => y.iter().zip(target).map(|(a, b)| a - b).collect(),
            LossSpec::Linear { weights } => weights.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central difference step.
    pub step: f64,
    /// Check at most this many randomly chosen coordinates of each weight
    /// matrix and each bias vector; `None` checks every parameter.
    pub per_tensor: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            per_tensor: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Coordinate with the largest error and its two gradient estimates.
    pub worst: Option<(usize, f64, f64)>,
    pub checked: usize,
    /// Coordinates skipped because a perturbation flipped a ReLU.
    pub skipped: usize,
}

/// Value of a perturbed evaluation plus a fingerprint of its ReLU pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub value: f64,
    pub pattern: u64,
}

/// `|a − n| / max(|a|, |n|, 1e-6·max(1, |f|))`.
///
/// The floor sits well above central-difference roundoff (`ε|f|/h ≈
/// 1e-11·|f|` at `h = 1e-5`), below which a relative comparison says nothing.
pub fn relative_error(analytic: f64, numeric: f64, f_scale: f64) -> f64 {
    let floor = 1e-6 * f_scale.abs().max(1.0);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Coordinates to probe: every index, or a random subset of each tensor.
pub fn select_coordinates(
    tensor_sizes: &[usize],
    per_tensor: Option<usize>,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let mut coords = Vec::new();
    let mut offset = 0;
    for &size in tensor_sizes {
        match per_tensor {
            Some(limit) if limit < size => {
                let picked = rand::seq::index::sample(rng, size, limit);
                let mut picked: Vec<usize> = picked.into_iter().map(|i| offset + i).collect();
                picked.sort_unstable();
                coords.extend(picked);
            }
            _ => coords.extend(offset..offset + size),
        }
        offset += size;
    }
    coords
}

/// Compares `analytic` against central differences of `eval` at `point`.
/// Coordinates whose `±step` probes change the ReLU pattern are skipped.
pub fn check_coordinates(
    point: &[f64],
    analytic: &[f64],
    coords: &[usize],
    step: f64,
    mut eval: impl FnMut(&[f64]) -> Probe,
) -> GradCheckReport {
    let base = eval(point);
    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
    };
    for &i in coords {
        let orig = x[i];
        x[i] = orig + step;
        let plus = eval(&x);
        x[i] = orig - step;
        let minus = eval(&x);
        x[i] = orig;
        if plus.pattern != base.pattern || minus.pattern != base.pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus.value - minus.value) / (2.0 * step);
        let err = relative_error(analytic[i], numeric, base.value);
        if err > report.max_relative_error || report.worst.is_none() {
            report.max_relative_error = err;
            report.worst = Some((i, analytic[i], numeric));
        }
        report.checked += 1;
    }
    report
}

/// Sizes of the parameter tensors in canonical order.
pub fn tensor_sizes(net: &Mlp) -> Vec<usize> {
    net.layers
        .iter()
        .flat_map(|l| [l.weights.len(), l.bias.len()])
        .collect()
}

/// Worst relative error between backpropagated parameter gradients of
/// `loss(net(x))` and central finite differences.
pub fn gradient_check(
    net: &Mlp,
    x: &[f64],
    loss: &LossSpec,
    options: GradCheckOptions,
) -> Result<GradCheckReport> {
    let (y, cache) = net.forward(x)?;
    let grads = net.backward(&cache, &loss.seed(&y))?;
    let analytic = grads.flat();
    let point = net.flat_params();
    let mut rng = crate::rng::stream(options.seed, crate::rng::Stream::Evaluation);
    let coords = select_coordinates(&tensor_sizes(net), options.per_tensor, &mut rng);
    let mut probe_net = net.clone();
    Ok(check_coordinates(
        &point,
        &analytic,
        &coords,
        options.step,
        |p| {
            probe_net.set_flat_params(p).expect("same length");
            let (y, cache) = probe_net.forward(x).expect("validated above");
            Probe {
                value: loss.value(&y),
                pattern: probe_net.relu_pattern(&cache),
            }
        },
    ))
}

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MLPC";
pub const CHECKPOINT_MAJOR: u16 = 1;
pub const CHECKPOINT_MINOR: u16 = 0;

impl Mlp {
    /// Binary checkpoint:
    ///
    /// ```text
    /// "MLPC" | major u16 | minor u16 | layer count u32
    /// per layer: inputs u32 | outputs u32 | activation tag u32
    /// per layer: weights f64 × (outputs·inputs) | biases f64 × outputs
    /// ```
    ///
    /// All integers and reals little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 12 * self.layers.len() + 8 * self.param_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_MAJOR.to_le_bytes());
        out.extend_from_slice(&CHECKPOINT_MINOR.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            out.extend_from_slice(&(l.inputs as u32).to_le_bytes());
            out.extend_from_slice(&(l.outputs as u32).to_le_bytes());
            out.extend_from_slice(&l.activation.tag().to_le_bytes());
        }
        for l in &self.layers {
            for v in l.weights.iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format {
                what: "checkpoint",
                msg: "bad magic".into(),
            });
        }
        let major = r.u16()?;
        let minor = r.u16()?;
        if major != CHECKPOINT_MAJOR {
            return Err(Error::Version {
                what: "checkpoint",
                found: format!("{major}.{minor}"),
                expected: CHECKPOINT_MAJOR,
            });
        }
        let count = r.u32()? as usize;
        if count == 0 || count > 1024 {
            return Err(Error::Format {
                what: "checkpoint",
                msg: format!("implausible layer count {count}"),
            });
        }
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let inputs = r.u32()? as usize;
            let outputs = r.u32()? as usize;
            let tag = r.u32()?;
            let activation = Activation::from_tag(tag).ok_or_else(|| Error::Format {
                what: "checkpoint",
                msg: format!("unknown activation tag {tag}"),
            })?;
            layers.push(Layer::zeros(inputs, outputs, activation));
        }
        for l in &mut layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = r.f64()?;
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Format {
                what: "checkpoint",
                msg: format!("{} trailing bytes", bytes.len() - r.pos),
            });
        }
        Self::from_layers(layers)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format {
                what: "checkpoint",
                msg: "truncated".into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

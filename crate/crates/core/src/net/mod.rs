//! Small dense networks: forward pass, exact backpropagation of the mean MSE
//! or BCE loss, SGD with momentum and inverse-time decay, and a
//! finite-difference gradient check.
//!
//! A layer may carry `passthrough` leading inputs that are copied unchanged
//! to the front of its output. This lets one network express two input
//! branches (an identity branch and a learned reduction) that are
//! concatenated before the next layer.

mod format;
mod train;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{GgrError, Result};
use crate::rng::SplitMix64;

pub use format::{decode_network, encode_network, load_network, save_network};
pub use train::{learning_rate_at, sgd_step, train, SgdState, TrainConfig, TrainReport};

/// Lower clip for BCE predictions; the upper clip is `1 - BCE_EPS`.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Linear => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    Bce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub passthrough: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self { passthrough: 0, inputs, outputs, activation }
    }

    pub fn in_width(&self) -> usize {
        self.passthrough + self.inputs
    }

    pub fn out_width(&self) -> usize {
        self.passthrough + self.outputs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub passthrough: usize,
    pub activation: Activation,
    /// `outputs x inputs`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    pub fn spec(&self) -> LayerSpec {
        LayerSpec {
            passthrough: self.passthrough,
            inputs: self.weights.ncols(),
            outputs: self.weights.nrows(),
            activation: self.activation,
        }
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Parameter gradients, shaped like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            bias: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    /// Flattened in the same order as [`DenseNetwork::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.bias.iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    pub layers: Vec<DenseLayer>,
}

struct Trace {
    /// Input to each layer plus the final output.
    activations: Vec<Array2<f64>>,
    /// Affine pre-activations per layer (without passthrough columns).
    pre: Vec<Array2<f64>>,
}

impl DenseNetwork {
    /// Xavier-uniform weights in `±sqrt(6 / (fan_in + fan_out))` and zero
    /// biases, drawn layer by layer in row-major order from `seed`.
    pub fn new(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        let mut rng = SplitMix64::new(seed);
        Self::with_init(specs, |fan_in, fan_out| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            rng.uniform_range(-limit, limit)
        })
    }

    /// All weights and biases zero.
    pub fn zeros(specs: &[LayerSpec]) -> Result<Self> {
        Self::with_init(specs, |_, _| 0.0)
    }

    fn with_init(specs: &[LayerSpec], mut draw: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        validate_specs(specs)?;
        let layers = specs
            .iter()
            .map(|s| DenseLayer {
                passthrough: s.passthrough,
                activation: s.activation,
                weights: Array2::from_shape_simple_fn((s.outputs, s.inputs), || draw(s.inputs, s.outputs)),
                bias: Array1::zeros(s.outputs),
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let specs: Vec<LayerSpec> = layers.iter().map(DenseLayer::spec).collect();
        validate_specs(&specs)?;
        for l in &layers {
            if l.bias.len() != l.weights.nrows() {
                return Err(GgrError::Shape(format!("bias length {} for {} outputs", l.bias.len(), l.weights.nrows())));
            }
        }
        let net = Self { layers };
        if !net.params().iter().all(|v| v.is_finite()) {
            return Err(GgrError::NonFinite("network parameters"));
        }
        Ok(net)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(DenseLayer::spec).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].spec().in_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.spec().out_width())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(GgrError::Shape(format!("{} parameters for a network of {}", flat.len(), self.n_params())));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v = it.next().unwrap_or(0.0));
        }
        Ok(())
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(GgrError::Shape(format!("input width {} for a network expecting {}", x.ncols(), self.input_width())));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(GgrError::NonFinite("network input"));
        }
        Ok(())
    }

    fn trace(&self, x: ArrayView2<f64>) -> Result<Trace> {
        self.check_input(x)?;
        let mut activations = vec![x.to_owned()];
        let mut pre = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = activations.last().expect("nonempty");
            let p = layer.passthrough;
            let z = input.slice(s![.., p..]).dot(&layer.weights.t()) + &layer.bias;
            let mut out = Array2::zeros((input.nrows(), p + z.ncols()));
            out.slice_mut(s![.., ..p]).assign(&input.slice(s![.., ..p]));
            out.slice_mut(s![.., p..]).assign(&z.mapv(|v| layer.activation.apply(v)));
            pre.push(z);
            activations.push(out);
        }
        Ok(Trace { activations, pre })
    }

    /// Batch forward pass; rows are samples.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.trace(x)?.activations.pop().expect("nonempty"))
    }

    pub fn forward_one(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| GgrError::Shape(e.to_string()))?;
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    /// Affine pre-activations of every layer.
    pub fn preactivations(&self, x: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        Ok(self.trace(x)?.pre)
    }

    /// Mean loss of the batch and its gradient with respect to every
    /// parameter.
    pub fn backward(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>, loss: Loss) -> Result<(f64, Gradients)> {
        let trace = self.trace(x)?;
        let out = trace.activations.last().expect("nonempty");
        if targets.dim() != out.dim() {
            return Err(GgrError::Shape(format!("targets {:?} vs outputs {:?}", targets.dim(), out.dim())));
        }
        let value = loss_value(out.view(), targets, loss)?;
        let delta = loss_gradient(out.view(), targets, loss);
        Ok((value, self.backprop(&trace, delta).0))
    }

    /// Gradient of the first output with respect to the input `x`.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| GgrError::Shape(e.to_string()))?;
        let trace = self.trace(view)?;
        let mut delta = Array2::zeros((1, self.output_width()));
        delta[[0, 0]] = 1.0;
        Ok(self.backprop(&trace, delta).1.into_raw_vec_and_offset().0)
    }

    /// Reverse pass from the output delta; returns parameter gradients and
    /// the delta at the network input.
    fn backprop(&self, trace: &Trace, mut delta: Array2<f64>) -> (Gradients, Array2<f64>) {
        let mut grads = Gradients::zeros_like(self);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let p = layer.passthrough;
            let input = &trace.activations[i];
            let output = &trace.activations[i + 1];
            let z = &trace.pre[i];
            let mut dz = delta.slice(s![.., p..]).to_owned();
            ndarray::Zip::from(&mut dz)
                .and(z)
                .and(output.slice(s![.., p..]))
                .for_each(|d, &zv, &av| *d *= layer.activation.derivative(zv, av));
            grads.weights[i] = dz.t().dot(&input.slice(s![.., p..]));
            grads.bias[i] = dz.sum_axis(Axis(0));
            let mut next = Array2::zeros(input.raw_dim());
            next.slice_mut(s![.., ..p]).assign(&delta.slice(s![.., ..p]));
            next.slice_mut(s![.., p..]).assign(&dz.dot(&layer.weights));
            delta = next;
        }
        (grads, delta)
    }

    /// Mean loss over the batch.
    pub fn loss(&self, x: ArrayView2<f64>, targets: ArrayView2<f64>, loss: Loss) -> Result<f64> {
        let out = self.forward(x)?;
        if targets.dim() != out.dim() {
            return Err(GgrError::Shape(format!("targets {:?} vs outputs {:?}", targets.dim(), out.dim())));
        }
        loss_value(out.view(), targets, loss)
    }
}

fn validate_specs(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(GgrError::invalid("layers", "network needs at least one layer"));
    }
    for (i, s) in specs.iter().enumerate() {
        if s.inputs == 0 || s.outputs == 0 {
            return Err(GgrError::invalid("layers", format!("layer {i} has a zero width")));
        }
        if i > 0 && specs[i - 1].out_width() != s.in_width() {
            return Err(GgrError::invalid(
                "layers",
                format!("layer {} emits {} values but layer {i} takes {}", i - 1, specs[i - 1].out_width(), s.in_width()),
            ));
        }
    }
    Ok(())
}

fn check_lengths(pred: &[f64], target: &[f64]) -> Result<()> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(GgrError::Shape(format!("{} predictions vs {} targets", pred.len(), target.len())));
    }
    Ok(())
}

/// `(1/m) sum (g - g_hat)^2`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (t - p).powi(2)).sum::<f64>() / pred.len() as f64)
}

pub fn clip_probability(p: f64) -> f64 {
    p.clamp(BCE_EPS, 1.0 - BCE_EPS)
}

/// `-(1/m) sum [r ln r_hat + (1 - r) ln(1 - r_hat)]` with clipped predictions.
pub fn bce_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    check_lengths(pred, target)?;
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(&p, &r)| {
            let p = clip_probability(p);
            r * p.ln() + (1.0 - r) * (1.0 - p).ln()
        })
        .sum();
    Ok(-sum / pred.len() as f64)
}

fn loss_value(out: ArrayView2<f64>, targets: ArrayView2<f64>, loss: Loss) -> Result<f64> {
    let p: Vec<f64> = out.iter().copied().collect();
    let t: Vec<f64> = targets.iter().copied().collect();
    match loss {
        Loss::Mse => mse_loss(&p, &t),
        Loss::Bce => bce_loss(&p, &t),
    }
}

fn loss_gradient(out: ArrayView2<f64>, targets: ArrayView2<f64>, loss: Loss) -> Array2<f64> {
    let m = out.len() as f64;
    let mut g = Array2::zeros(out.raw_dim());
    ndarray::Zip::from(&mut g).and(out).and(targets).for_each(|g, &p, &t| {
        *g = match loss {
            Loss::Mse => 2.0 * (p - t) / m,
            Loss::Bce => {
                if p < BCE_EPS || p > 1.0 - BCE_EPS {
                    0.0
                } else {
                    (p - t) / (p * (1.0 - p)) / m
                }
            }
        }
    });
    g
}

/// Largest relative error `|a - n| / max(|a|, |n|, 1e-5)` between the
/// analytic gradient and central differences of step `eps`.
pub fn gradient_check(net: &DenseNetwork, x: ArrayView2<f64>, targets: ArrayView2<f64>, loss: Loss, eps: f64) -> Result<f64> {
    let (_, grads) = net.backward(x, targets, loss)?;
    gradient_check_against(net, x, targets, loss, eps, &grads)
}

/// As [`gradient_check`] but against a caller-supplied gradient.
pub fn gradient_check_against(
    net: &DenseNetwork,
    x: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    loss: Loss,
    eps: f64,
    analytic: &Gradients,
) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(GgrError::invalid("eps", "must be positive"));
    }
    let analytic = analytic.flatten();
    let base = net.params();
    if analytic.len() != base.len() {
        return Err(GgrError::Shape("gradient does not match network".into()));
    }
    let mut probe = net.clone();
    let mut params = base.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        params[i] = base[i] + eps;
        probe.set_params(&params)?;
        let up = probe.loss(x, targets, loss)?;
        params[i] = base[i] - eps;
        probe.set_params(&params)?;
        let down = probe.loss(x, targets, loss)?;
        params[i] = base[i];
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[i];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-5);
        worst = worst.max(err);
    }
    Ok(worst)
}

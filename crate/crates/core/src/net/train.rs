use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{DenseNetwork, Gradients, Loss};
use crate::error::{GgrError, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub decay: f64,
    pub epochs: usize,
    /// `None` trains on the full batch every epoch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub loss: Loss,
    /// Stop after this many epochs without a `min_delta` improvement.
    #[serde(default)]
    pub patience: Option<usize>,
    #[serde(default = "default_min_delta")]
    pub min_delta: f64,
}

fn default_min_delta() -> f64 {
    1e-6
}

impl TrainConfig {
    /// Recurrence classifier defaults: BCE, lr 0.05, momentum 0.9, decay 1e-6.
    pub fn classifier() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            decay: 1e-6,
            epochs: 300,
            batch_size: None,
            seed: 0,
            loss: Loss::Bce,
            patience: Some(50),
            min_delta: 1e-6,
        }
    }

    /// Gene regressor defaults for standardized targets.
    pub fn regressor() -> Self {
        Self { learning_rate: 0.01, epochs: 500, loss: Loss::Mse, ..Self::classifier() }
    }

    /// Gene regressor defaults for raw FPKM targets.
    pub fn regressor_raw() -> Self {
        Self { learning_rate: 5e-6, ..Self::regressor() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GgrError::invalid("learning_rate", format!("must be > 0, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(GgrError::invalid("momentum", format!("must be in [0, 1), got {}", self.momentum)));
        }
        if !(self.decay >= 0.0 && self.decay.is_finite()) {
            return Err(GgrError::invalid("decay", format!("must be >= 0, got {}", self.decay)));
        }
        if self.batch_size == Some(0) {
            return Err(GgrError::invalid("batch_size", "must be >= 1"));
        }
        if !(self.min_delta >= 0.0) {
            return Err(GgrError::invalid("min_delta", "must be >= 0"));
        }
        Ok(())
    }
}

/// `lr0 / (1 + decay * t)`.
pub fn learning_rate_at(lr0: f64, decay: f64, t: u64) -> f64 {
    lr0 / (1.0 + decay * t as f64)
}

/// Momentum buffers and the update counter.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdState {
    pub velocity: Gradients,
    pub t: u64,
}

impl SgdState {
    pub fn new(net: &DenseNetwork) -> Self {
        Self { velocity: Gradients::zeros_like(net), t: 0 }
    }
}

/// `v <- momentum * v - lr_t * grad; param <- param + v`, then `t += 1`.
pub fn sgd_step(net: &mut DenseNetwork, grads: &Gradients, state: &mut SgdState, config: &TrainConfig) -> Result<()> {
    if !grads.is_finite() {
        return Err(GgrError::NonFinite("gradient"));
    }
    let lr = learning_rate_at(config.learning_rate, config.decay, state.t);
    let m = config.momentum;
    for (i, layer) in net.layers.iter_mut().enumerate() {
        update(&mut layer.weights, &mut state.velocity.weights[i], &grads.weights[i], m, lr);
        update(&mut layer.bias, &mut state.velocity.bias[i], &grads.bias[i], m, lr);
    }
    state.t += 1;
    Ok(())
}

fn update<D: ndarray::Dimension>(
    p: &mut ndarray::Array<f64, D>,
    v: &mut ndarray::Array<f64, D>,
    g: &ndarray::Array<f64, D>,
    momentum: f64,
    lr: f64,
) {
    ndarray::Zip::from(p).and(v).and(g).for_each(|p, v, &g| {
        *v = momentum * *v - lr * g;
        *p += *v;
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss of each epoch, measured on the batches before
    /// their update.
    pub loss_trace: Vec<f64>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_trace.last().copied()
    }
}

pub fn train(net: &mut DenseNetwork, x: ArrayView2<f64>, y: ArrayView2<f64>, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(GgrError::invalid("dataset", "no training samples"));
    }
    if y.nrows() != n {
        return Err(GgrError::Shape(format!("{n} inputs vs {} targets", y.nrows())));
    }
    let batch = config.batch_size.unwrap_or(n).min(n);
    let mut state = SgdState::new(net);
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut stopped_early = false;
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        if batch == n {
            let (loss, grads) = net.backward(x, y, config.loss)?;
            check_loss(epoch, loss)?;
            sgd_step(net, &grads, &mut state, config)?;
            total = loss * n as f64;
        } else {
            SplitMix64::derive(config.seed, &[epoch as u64]).shuffle(&mut order);
            for chunk in order.chunks(batch) {
                let xb: Array2<f64> = x.select(Axis(0), chunk);
                let yb: Array2<f64> = y.select(Axis(0), chunk);
                let (loss, grads) = net.backward(xb.view(), yb.view(), config.loss)?;
                check_loss(epoch, loss)?;
                sgd_step(net, &grads, &mut state, config)?;
                total += loss * chunk.len() as f64;
            }
        }
        let epoch_loss = total / n as f64;
        trace.push(epoch_loss);
        if let Some(patience) = config.patience {
            if epoch_loss < best - config.min_delta {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }
    if !net.params().iter().all(|v| v.is_finite()) {
        return Err(GgrError::Diverged { epoch: trace.len(), loss: f64::NAN });
    }
    Ok(TrainReport { loss_trace: trace, stopped_early })
}

fn check_loss(epoch: usize, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(GgrError::Diverged { epoch, loss })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, LayerSpec};
    use ndarray::array;

    fn one_weight(w: f64) -> DenseNetwork {
        let mut net = DenseNetwork::zeros(&[LayerSpec::dense(1, 1, Activation::Linear)]).unwrap();
        net.layers[0].weights[[0, 0]] = w;
        net
    }

    fn unit_grad(net: &DenseNetwork) -> Gradients {
        let mut g = Gradients::zeros_like(net);
        g.weights[0][[0, 0]] = 1.0;
        g
    }

    #[test]
    fn momentum_trace_by_hand() {
        let mut net = one_weight(1.0);
        let cfg = TrainConfig { learning_rate: 0.1, momentum: 0.9, decay: 0.0, ..TrainConfig::classifier() };
        let mut st = SgdState::new(&net);
        let g = unit_grad(&net);
        sgd_step(&mut net, &g, &mut st, &cfg).unwrap();
        assert_eq!(net.layers[0].weights[[0, 0]], 0.9);
        assert_eq!(st.velocity.weights[0][[0, 0]], -0.1);
        sgd_step(&mut net, &g, &mut st, &cfg).unwrap();
        assert_eq!(st.velocity.weights[0][[0, 0]], -0.19);
        assert_eq!(net.layers[0].weights[[0, 0]], 0.71);
    }

    #[test]
    fn plain_gradient_descent_without_momentum() {
        let mut net = one_weight(0.3);
        let cfg = TrainConfig { learning_rate: 0.07, momentum: 0.0, decay: 0.0, ..TrainConfig::classifier() };
        let mut st = SgdState::new(&net);
        let mut g = unit_grad(&net);
        g.weights[0][[0, 0]] = 1.7;
        let mut w = 0.3;
        for _ in 0..5 {
            sgd_step(&mut net, &g, &mut st, &cfg).unwrap();
            w -= 0.07 * 1.7;
            assert_eq!(net.layers[0].weights[[0, 0]], w);
        }
    }

    #[test]
    fn inverse_time_decay() {
        assert_eq!(learning_rate_at(0.05, 1e-6, 1_000_000), 0.025);
        assert_eq!(learning_rate_at(0.05, 1e-6, 0), 0.05);
    }

    #[test]
    fn rejects_bad_config_and_gradient() {
        let bad = [
            TrainConfig { learning_rate: -1.0, ..TrainConfig::classifier() },
            TrainConfig { momentum: 1.0, ..TrainConfig::classifier() },
            TrainConfig { decay: -1e-6, ..TrainConfig::classifier() },
        ];
        for (cfg, field) in bad.iter().zip(["learning_rate", "momentum", "decay"]) {
            match cfg.validate() {
                Err(GgrError::InvalidArgument { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{other:?}"),
            }
        }
        let mut net = one_weight(1.0);
        let mut g = unit_grad(&net);
        g.bias[0][0] = f64::INFINITY;
        let mut st = SgdState::new(&net);
        assert!(sgd_step(&mut net, &g, &mut st, &TrainConfig::classifier()).is_err());
    }

    #[test]
    fn learns_slope_two() {
        let x = Array2::from_shape_fn((20, 1), |(i, _)| i as f64 / 10.0 - 1.0);
        let y = x.mapv(|v| 2.0 * v);
        let mut net = one_weight(0.0);
        let cfg = TrainConfig { learning_rate: 0.1, epochs: 500, loss: Loss::Mse, patience: None, ..TrainConfig::classifier() };
        let rep = train(&mut net, x.view(), y.view(), &cfg).unwrap();
        assert!((net.layers[0].weights[[0, 0]] - 2.0).abs() < 1e-3);
        assert!(net.layers[0].bias[0].abs() < 1e-3);
        assert!(rep.final_loss().unwrap() < 1e-6);
    }

    #[test]
    fn zero_epochs_and_determinism() {
        let specs = [LayerSpec::dense(2, 3, Activation::Relu), LayerSpec::dense(3, 1, Activation::Sigmoid)];
        let x = array![[0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [0.2, 0.1]];
        let y = array![[1.0], [1.0], [0.0], [0.0]];
        let net0 = DenseNetwork::new(&specs, 9).unwrap();
        let mut net = net0.clone();
        let rep = train(&mut net, x.view(), y.view(), &TrainConfig { epochs: 0, ..TrainConfig::classifier() }).unwrap();
        assert!(rep.loss_trace.is_empty());
        assert_eq!(net, net0);

        let cfg = TrainConfig { epochs: 40, batch_size: Some(3), seed: 5, ..TrainConfig::classifier() };
        let (mut a, mut b) = (net0.clone(), net0.clone());
        let ra = train(&mut a, x.view(), y.view(), &cfg).unwrap();
        let rb = train(&mut b, x.view(), y.view(), &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64 * 100.0);
        let y = x.mapv(|v| v * 3.0);
        let mut net = one_weight(0.0);
        let cfg = TrainConfig { learning_rate: 10.0, epochs: 200, loss: Loss::Mse, patience: None, ..TrainConfig::classifier() };
        assert!(matches!(train(&mut net, x.view(), y.view(), &cfg), Err(GgrError::Diverged { .. } | GgrError::NonFinite(_))));
    }
}

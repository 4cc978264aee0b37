use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use rand::seq::SliceRandom;

use super::{batch_gradients, evaluate_accuracy, DenseParams, Network, WeightInit};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::InvalidArgument(format!(
                "unknown optimizer {other:?}"
            ))),
        }
    }
}

/// Mean over the batch of the summed squared error of each output vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Loss {
    #[default]
    Mse,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Recorded in reports; applied by whoever builds the network
    /// (see [`Network::init_params`]). Training never re-initializes.
    pub weight_init: WeightInit,
    pub shuffle_each_epoch: bool,
    pub loss: Loss,
    /// Keep biases at their current values.
    pub freeze_bias: bool,
    /// Stop once an epoch's mean loss is at or below this value.
    pub stop_loss: Option<f64>,
    /// Evaluate accuracy on the eval set every this many epochs (0 = never).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 10,
            seed: 0,
            weight_init: WeightInit::UniformScaled,
            shuffle_each_epoch: true,
            loss: Loss::Mse,
            freeze_bias: false,
            stop_loss: None,
            eval_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    pub eval_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Mean per-example training loss of each epoch, accumulated over its batches.
    pub loss_curve: Vec<f64>,
    /// `(epoch, accuracy)` on the eval set.
    pub eval_curve: Vec<(usize, f64)>,
    pub weight_init: WeightInit,
    pub stopped_early: bool,
}

enum Optimizer {
    Sgd,
    Adam {
        m: Vec<DenseParams>,
        v: Vec<DenseParams>,
        step: i32,
    },
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPSILON: f64 = 1e-8;

impl Optimizer {
    fn new(kind: OptimizerKind, net: &Network) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => {
                let zeros: Vec<DenseParams> = net
                    .params()
                    .iter()
                    .map(|p| DenseParams::zeros(p.inputs(), p.outputs()))
                    .collect();
                Optimizer::Adam {
                    m: zeros.clone(),
                    v: zeros,
                    step: 0,
                }
            }
        }
    }

    fn apply(&mut self, net: &mut Network, grads: &[DenseParams], lr: f64, freeze_bias: bool) {
        match self {
            Optimizer::Sgd => {
                for (p, g) in net.params_mut().iter_mut().zip(grads) {
                    sgd(p.weight.as_mut_slice(), g.weight.as_slice(), lr);
                    if !freeze_bias {
                        sgd(&mut p.bias, &g.bias, lr);
                    }
                }
            }
            Optimizer::Adam { m, v, step } => {
                *step += 1;
                let c1 = 1.0 - BETA1.powi(*step);
                let c2 = 1.0 - BETA2.powi(*step);
                for (((p, g), m), v) in net.params_mut().iter_mut().zip(grads).zip(m).zip(v) {
                    adam(
                        p.weight.as_mut_slice(),
                        g.weight.as_slice(),
                        m.weight.as_mut_slice(),
                        v.weight.as_mut_slice(),
                        lr,
                        c1,
                        c2,
                    );
                    if !freeze_bias {
                        adam(&mut p.bias, &g.bias, &mut m.bias, &mut v.bias, lr, c1, c2);
                    }
                }
            }
        }
    }
}

fn sgd(p: &mut [f64], g: &[f64], lr: f64) {
    for (p, g) in p.iter_mut().zip(g) {
        *p -= lr * g;
    }
}

/// Moments of parameters whose gradient stays zero decay geometrically into
/// subnormals, which are very slow to compute with; they are cut to zero.
fn flush(x: f64) -> f64 {
    if x.abs() < 1e-150 {
        0.0
    } else {
        x
    }
}

fn adam(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64) {
    for i in 0..p.len() {
        m[i] = flush(BETA1 * m[i] + (1.0 - BETA1) * g[i]);
        v[i] = flush(BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i]);
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
}

fn check_shapes(net: &Network, data: &Dataset) -> Result<()> {
    if net.input_width() != data.input_width() {
        return Err(Error::Shape(format!(
            "network input width {} does not match {}-variable dataset (width {})",
            net.input_width(),
            data.n,
            data.input_width()
        )));
    }
    if net.output_width() != data.target_width() {
        return Err(Error::Shape(format!(
            "network output width {} does not match {} targets of width {}",
            net.output_width(),
            data.task,
            data.target_width()
        )));
    }
    Ok(())
}

pub fn train(net: &mut Network, data: &Dataset, config: &TrainConfig) -> Result<TrainReport> {
    train_observed(net, data, None, config, |_, _| ControlFlow::Continue(()))
}

/// Trains in place. `observer` sees every epoch and may stop training early.
pub fn train_observed(
    net: &mut Network,
    data: &Dataset,
    eval: Option<&Dataset>,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochStats, &Network) -> ControlFlow<()>,
) -> Result<TrainReport> {
    config.validate()?;
    check_shapes(net, data)?;
    if let Some(e) = eval {
        check_shapes(net, e)?;
    }
    let mut report = TrainReport {
        epochs_run: 0,
        loss_curve: Vec::new(),
        eval_curve: Vec::new(),
        weight_init: config.weight_init,
        stopped_early: false,
    };
    if data.is_empty() || config.epochs == 0 {
        return Ok(report);
    }

    let (xs, ys) = data.to_matrices();
    let in_w = data.input_width();
    let out_w = data.target_width();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng_for(config.seed, "train/shuffle");
    let mut optimizer = Optimizer::new(config.optimizer, net);
    let mut bx = Vec::with_capacity(config.batch_size * in_w);
    let mut by = Vec::with_capacity(config.batch_size * out_w);

    for epoch in 1..=config.epochs {
        if config.shuffle_each_epoch {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            bx.clear();
            by.clear();
            for &i in chunk {
                bx.extend_from_slice(&xs[i * in_w..(i + 1) * in_w]);
                by.extend_from_slice(&ys[i * out_w..(i + 1) * out_w]);
            }
            let g = batch_gradients(net, &bx, &by, chunk.len())?;
            if !g.loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    loss: g.loss,
                });
            }
            total += g.loss * chunk.len() as f64;
            optimizer.apply(net, &g.dense, config.learning_rate, config.freeze_bias);
        }
        let loss = total / data.len() as f64;
        if !loss.is_finite() || net.params().iter().any(|p| !p.weight.is_finite()) {
            return Err(Error::Diverged { epoch, loss });
        }
        report.loss_curve.push(loss);
        report.epochs_run = epoch;

        let eval_accuracy = match eval {
            Some(e) if config.eval_every > 0 && epoch % config.eval_every == 0 => {
                let acc = evaluate_accuracy(net, e)?;
                report.eval_curve.push((epoch, acc));
                Some(acc)
            }
            _ => None,
        };
        let stats = EpochStats {
            epoch,
            loss,
            eval_accuracy,
        };
        let stop = observer(&stats, net).is_break() || config.stop_loss.is_some_and(|t| loss <= t);
        if stop {
            report.stopped_early = epoch < config.epochs;
            break;
        }
    }
    Ok(report)
}

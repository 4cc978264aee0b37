//! A small feed-forward network engine: dense layers, ReLU, 1-D max-pool and
//! negation, trained with SGD or Adam on a mean-squared-error loss.

mod matrix;
mod metrics;
mod model_io;
mod train;

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_for;

pub use matrix::Matrix;
pub(crate) use matrix::{matmul_nt, transpose};
pub use metrics::{
    accuracy_report, confusion_matrix, evaluate_accuracy, predict, round_prediction,
    AccuracyReport, ConfusionMatrix,
};
pub use model_io::{load_model, model_from_bytes, model_to_bytes, save_model};
pub use train::{train, train_observed, EpochStats, Loss, OptimizerKind, TrainConfig, TrainReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Dense {
        width: usize,
    },
    Relu,
    /// Non-overlapping windows; the window must divide the input length.
    MaxPool1d {
        window: usize,
    },
    Negate,
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Dense { width } => write!(f, "dense({width})"),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::MaxPool1d { window } => write!(f, "maxpool1d({window})"),
            LayerSpec::Negate => f.write_str("negate"),
        }
    }
}

/// Weights (`out x in`) and bias of one dense layer. Also used for gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl DenseParams {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightInit {
    /// Weights uniform in `±sqrt(1 / fan_in)`, biases zero.
    UniformScaled,
    Zeros,
}

impl fmt::Display for WeightInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightInit::UniformScaled => "uniform_scaled",
            WeightInit::Zeros => "zeros",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input_width: usize,
    layers: Vec<LayerSpec>,
    params: Vec<DenseParams>,
}

impl Network {
    /// Validates the layer stack; dense parameters start at zero.
    pub fn new(input_width: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        if input_width == 0 {
            return Err(Error::Shape("input width must be positive".into()));
        }
        let mut width = input_width;
        let mut params = Vec::new();
        for (i, layer) in layers.iter().enumerate() {
            match *layer {
                LayerSpec::Dense { width: out } => {
                    if out == 0 {
                        return Err(Error::Shape(format!("layer {i}: dense width 0")));
                    }
                    params.push(DenseParams::zeros(width, out));
                    width = out;
                }
                LayerSpec::MaxPool1d { window } => {
                    if window == 0 || width % window != 0 {
                        return Err(Error::Shape(format!(
                            "layer {i}: pool window {window} does not divide width {width}"
                        )));
                    }
                    width /= window;
                }
                LayerSpec::Relu | LayerSpec::Negate => {}
            }
        }
        Ok(Self {
            input_width,
            layers,
            params,
        })
    }

    /// Dense layers of the given widths with ReLU between consecutive ones.
    pub fn dense_stack(input_width: usize, widths: &[usize]) -> Result<Self> {
        let mut layers = Vec::with_capacity(2 * widths.len());
        for (i, &w) in widths.iter().enumerate() {
            if i > 0 {
                layers.push(LayerSpec::Relu);
            }
            layers.push(LayerSpec::Dense { width: w });
        }
        Self::new(input_width, layers)
    }

    /// Encoder: widths `base, base/2, ..., 2, 1` with ReLU in between.
    pub fn encoder(input_width: usize, base_width: usize) -> Result<Self> {
        if base_width == 0 || !base_width.is_power_of_two() {
            return Err(Error::Shape(format!(
                "encoder base width {base_width} is not a power of two"
            )));
        }
        let widths: Vec<usize> =
            std::iter::successors(Some(base_width), |&w| (w > 1).then_some(w / 2)).collect();
        Self::dense_stack(input_width, &widths)
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &[DenseParams] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [DenseParams] {
        &mut self.params
    }

    pub fn output_width(&self) -> usize {
        self.layer_widths()
            .last()
            .copied()
            .unwrap_or(self.input_width)
    }

    /// Width after each layer.
    pub fn layer_widths(&self) -> Vec<usize> {
        let mut width = self.input_width;
        self.layers
            .iter()
            .map(|l| {
                match *l {
                    LayerSpec::Dense { width: w } => width = w,
                    LayerSpec::MaxPool1d { window } => width /= window,
                    _ => {}
                }
                width
            })
            .collect()
    }

    /// `sum(in * out + out)` over dense layers.
    pub fn param_count(&self) -> usize {
        self.params
            .iter()
            .map(|p| p.inputs() * p.outputs() + p.outputs())
            .sum()
    }

    pub fn init_params(&mut self, init: WeightInit, seed: u64) {
        let mut rng = rng_for(seed, "init");
        for p in &mut self.params {
            p.bias.iter_mut().for_each(|b| *b = 0.0);
            match init {
                WeightInit::Zeros => p.weight.as_mut_slice().iter_mut().for_each(|w| *w = 0.0),
                WeightInit::UniformScaled => {
                    let s = (1.0 / p.inputs() as f64).sqrt();
                    for w in p.weight.as_mut_slice() {
                        *w = rng.random_range(-s..s);
                    }
                }
            }
        }
    }

    /// Sets every dense bias except the output layer's.
    pub fn set_hidden_biases(&mut self, value: f64) {
        let hidden = self.params.len().saturating_sub(1);
        for p in &mut self.params[..hidden] {
            p.bias.iter_mut().for_each(|b| *b = value);
        }
    }

    /// Short architecture string, e.g. `16 -> dense(64) -> relu -> dense(1)`.
    pub fn describe(&self) -> String {
        let mut s = self.input_width.to_string();
        for l in &self.layers {
            s.push_str(" -> ");
            s.push_str(&l.to_string());
        }
        s
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(input, 1)
    }

    /// Forward pass over `batch` row-major inputs; returns `batch x output_width`.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        self.check_inputs(inputs, batch)?;
        let mut cur = inputs.to_vec();
        let mut width = self.input_width;
        let mut dense = 0;
        for layer in &self.layers {
            let (next, w) =
                layer_forward(layer, &self.params, &mut dense, &cur, width, batch, None);
            cur = next;
            width = w;
        }
        Ok(cur)
    }

    fn check_inputs(&self, inputs: &[f64], batch: usize) -> Result<()> {
        if inputs.len() != batch * self.input_width {
            return Err(Error::Shape(format!(
                "network expects inputs of width {}, got {} values for batch {batch}",
                self.input_width,
                inputs.len()
            )));
        }
        Ok(())
    }
}

/// Output of one layer; `argmax` is filled for max-pool layers when requested.
fn layer_forward(
    layer: &LayerSpec,
    params: &[DenseParams],
    dense: &mut usize,
    x: &[f64],
    width: usize,
    batch: usize,
    argmax: Option<&mut Vec<usize>>,
) -> (Vec<f64>, usize) {
    match *layer {
        LayerSpec::Dense { width: outputs } => {
            let p = &params[*dense];
            *dense += 1;
            let mut y = vec![0.0; batch * outputs];
            matmul_nt(x, batch, width, p.weight.as_slice(), outputs, &mut y);
            for row in y.chunks_exact_mut(outputs) {
                for (v, b) in row.iter_mut().zip(&p.bias) {
                    *v += b;
                }
            }
            (y, outputs)
        }
        LayerSpec::Relu => (x.iter().map(|&v| v.max(0.0)).collect(), width),
        LayerSpec::Negate => (x.iter().map(|&v| -v).collect(), width),
        LayerSpec::MaxPool1d { window } => {
            let mut idx = Vec::with_capacity(x.len() / window);
            let y = x
                .chunks_exact(window)
                .map(|w| {
                    let mut best = 0;
                    for (i, &v) in w.iter().enumerate() {
                        if v > w[best] {
                            best = i;
                        }
                    }
                    idx.push(best);
                    w[best]
                })
                .collect();
            if let Some(a) = argmax {
                *a = idx;
            }
            (y, width / window)
        }
    }
}

/// Activations recorded during a forward pass for backpropagation.
struct Trace {
    /// Input to each layer.
    inputs: Vec<Vec<f64>>,
    widths: Vec<usize>,
    argmax: Vec<Vec<usize>>,
    output: Vec<f64>,
}

fn forward_trace(net: &Network, x: &[f64], batch: usize) -> Trace {
    let mut inputs = Vec::with_capacity(net.layers.len());
    let mut widths = Vec::with_capacity(net.layers.len());
    let mut argmax = Vec::with_capacity(net.layers.len());
    let mut cur = x.to_vec();
    let mut width = net.input_width;
    let mut dense = 0;
    for layer in &net.layers {
        let mut am = Vec::new();
        let (next, w) = layer_forward(
            layer,
            &net.params,
            &mut dense,
            &cur,
            width,
            batch,
            Some(&mut am),
        );
        inputs.push(std::mem::replace(&mut cur, next));
        widths.push(width);
        argmax.push(am);
        width = w;
    }
    Trace {
        inputs,
        widths,
        argmax,
        output: cur,
    }
}

/// Loss value and parameter gradients for one batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub dense: Vec<DenseParams>,
}

/// Backpropagates `d_out` (gradient of the loss w.r.t. the network output).
fn backprop(net: &Network, trace: &Trace, mut grad: Vec<f64>, batch: usize) -> Vec<DenseParams> {
    let mut dense_idx = net.params.len();
    let mut grads: Vec<Option<DenseParams>> = vec![None; net.params.len()];
    for (li, layer) in net.layers.iter().enumerate().rev() {
        let x = &trace.inputs[li];
        let width = trace.widths[li];
        match *layer {
            LayerSpec::Dense { width: outputs } => {
                dense_idx -= 1;
                let p = &net.params[dense_idx];
                // dW = dY^T X, db = column sums of dY
                let dy_t = transpose(&grad, batch, outputs);
                let x_t = transpose(x, batch, width);
                let mut dw = vec![0.0; outputs * width];
                matmul_nt(&dy_t, outputs, batch, &x_t, width, &mut dw);
                let db: Vec<f64> = dy_t.chunks_exact(batch).map(|c| c.iter().sum()).collect();
                grads[dense_idx] = Some(DenseParams {
                    weight: Matrix::new(outputs, width, dw).expect("shape"),
                    bias: db,
                });
                if li == 0 {
                    break;
                }
                // dX = dY W
                let w_t = transpose(p.weight.as_slice(), outputs, width);
                let mut dx = vec![0.0; batch * width];
                matmul_nt(&grad, batch, outputs, &w_t, width, &mut dx);
                grad = dx;
            }
            LayerSpec::Relu => {
                for (g, &v) in grad.iter_mut().zip(x) {
                    if v <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            LayerSpec::Negate => grad.iter_mut().for_each(|g| *g = -*g),
            LayerSpec::MaxPool1d { window } => {
                let mut dx = vec![0.0; x.len()];
                for (o, (&g, &a)) in grad.iter().zip(&trace.argmax[li]).enumerate() {
                    dx[o * window + a] = g;
                }
                grad = dx;
            }
        }
    }
    grads
        .into_iter()
        .map(|g| g.expect("every dense layer visited"))
        .collect()
}

/// Gradients of the batch MSE `(1/B) sum_i ||f(x_i) - t_i||^2`.
pub fn batch_gradients(
    net: &Network,
    inputs: &[f64],
    targets: &[f64],
    batch: usize,
) -> Result<Gradients> {
    net.check_inputs(inputs, batch)?;
    let out_w = net.output_width();
    if targets.len() != batch * out_w {
        return Err(Error::Shape(format!(
            "network output width {out_w}, got {} targets for batch {batch}",
            targets.len()
        )));
    }
    if batch == 0 {
        return Err(Error::Shape("empty batch".into()));
    }
    let trace = forward_trace(net, inputs, batch);
    let scale = 1.0 / batch as f64;
    let mut loss = 0.0;
    let d_out: Vec<f64> = trace
        .output
        .iter()
        .zip(targets)
        .map(|(&y, &t)| {
            let e = y - t;
            loss += e * e;
            2.0 * scale * e
        })
        .collect();
    let dense = backprop(net, &trace, d_out, batch);
    Ok(Gradients {
        loss: loss * scale,
        dense,
    })
}

/// Single-example gradients.
pub fn backward(net: &Network, input: &[f64], target: &[f64], loss: Loss) -> Result<Gradients> {
    match loss {
        Loss::Mse => batch_gradients(net, input, target, 1),
    }
}

/// Largest relative difference between [`batch_gradients`] and central
/// differences of the batch loss with step `h`. Components where both values
/// are below `1e-7` in magnitude are compared absolutely.
pub fn gradient_check(
    net: &Network,
    inputs: &[f64],
    targets: &[f64],
    batch: usize,
    h: f64,
) -> Result<f64> {
    let analytic = batch_gradients(net, inputs, targets, batch)?;
    let mut probe = net.clone();
    let loss = |p: &Network| batch_gradients(p, inputs, targets, batch).map(|g| g.loss);
    let mut worst = 0.0f64;
    let mut compare = |a: f64, numeric: f64| {
        let scale = a.abs().max(numeric.abs());
        let err = if scale < 1e-7 {
            (a - numeric).abs()
        } else {
            (a - numeric).abs() / scale
        };
        worst = worst.max(err);
    };
    for (li, g) in analytic.dense.iter().enumerate() {
        for k in 0..g.weight.as_slice().len() {
            let w0 = probe.params[li].weight.as_slice()[k];
            probe.params[li].weight.as_mut_slice()[k] = w0 + h;
            let up = loss(&probe)?;
            probe.params[li].weight.as_mut_slice()[k] = w0 - h;
            let down = loss(&probe)?;
            probe.params[li].weight.as_mut_slice()[k] = w0;
            compare(g.weight.as_slice()[k], (up - down) / (2.0 * h));
        }
        for k in 0..g.bias.len() {
            let b0 = probe.params[li].bias[k];
            probe.params[li].bias[k] = b0 + h;
            let up = loss(&probe)?;
            probe.params[li].bias[k] = b0 - h;
            let down = loss(&probe)?;
            probe.params[li].bias[k] = b0;
            compare(g.bias[k], (up - down) / (2.0 * h));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::{sign_encode, TruthTable};
    use crate::transform::{hadamard, walsh_naive};

    fn linear_hadamard(n: u32) -> Network {
        let size = 1 << n;
        let mut net = Network::new(size, vec![LayerSpec::Dense { width: size }]).unwrap();
        let h = hadamard(size).unwrap();
        net.params_mut()[0].weight = Matrix::new(size, size, h.to_f64()).unwrap();
        net
    }

    #[test]
    fn table1_parameter_counts() {
        assert_eq!(Network::encoder(16, 64).unwrap().param_count(), 3881);
        assert_eq!(Network::encoder(32, 512).unwrap().param_count(), 192_169);
        let widths = Network::encoder(16, 64).unwrap().layer_widths();
        assert_eq!(widths, vec![64, 64, 32, 32, 16, 16, 8, 8, 4, 4, 2, 2, 1]);
    }

    #[test]
    fn layer_validation() {
        assert!(Network::new(0, vec![]).is_err());
        assert!(Network::new(4, vec![LayerSpec::Dense { width: 0 }]).is_err());
        assert!(Network::new(6, vec![LayerSpec::MaxPool1d { window: 4 }]).is_err());
        assert!(Network::encoder(16, 48).is_err());
    }

    #[test]
    fn hadamard_layer_computes_spectrum() {
        let net = linear_hadamard(2);
        let f: TruthTable = "0110".parse().unwrap();
        let out = net.forward(&sign_encode(&f).to_f64()).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn hadamard_layer_exhaustive_n4() {
        let net = linear_hadamard(4);
        for v in 0..1u64 << 16 {
            let f = TruthTable::from_u64(4, v).unwrap();
            let out = net.forward(&sign_encode(&f).to_f64()).unwrap();
            let expect: Vec<f64> = walsh_naive(&f)
                .unwrap()
                .values()
                .iter()
                .map(|&x| f64::from(x))
                .collect();
            assert_eq!(out, expect);
        }
    }

    #[test]
    fn elementwise_layers() {
        let relu = Network::new(3, vec![LayerSpec::Relu]).unwrap();
        assert_eq!(
            relu.forward(&[-1.0, 2.0, 0.0]).unwrap(),
            vec![0.0, 2.0, 0.0]
        );
        let pool = Network::new(4, vec![LayerSpec::MaxPool1d { window: 4 }]).unwrap();
        assert_eq!(pool.forward(&[3.0, 1.0, 4.0, 1.0]).unwrap(), vec![4.0]);
        let neg = Network::new(2, vec![LayerSpec::Negate]).unwrap();
        assert_eq!(neg.forward(&[1.5, -2.0]).unwrap(), vec![-1.5, 2.0]);
        assert!(pool.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn batch_forward_matches_single() {
        let mut net = Network::encoder(8, 16).unwrap();
        net.init_params(WeightInit::UniformScaled, 3);
        let xs: Vec<f64> = (0..5 * 8)
            .map(|i| ((i * 7919) % 13) as f64 / 6.0 - 1.0)
            .collect();
        let batch = net.forward_batch(&xs, 5).unwrap();
        for (b, x) in xs.chunks_exact(8).enumerate() {
            assert_eq!(net.forward(x).unwrap(), vec![batch[b]]);
        }
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let mut net = Network::dense_stack(4, &[5, 3]).unwrap();
        net.init_params(WeightInit::UniformScaled, 1);
        let x = [0.5, -1.0, 0.25, 2.0];
        let y = net.forward(&x).unwrap();
        let g = backward(&net, &x, &y, Loss::Mse).unwrap();
        assert_eq!(g.loss, 0.0);
        for p in &g.dense {
            assert!(p.weight.as_slice().iter().all(|&v| v == 0.0));
            assert!(p.bias.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn linear_gradient_closed_form() {
        let mut net = Network::new(3, vec![LayerSpec::Dense { width: 2 }]).unwrap();
        net.init_params(WeightInit::UniformScaled, 5);
        net.params_mut()[0].bias = vec![0.3, -0.2];
        let xs = [1.0, -1.0, 0.5, 0.0, 2.0, -1.5];
        let ts = [0.7, 0.1, -1.0, 2.0];
        let g = batch_gradients(&net, &xs, &ts, 2).unwrap();
        let w = &net.params()[0].weight;
        let b = &net.params()[0].bias;
        for o in 0..2 {
            for i in 0..3 {
                let mut expect = 0.0;
                let mut expect_b = 0.0;
                for s in 0..2 {
                    let x = &xs[s * 3..s * 3 + 3];
                    let y: f64 = (0..3).map(|k| w.get(o, k) * x[k]).sum::<f64>() + b[o];
                    let e = y - ts[s * 2 + o];
                    expect += 2.0 / 2.0 * e * x[i];
                    expect_b += 2.0 / 2.0 * e;
                }
                assert!((g.dense[0].weight.get(o, i) - expect).abs() < 1e-12);
                assert!((g.dense[0].bias[o] - expect_b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn maxpool_ties_route_to_lowest_index() {
        let mut net = Network::new(
            2,
            vec![
                LayerSpec::Dense { width: 4 },
                LayerSpec::MaxPool1d { window: 4 },
            ],
        )
        .unwrap();
        // rows 1 and 3 tie for the maximum
        net.params_mut()[0].weight =
            Matrix::new(4, 2, vec![0.0, 0.0, 1.0, 1.0, 0.5, 0.5, 1.0, 1.0]).unwrap();
        let g = backward(&net, &[1.0, 1.0], &[0.0], Loss::Mse).unwrap();
        let w = &g.dense[0].weight;
        assert!(w.row(1).iter().all(|&v| v != 0.0));
        assert!(w.row(3).iter().all(|&v| v == 0.0));
        assert!(w.row(0).iter().chain(w.row(2)).all(|&v| v == 0.0));
    }

    #[test]
    fn relu_gradient_is_zero_at_zero() {
        let mut net =
            Network::new(1, vec![LayerSpec::Dense { width: 1 }, LayerSpec::Relu]).unwrap();
        net.params_mut()[0].weight = Matrix::new(1, 1, vec![1.0]).unwrap();
        let g = backward(&net, &[0.0], &[1.0], Loss::Mse).unwrap();
        assert_eq!(g.dense[0].bias[0], 0.0);
    }
}

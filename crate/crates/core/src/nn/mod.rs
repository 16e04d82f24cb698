//! Dense feedforward networks with Swish hidden activations and an affine
//! output layer.
//!
//! Parameters are stored per layer as `W^(k)` (`d_{k+1} x d_k`) and `b^(k)`.
//! Batched evaluation keeps samples in rows, so a layer maps `A (N x d_k)` to
//! `A W^T + b`.

pub(crate) mod io;
mod standardize;
mod train;

pub use io::{read_network, read_standardized, write_network, write_standardized};
pub use standardize::{Affine, StandardizedNetwork};
pub use train::{train, Adam, TrainConfig, TrainReport, TrainingSet};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::{Error, Result};

/// `x / (1 + exp(-x))`.
pub fn swish(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn swish_derivative(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s + x * s * (1.0 - s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Swish,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Swish => swish(x),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Swish => swish_derivative(x),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Swish => "swish",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "swish" => Ok(Activation::Swish),
            other => Err(Error::Parse(format!("unknown activation `{other}`"))),
        }
    }
}

/// Layered dense network `d_0 -> d_1 -> ... -> d_{L+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    dims: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    activation: Activation,
}

/// Derivative of the loss with respect to every weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradient {
    pub fn flatten(&self) -> Vec<f64> {
        flatten_params(&self.weights, &self.biases)
    }

    pub fn is_zero(&self) -> bool {
        self.flatten().iter().all(|g| *g == 0.0)
    }
}

fn flatten_params(weights: &[Array2<f64>], biases: &[Array1<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in weights.iter().zip(biases) {
        out.extend(w.iter().copied());
        out.extend(b.iter().copied());
    }
    out
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::Input(format!(
            "a network needs at least input and output widths, got {dims:?}"
        )));
    }
    if dims.contains(&0) {
        return Err(Error::Input(format!("layer widths must be positive: {dims:?}")));
    }
    Ok(())
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        validate_dims(dims)?;
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (d_in, d_out) = (pair[0], pair[1]);
            let limit = (6.0 / (d_in + d_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit)
                .map_err(|e| Error::Numerical(format!("weight init: {e}")))?;
            weights.push(Array2::from_shape_fn((d_out, d_in), |_| dist.sample(rng)));
            biases.push(Array1::zeros(d_out));
        }
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            activation: Activation::Swish,
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        let weights = dims
            .windows(2)
            .map(|p| Array2::zeros((p[1], p[0])))
            .collect();
        let biases = dims.windows(2).map(|p| Array1::zeros(p[1])).collect();
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            activation: Activation::Swish,
        })
    }

    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Input(format!(
                "{} weight matrices but {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut dims = vec![weights[0].ncols()];
        for (k, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != dims[k] {
                return Err(Error::shape("layer input width", dims[k], w.ncols()));
            }
            if b.len() != w.nrows() {
                return Err(Error::shape("bias length", w.nrows(), b.len()));
            }
            dims.push(w.nrows());
        }
        validate_dims(&dims)?;
        let net = Self {
            dims,
            weights,
            biases,
            activation,
        };
        if !net.is_finite() {
            return Err(Error::Input("network parameters must be finite".into()));
        }
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn hidden_layers(&self) -> usize {
        self.dims.len() - 2
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn num_params(&self) -> usize {
        self.dims.windows(2).map(|p| p[1] * (p[0] + 1)).sum()
    }

    /// All parameters, layer by layer: weights row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        flatten_params(&self.weights, &self.biases)
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape("parameter vector", self.num_params(), flat.len()));
        }
        let mut it = flat.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut().for_each(|x| *x = it.next().unwrap());
            b.iter_mut().for_each(|x| *x = it.next().unwrap());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// `||theta||^2` over every weight and bias.
    pub fn param_sq_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.iter().map(|x| x * x).sum::<f64>()).sum::<f64>()
            + self.biases.iter().map(|b| b.iter().map(|x| x * x).sum::<f64>()).sum::<f64>()
    }

    pub fn forward(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), z.len()));
        }
        let last = self.weights.len() - 1;
        let mut a = Array1::from(z.to_vec());
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = w.dot(&a) + b;
            if k < last {
                next.mapv_inplace(|x| self.activation.apply(x));
            }
            a = next;
        }
        Ok(a.to_vec())
    }

    /// Evaluate every row of `inputs`.
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), inputs.ncols()));
        }
        let last = self.weights.len() - 1;
        let mut a = inputs.to_owned();
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut next = a.dot(&w.t()) + b;
            if k < last {
                next.mapv_inplace(|x| self.activation.apply(x));
            }
            a = next;
        }
        Ok(a)
    }

    /// `(1/N) sum_i ||y_i - NN(z_i)||^2 + lambda ||theta||^2`.
    pub fn loss(&self, batch: &TrainingSet, lambda: f64) -> Result<f64> {
        self.check_batch(batch)?;
        let pred = self.forward_batch(batch.inputs.view())?;
        let n = batch.len() as f64;
        let mse = (&pred - &batch.targets).iter().map(|r| r * r).sum::<f64>() / n;
        Ok(mse + lambda * self.param_sq_norm())
    }

    /// Backpropagated gradient of [`Network::loss`].
    pub fn gradient(&self, batch: &TrainingSet, lambda: f64) -> Result<Gradient> {
        self.loss_and_gradient(batch.inputs.view(), batch.targets.view(), lambda)
            .map(|(_, g)| g)
    }

    pub(crate) fn loss_and_gradient(
        &self,
        inputs: ArrayView2<f64>,
        targets: ArrayView2<f64>,
        lambda: f64,
    ) -> Result<(f64, Gradient)> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), inputs.ncols()));
        }
        if targets.ncols() != self.output_dim() {
            return Err(Error::shape("network target", self.output_dim(), targets.ncols()));
        }
        let n = inputs.nrows();
        let last = self.weights.len() - 1;

        // Forward pass keeping pre-activations and activations.
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        let mut pre = Vec::with_capacity(last);
        activations.push(inputs.to_owned());
        for (k, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = activations[k].dot(&w.t()) + b;
            if k < last {
                activations.push(z.mapv(|x| self.activation.apply(x)));
                pre.push(z);
            } else {
                activations.push(z);
            }
        }

        let output = activations.pop().unwrap();
        let residual = output - targets;
        let data_loss = residual.iter().map(|r| r * r).sum::<f64>() / n as f64;
        let loss = data_loss + lambda * self.param_sq_norm();

        let mut delta = residual * (2.0 / n as f64);
        let mut grad_w = vec![Array2::zeros((0, 0)); self.weights.len()];
        let mut grad_b = vec![Array1::zeros(0); self.weights.len()];
        for k in (0..=last).rev() {
            let mut gw = delta.t().dot(&activations[k]);
            let mut gb = delta.sum_axis(Axis(0));
            if lambda != 0.0 {
                gw.scaled_add(2.0 * lambda, &self.weights[k]);
                gb.scaled_add(2.0 * lambda, &self.biases[k]);
            }
            grad_w[k] = gw;
            grad_b[k] = gb;
            if k > 0 {
                let mut back = delta.dot(&self.weights[k]);
                ndarray::Zip::from(&mut back)
                    .and(&pre[k - 1])
                    .for_each(|d, &z| *d *= self.activation.derivative(z));
                delta = back;
            }
        }
        Ok((
            loss,
            Gradient {
                weights: grad_w,
                biases: grad_b,
            },
        ))
    }

    /// Plain gradient-descent update `theta <- theta - step * grad`.
    pub fn descend(&mut self, grad: &Gradient, step: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grad.weights) {
            w.scaled_add(-step, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grad.biases) {
            b.scaled_add(-step, g);
        }
    }

    fn check_batch(&self, batch: &TrainingSet) -> Result<()> {
        if batch.input_dim() != self.input_dim() {
            return Err(Error::shape("network input", self.input_dim(), batch.input_dim()));
        }
        if batch.output_dim() != self.output_dim() {
            return Err(Error::shape("network target", self.output_dim(), batch.output_dim()));
        }
        Ok(())
    }
}

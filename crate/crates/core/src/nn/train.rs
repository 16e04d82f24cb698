use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;

use super::{Gradient, Network};
use crate::rng::seeded;
use crate::{Error, Result};

/// Optimizer and schedule settings for [`train`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Weight of the `||theta||^2` penalty.
    pub regularization: f64,
    /// Mini-batch size; clamped to the training-set size.
    pub batch_size: usize,
    pub epochs: usize,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            regularization: 0.0,
            batch_size: 32,
            epochs: 5000,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults for offline (prior-sample) training.
    pub fn offline() -> Self {
        Self::default()
    }

    /// Defaults for online composite-head training.
    pub fn online() -> Self {
        Self {
            epochs: 2000,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return Err(Error::config("adam_beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::config("adam_beta2", "must lie in [0, 1)"));
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::config("adam_epsilon", "must be positive"));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::config("regularization", "must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        Ok(())
    }
}

/// Paired rows of inputs and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl TrainingSet {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::Input("training set is empty".into()));
        }
        if inputs.nrows() != targets.nrows() {
            return Err(Error::shape("training targets", inputs.nrows(), targets.nrows()));
        }
        if !inputs.iter().chain(targets.iter()).all(|x| x.is_finite()) {
            return Err(Error::Input("training data must be finite".into()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn from_rows(inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_array(inputs)?, rows_to_array(targets)?)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.ncols()
    }

    pub fn select(&self, rows: &[usize]) -> TrainingSet {
        TrainingSet {
            inputs: self.inputs.select(Axis(0), rows),
            targets: self.targets.select(Axis(0), rows),
        }
    }
}

pub(crate) fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let width = rows.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(rows.len() * width);
    for row in rows {
        if row.len() != width {
            return Err(Error::shape("row width", width, row.len()));
        }
        flat.extend_from_slice(row);
    }
    Array2::from_shape_vec((rows.len(), width), flat).map_err(|e| Error::Input(e.to_string()))
}

/// Adam moment state for one network.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    learning_rate: f64,
    step: i32,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl Adam {
    pub fn new(net: &Network, cfg: &TrainConfig) -> Self {
        let m_w: Vec<_> = net.weights().iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        let m_b: Vec<_> = net.biases().iter().map(|b| Array1::zeros(b.raw_dim())).collect();
        Self {
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            epsilon: cfg.adam_epsilon,
            learning_rate: cfg.learning_rate,
            step: 0,
            v_w: m_w.clone(),
            v_b: m_b.clone(),
            m_w,
            m_b,
        }
    }

    pub fn update(&mut self, net: &mut Network, grad: &Gradient) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.learning_rate;
        let apply = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        };
        for k in 0..grad.weights.len() {
            ndarray::Zip::from(&mut net.weights_mut()[k])
                .and(&grad.weights[k])
                .and(&mut self.m_w[k])
                .and(&mut self.v_w[k])
                .for_each(|p, &g, m, v| apply(p, g, m, v));
            ndarray::Zip::from(&mut net.biases_mut()[k])
                .and(&grad.biases[k])
                .and(&mut self.m_b[k])
                .and(&mut self.v_b[k])
                .for_each(|p, &g, m, v| apply(p, g, m, v));
        }
    }
}

/// Result of [`train`]: the final network and the full-set loss after each
/// epoch.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub network: Network,
    /// Full-set loss of the starting parameters.
    pub initial_loss: f64,
    pub loss_history: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_history.last().copied()
    }
}

/// Mini-batch Adam on the regularized mean-squared loss.
///
/// Each epoch reshuffles the rows (seeded) and takes `ceil(N / batch)` steps.
pub fn train(net: &Network, data: &TrainingSet, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if data.input_dim() != net.input_dim() {
        return Err(Error::shape("training inputs", net.input_dim(), data.input_dim()));
    }
    if data.output_dim() != net.output_dim() {
        return Err(Error::shape("training targets", net.output_dim(), data.output_dim()));
    }

    let mut net = net.clone();
    let mut adam = Adam::new(&net, cfg);
    let mut rng = seeded(cfg.rng_seed);
    let n = data.len();
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let full_batch = batch == n;
    let initial_loss = net.loss(data, cfg.regularization)?;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let (_, grad) = if full_batch {
                // Row order does not change the loss; skip the gather.
                net.loss_and_gradient(data.inputs.view(), data.targets.view(), cfg.regularization)?
            } else {
                let sub = data.select(chunk);
                net.loss_and_gradient(sub.inputs.view(), sub.targets.view(), cfg.regularization)?
            };
            adam.update(&mut net, &grad);
        }
        if !net.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(net.loss(data, cfg.regularization)?);
    }

    Ok(TrainReport {
        network: net,
        initial_loss,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_data() -> TrainingSet {
        let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![-1.0 + 2.0 * i as f64 / 49.0]).collect();
        let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![2.0 * x[0]]).collect();
        TrainingSet::from_rows(&xs, &ys).unwrap()
    }

    #[test]
    fn fits_linear_map() {
        let data = linear_data();
        let net = Network::new(&[1, 20, 1], &mut seeded(11)).unwrap();
        let cfg = TrainConfig {
            epochs: 2000,
            rng_seed: 4,
            ..TrainConfig::default()
        };
        let report = train(&net, &data, &cfg).unwrap();
        let mse = report.network.loss(&data, 0.0).unwrap();
        assert!(mse < 1e-4, "mse = {mse}");
        assert_eq!(report.loss_history.len(), 2000);
    }

    #[test]
    fn zero_epochs_is_identity() {
        let data = linear_data();
        let net = Network::new(&[1, 5, 1], &mut seeded(2)).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let report = train(&net, &data, &cfg).unwrap();
        assert_eq!(report.network, net);
        assert!(report.loss_history.is_empty());
    }

    #[test]
    fn deterministic_given_seed() {
        let data = linear_data();
        let net = Network::new(&[1, 8, 1], &mut seeded(2)).unwrap();
        let cfg = TrainConfig {
            epochs: 50,
            batch_size: 7,
            rng_seed: 99,
            ..TrainConfig::default()
        };
        let a = train(&net, &data, &cfg).unwrap();
        let b = train(&net, &data, &cfg).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn divergence_is_reported() {
        let data = linear_data();
        let net = Network::new(&[1, 8, 1], &mut seeded(2)).unwrap();
        let cfg = TrainConfig {
            epochs: 10,
            learning_rate: 1e308,
            ..TrainConfig::default()
        };
        match train(&net, &data, &cfg) {
            Err(Error::Divergence { epoch }) => assert_eq!(epoch, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            adam_beta2: 1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn empty_or_ragged_sets_rejected() {
        assert!(TrainingSet::from_rows(&[], &[]).is_err());
        assert!(TrainingSet::from_rows(&[vec![1.0], vec![1.0, 2.0]], &[vec![0.0], vec![0.0]]).is_err());
        assert!(TrainingSet::from_rows(&[vec![f64::NAN]], &[vec![0.0]]).is_err());
    }
}

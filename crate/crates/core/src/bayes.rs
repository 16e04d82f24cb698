//! Standard-normal prior, Gaussian likelihood and the unnormalized
//! log-posterior over `z`. All additive constants are dropped.

use crate::pde::Observation;
use crate::{Error, ForwardModel, Result};

/// Anything with an (unnormalized) log-density over parameter vectors.
pub trait LogDensity {
    fn dim(&self) -> usize;
    fn log_density(&self, z: &[f64]) -> Result<f64>;
}

/// i.i.d. standard normal prior on `z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prior {
    dim: usize,
}

impl Prior {
    pub fn standard_normal(dim: usize) -> Self {
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `-0.5 |z|^2`.
    pub fn log_prior(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(Error::shape("prior argument", self.dim, z.len()));
        }
        Ok(-0.5 * z.iter().map(|x| x * x).sum::<f64>())
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
    }
}

impl LogDensity for Prior {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, z: &[f64]) -> Result<f64> {
        self.log_prior(z)
    }
}

/// `-0.5 sum_j ((d_j - f_j) / sigma_j)^2`.
pub fn log_likelihood(obs: &Observation, prediction: &[f64]) -> Result<f64> {
    if prediction.len() != obs.data.len() {
        return Err(Error::shape("prediction", obs.data.len(), prediction.len()));
    }
    if obs.noise_sigma.len() != obs.data.len() {
        return Err(Error::shape("noise sigma", obs.data.len(), obs.noise_sigma.len()));
    }
    let mut acc = 0.0;
    for ((d, f), s) in obs.data.iter().zip(prediction).zip(&obs.noise_sigma) {
        let r = (d - f) / s;
        acc += r * r;
    }
    Ok(-0.5 * acc)
}

/// Posterior for a given forward evaluator. With a high-fidelity evaluator
/// every call performs one solve; with a surrogate, none.
#[derive(Debug, Clone)]
pub struct LogPosterior<'a, E> {
    prior: Prior,
    observation: &'a Observation,
    evaluator: E,
}

impl<'a, E: ForwardModel> LogPosterior<'a, E> {
    pub fn new(prior: Prior, observation: &'a Observation, evaluator: E) -> Result<Self> {
        observation.validate()?;
        if evaluator.input_dim() != prior.dim() {
            return Err(Error::shape("evaluator input", prior.dim(), evaluator.input_dim()));
        }
        if evaluator.output_dim() != observation.len() {
            return Err(Error::shape("evaluator output", observation.len(), evaluator.output_dim()));
        }
        Ok(Self {
            prior,
            observation,
            evaluator,
        })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn observation(&self) -> &Observation {
        self.observation
    }

    pub fn evaluator(&self) -> &E {
        &self.evaluator
    }

    pub fn log_posterior(&self, z: &[f64]) -> Result<f64> {
        let lp = self.prior.log_prior(z)?;
        let pred = self.evaluator.evaluate(z)?;
        Ok(log_likelihood(self.observation, &pred)? + lp)
    }

    /// Log-posterior together with the forward prediction it used.
    pub fn evaluate_with_prediction(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let lp = self.prior.log_prior(z)?;
        let pred = self.evaluator.evaluate(z)?;
        Ok((log_likelihood(self.observation, &pred)? + lp, pred))
    }
}

impl<E: ForwardModel> LogDensity for LogPosterior<'_, E> {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_density(&self, z: &[f64]) -> Result<f64> {
        self.log_posterior(z)
    }
}

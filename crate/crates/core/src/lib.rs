//! Adaptive multi-fidelity neural-network surrogates for Bayesian inverse
//! problems.
//!
//! A prior-trained dense network approximates an expensive forward map
//! (here, an elliptic PDE solve observed at sensors). During Metropolis–Hastings
//! sampling the surrogate is checked against the expensive model every `m`
//! steps; when it drifts past a tolerance, a small composite network taking
//! `(z, surrogate(z))` as input is trained on a handful of local high-fidelity
//! evaluations and becomes the new surrogate.
//!
//! Module map:
//!
//! - [`nn`]: dense Swish networks, backprop, Adam, standardization and text IO.
//! - [`pde`]: finite-difference elliptic solver, sensors, synthetic data.
//! - [`field`]: radial-basis and Karhunen–Loève permeability parameterizations.
//! - [`bayes`]: prior, Gaussian likelihood and log-posterior.
//! - [`surrogate`]: low-fidelity and composite surrogates, local refinement.
//! - [`mcmc`]: random-walk MH, the refinement indicator and the adaptive loop.
//! - [`experiment`]: config files, end-to-end runs and posterior summaries.

pub mod bayes;
pub mod error;
pub mod experiment;
pub mod field;
pub mod mcmc;
pub mod nn;
pub mod pde;
pub mod rng;
pub mod surrogate;

pub use error::{Error, Result};

/// A forward map `z -> y` from parameter space to observation space.
///
/// Implemented by the high-fidelity [`pde::ForwardProblem`] (each call is one
/// PDE solve) and by [`surrogate::SurrogateModel`] (never solves a PDE).
pub trait ForwardModel {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>>;
}

impl<T: ForwardModel + ?Sized> ForwardModel for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }
    fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        (**self).evaluate(z)
    }
}

/// Max-norm of a vector.
pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

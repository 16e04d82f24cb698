//! Random-walk Metropolis–Hastings and the adaptive multi-fidelity loop.
//!
//! The adaptive sampler alternates surrogate-only subchains of length `m - 1`
//! with a high-fidelity check: the last state `z-` and a fresh proposal `z+`
//! are both solved, one of them (`z~`) is picked by a high-fidelity
//! acceptance draw, and when the surrogate's relative max-norm mismatch at
//! `z~` exceeds `tol` the surrogate is refined on a ball around `z~`.

mod output;

pub use output::{read_samples, write_refinements, write_samples};

use std::cell::Cell;

use log::warn;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bayes::{log_likelihood, LogDensity, LogPosterior, Prior};
use crate::nn::TrainConfig;
use crate::pde::Observation;
use crate::rng::{seeded, SeededRng};
use crate::surrogate::{LocalBall, RefineMode, Refiner, SurrogateModel};
use crate::{max_norm, Error, ForwardModel, Result};

/// Symmetric Gaussian random-walk proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSpec {
    step: Vec<f64>,
}

impl ProposalSpec {
    /// Same step size in every coordinate.
    pub fn isotropic(dim: usize, step_sigma: f64) -> Result<Self> {
        Self::per_coordinate(vec![step_sigma; dim])
    }

    pub fn per_coordinate(step: Vec<f64>) -> Result<Self> {
        if step.is_empty() || !step.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::config("step_sigma", "must be positive"));
        }
        Ok(Self { step })
    }

    pub fn dim(&self) -> usize {
        self.step.len()
    }

    pub fn step(&self) -> &[f64] {
        &self.step
    }

    pub fn propose<R: Rng + ?Sized>(&self, current: &[f64], rng: &mut R) -> Vec<f64> {
        current
            .iter()
            .zip(&self.step)
            .map(|(z, s)| {
                let xi: f64 = rng.sample(StandardNormal);
                z + s * xi
            })
            .collect()
    }
}

/// MH decision in log space given a uniform draw `u`. A non-finite proposal
/// density always rejects.
pub fn mh_accept(log_current: f64, log_proposed: f64, u: f64) -> bool {
    if !log_proposed.is_finite() {
        return false;
    }
    log_proposed >= log_current || u.ln() < log_proposed - log_current
}

/// A chain position with its cached log-density.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub z: Vec<f64>,
    pub log_density: f64,
}

impl ChainState {
    pub fn new<D: LogDensity + ?Sized>(target: &D, z: Vec<f64>) -> Result<Self> {
        let log_density = target.log_density(&z)?;
        if !log_density.is_finite() {
            return Err(Error::Numerical("initial state has non-finite log-density".into()));
        }
        Ok(Self { z, log_density })
    }
}

/// Log-density at a proposal; solver breakdown and non-finite values count
/// as `-inf` so the proposal is rejected.
fn proposal_log_density<D: LogDensity + ?Sized>(target: &D, z: &[f64]) -> Result<f64> {
    match target.log_density(z) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Ok(f64::NEG_INFINITY),
        Err(Error::Solver(msg) | Error::Numerical(msg)) => {
            warn!("proposal rejected after evaluation failure: {msg}");
            Ok(f64::NEG_INFINITY)
        }
        Err(e) => Err(e),
    }
}

/// One random-walk MH transition. Returns whether the proposal was accepted.
pub fn mh_step<D: LogDensity + ?Sized, R: Rng + ?Sized>(
    target: &D,
    state: &mut ChainState,
    proposal: &ProposalSpec,
    rng: &mut R,
) -> Result<bool> {
    let z_star = proposal.propose(&state.z, rng);
    let lp_star = proposal_log_density(target, &z_star)?;
    let u: f64 = rng.random();
    let accepted = mh_accept(state.log_density, lp_star, u);
    if accepted {
        state.z = z_star;
        state.log_density = lp_star;
    }
    Ok(accepted)
}

/// One retained chain state.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub z: Vec<f64>,
    /// 1-based position in the chain.
    pub iteration: usize,
    pub accepted: bool,
    pub surrogate_depth: usize,
}

/// One high-fidelity check of the adaptive loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementEvent {
    pub outer_iter: usize,
    pub z_tilde: Vec<f64>,
    /// `None` when the indicator was degenerate.
    pub err: Option<f64>,
    pub triggered: bool,
    pub q_used: usize,
    /// Online high-fidelity evaluations so far, this check included.
    pub evals_total: u64,
}

/// Everything a chain produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainStore {
    pub samples: Vec<SampleRecord>,
    pub accepted: usize,
    pub proposed: usize,
    pub refinements: Vec<RefinementEvent>,
    /// High-fidelity evaluations performed by the sampler itself.
    pub high_fidelity_evals: u64,
}

impl ChainStore {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn num_refinements(&self) -> usize {
        self.refinements.iter().filter(|e| e.triggered).count()
    }

    /// States after discarding the leading `fraction` of the chain.
    pub fn retained(&self, fraction: f64) -> &[SampleRecord] {
        let skip = ((self.samples.len() as f64) * fraction.clamp(0.0, 1.0)).floor() as usize;
        &self.samples[skip..]
    }

    fn push(&mut self, z: &[f64], accepted: bool, depth: usize) {
        self.proposed += 1;
        self.accepted += accepted as usize;
        self.samples.push(SampleRecord {
            z: z.to_vec(),
            iteration: self.samples.len() + 1,
            accepted,
            surrogate_depth: depth,
        });
    }
}

/// Plain random-walk MH for `steps` transitions (direct or fixed-surrogate
/// sampling).
pub fn run_chain<D: LogDensity + ?Sized>(
    target: &D,
    z0: Vec<f64>,
    proposal: &ProposalSpec,
    steps: usize,
    seed: u64,
) -> Result<ChainStore> {
    if z0.len() != target.dim() || proposal.dim() != target.dim() {
        return Err(Error::shape("initial state", target.dim(), z0.len()));
    }
    let mut rng = seeded(seed);
    let mut state = ChainState::new(target, z0)?;
    let mut store = ChainStore::default();
    store.samples.reserve(steps);
    for _ in 0..steps {
        let accepted = mh_step(target, &mut state, proposal, &mut rng)?;
        store.push(&state.z, accepted, 0);
    }
    Ok(store)
}

/// `|f_H - f_L|_inf / |f_H|_inf`.
pub fn error_indicator(f_high: &[f64], f_low: &[f64]) -> Result<f64> {
    if f_high.len() != f_low.len() {
        return Err(Error::shape("indicator inputs", f_high.len(), f_low.len()));
    }
    let denom = max_norm(f_high);
    if denom == 0.0 {
        return Err(Error::DegenerateIndicator);
    }
    let diff = f_high.iter().zip(f_low).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(diff / denom)
}

/// `|mean - reference|_inf / |reference|_inf` over grid fields.
pub fn rel_error(mean: &[f64], reference: &[f64]) -> Result<f64> {
    if mean.len() != reference.len() {
        return Err(Error::shape("field", reference.len(), mean.len()));
    }
    let denom = max_norm(reference);
    if denom == 0.0 {
        return Err(Error::Numerical("reference field has zero max-norm".into()));
    }
    let diff = mean.iter().zip(reference).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(diff / denom)
}

/// Outcome of the high-fidelity selection between `z-` and `z+`.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub z_tilde: Vec<f64>,
    /// High-fidelity prediction at `z_tilde` (reused by the indicator).
    pub f_high: Vec<f64>,
    pub beta: f64,
    pub chose_minus: bool,
}

/// Choose `z~` from `{z-, z+}` with two high-fidelity solves.
///
/// Default: `beta = min(1, pi(z-) / pi(z+))` and `z~ = z-` when `s < beta`.
/// With `flipped`, the ratio is inverted and a successful draw picks `z+`.
pub fn refinement_select<H: ForwardModel, R: Rng + ?Sized>(
    lp_high: &LogPosterior<'_, H>,
    z_minus: &[f64],
    z_plus: &[f64],
    flipped: bool,
    rng: &mut R,
) -> Result<Selection> {
    let (lp_minus, f_minus) = lp_high.evaluate_with_prediction(z_minus)?;
    let (lp_plus, f_plus) = lp_high.evaluate_with_prediction(z_plus)?;
    let log_ratio = if flipped { lp_plus - lp_minus } else { lp_minus - lp_plus };
    let beta = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
    let s: f64 = rng.random();
    let first = s < beta;
    let chose_minus = if flipped { !first } else { first };
    let (z_tilde, f_high) = if chose_minus {
        (z_minus.to_vec(), f_minus)
    } else {
        (z_plus.to_vec(), f_plus)
    };
    Ok(Selection {
        z_tilde,
        f_high,
        beta,
        chose_minus,
    })
}

/// Settings of the adaptive loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    /// States per outer iteration (`m`).
    pub subchain_length: usize,
    /// Outer iterations (`I_max`).
    pub max_corrections: usize,
    pub tol: f64,
    pub radius: f64,
    /// High-fidelity samples per refinement.
    pub q: usize,
    pub head_hidden: Vec<usize>,
    pub train: TrainConfig,
    pub mode: RefineMode,
    pub indicator_ratio_flipped: bool,
    pub seed: u64,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            subchain_length: 1000,
            max_corrections: 50,
            tol: 0.1,
            radius: 0.2,
            q: 10,
            head_hidden: vec![50],
            train: TrainConfig::online(),
            mode: RefineMode::default(),
            indicator_ratio_flipped: false,
            seed: 0,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subchain_length < 2 {
            return Err(Error::config("subchain_length", "must be at least 2"));
        }
        if self.max_corrections < 1 {
            return Err(Error::config("max_corrections", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("tol", "must be positive"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::config("radius", "must be positive"));
        }
        if self.q < 2 {
            return Err(Error::config("q", "must be at least 2"));
        }
        self.train.validate()
    }
}

/// Final state of an adaptive run.
#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub store: ChainStore,
    pub surrogate: SurrogateModel,
}

/// Forward model wrapper that tallies calls.
struct Counted<'a, H> {
    inner: &'a H,
    calls: Cell<u64>,
}

impl<H: ForwardModel> ForwardModel for Counted<'_, H> {
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }
    fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.calls.set(self.calls.get() + 1);
        self.inner.evaluate(z)
    }
}

fn surrogate_log_post(prior: &Prior, obs: &Observation, model: &SurrogateModel, z: &[f64]) -> Result<f64> {
    Ok(prior.log_prior(z)? + log_likelihood(obs, &model.predict(z)?)?)
}

struct SurrogateTarget<'a> {
    prior: &'a Prior,
    obs: &'a Observation,
    model: &'a SurrogateModel,
}

impl LogDensity for SurrogateTarget<'_> {
    fn dim(&self) -> usize {
        self.prior.dim()
    }
    fn log_density(&self, z: &[f64]) -> Result<f64> {
        surrogate_log_post(self.prior, self.obs, self.model, z)
    }
}

/// The adaptive multi-fidelity MH sampler.
///
/// Online high-fidelity cost is `2 * max_corrections + q * refinements`
/// evaluations of `high`, recorded in `store.high_fidelity_evals`.
pub fn adaptive_run<H: ForwardModel>(
    high: &H,
    observation: &Observation,
    prior: &Prior,
    initial: SurrogateModel,
    proposal: &ProposalSpec,
    cfg: &AdaptiveConfig,
    z0: Vec<f64>,
) -> Result<AdaptiveRun> {
    cfg.validate()?;
    let n = prior.dim();
    if z0.len() != n || proposal.dim() != n || initial.input_dim() != n {
        return Err(Error::shape("adaptive run parameter dimension", n, z0.len()));
    }
    let counted = Counted {
        inner: high,
        calls: Cell::new(0),
    };
    let lp_high = LogPosterior::new(*prior, observation, &counted)?;
    let mut refiner = Refiner::new(cfg.q, cfg.head_hidden.clone(), cfg.train.clone(), cfg.mode)?;
    let mut rng: SeededRng = seeded(cfg.seed);
    let mut model = initial;

    let mut state = {
        let target = SurrogateTarget {
            prior,
            obs: observation,
            model: &model,
        };
        ChainState::new(&target, z0)?
    };
    let mut store = ChainStore::default();
    store.samples.reserve(cfg.subchain_length * cfg.max_corrections);

    for outer in 1..=cfg.max_corrections {
        {
            let target = SurrogateTarget {
                prior,
                obs: observation,
                model: &model,
            };
            for _ in 0..cfg.subchain_length - 1 {
                let accepted = mh_step(&target, &mut state, proposal, &mut rng)?;
                store.push(&state.z, accepted, model.depth());
            }
        }

        let z_star = proposal.propose(&state.z, &mut rng);
        let sel = refinement_select(&lp_high, &state.z, &z_star, cfg.indicator_ratio_flipped, &mut rng)?;
        let f_low = model.predict(&sel.z_tilde)?;
        let err = match error_indicator(&sel.f_high, &f_low) {
            Ok(e) => Some(e),
            Err(Error::DegenerateIndicator) => {
                warn!("outer iteration {outer}: zero high-fidelity output, refinement skipped");
                None
            }
            Err(e) => return Err(e),
        };
        let triggered = err.is_some_and(|e| e > cfg.tol);
        if triggered {
            let ball = LocalBall::new(sel.z_tilde.clone(), cfg.radius)?;
            model = refiner
                .refine(model, &counted, &ball, &mut rng)
                .map_err(|e| Error::Refinement {
                    iteration: outer,
                    source: Box::new(e),
                })?;
            state.log_density = surrogate_log_post(prior, observation, &model, &state.z)?;
        }
        store.refinements.push(RefinementEvent {
            outer_iter: outer,
            z_tilde: sel.z_tilde,
            err,
            triggered,
            q_used: if triggered { cfg.q } else { 0 },
            evals_total: counted.calls.get(),
        });

        let target = SurrogateTarget {
            prior,
            obs: observation,
            model: &model,
        };
        let lp_star = proposal_log_density(&target, &z_star)?;
        let u: f64 = rng.random();
        let accepted = mh_accept(state.log_density, lp_star, u);
        if accepted {
            state.z = z_star;
            state.log_density = lp_star;
        }
        store.push(&state.z, accepted, model.depth());
    }

    store.high_fidelity_evals = counted.calls.get();
    Ok(AdaptiveRun {
        store,
        surrogate: model,
    })
}

use std::cell::Cell;

use mfsurrogate::bayes::{LogDensity, LogPosterior, Prior};
use mfsurrogate::experiment::rbf9_truth;
use mfsurrogate::field::{Permeability, RbfField};
use mfsurrogate::mcmc::{adaptive_run, refinement_select, run_chain, AdaptiveConfig, ChainStore, ProposalSpec};
use mfsurrogate::nn::TrainConfig;
use mfsurrogate::pde::{generate_data, ForwardProblem, Grid, NoiseSpec, Observation, Sensors};
use mfsurrogate::rng::seeded;
use mfsurrogate::surrogate::{build_low_fidelity, SurrogateModel};
use mfsurrogate::{ForwardModel, Result};

struct Gauss2;

impl LogDensity for Gauss2 {
    fn dim(&self) -> usize {
        2
    }
    fn log_density(&self, z: &[f64]) -> Result<f64> {
        Ok(-0.5 * (z[0] * z[0] + z[1] * z[1]))
    }
}

#[test]
fn random_walk_recovers_gaussian_moments() {
    let proposal = ProposalSpec::isotropic(2, 1.0).unwrap();
    let store = run_chain(&Gauss2, vec![0.0, 0.0], &proposal, 100_000, 42).unwrap();
    assert_eq!(store.len(), 100_000);
    for k in 0..2 {
        let xs: Vec<f64> = store.samples.iter().map(|s| s.z[k]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }
}

/// `f(z) = z` with a call counter.
struct Identity {
    dim: usize,
    calls: Cell<u64>,
}

impl ForwardModel for Identity {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.calls.set(self.calls.get() + 1);
        Ok(z.to_vec())
    }
}

fn zero_data(dim: usize) -> Observation {
    Observation {
        data: vec![0.0; dim],
        sensors: vec![[0.5, 0.5]; dim],
        noise_sigma: vec![1.0; dim],
        noise_level: None,
    }
}

#[test]
fn selection_prefers_minus_as_written() {
    let obs = zero_data(2);
    let model = Identity {
        dim: 2,
        calls: Cell::new(0),
    };
    let lp = LogPosterior::new(Prior::standard_normal(2), &obs, &model).unwrap();
    let mut rng = seeded(1);
    for _ in 0..50 {
        // much better z-: beta = 1
        let s = refinement_select(&lp, &[0.0, 0.0], &[5.0, 5.0], false, &mut rng).unwrap();
        assert_eq!(s.beta, 1.0);
        assert!(s.chose_minus);
        assert_eq!(s.z_tilde, vec![0.0, 0.0]);
        // equal posteriors: still z-
        let s = refinement_select(&lp, &[1.0, 0.0], &[0.0, 1.0], false, &mut rng).unwrap();
        assert_eq!(s.beta, 1.0);
        assert_eq!(s.z_tilde, vec![1.0, 0.0]);
        assert_eq!(s.f_high, vec![1.0, 0.0]);
        // conventional orientation picks z+ at equal posteriors
        let s = refinement_select(&lp, &[1.0, 0.0], &[0.0, 1.0], true, &mut rng).unwrap();
        assert_eq!(s.z_tilde, vec![0.0, 1.0]);
    }
    assert_eq!(model.calls.get(), 50 * 3 * 2);
}

#[test]
fn selection_beta_follows_the_ratio() {
    let obs = zero_data(1);
    let model = Identity {
        dim: 1,
        calls: Cell::new(0),
    };
    let lp = LogPosterior::new(Prior::standard_normal(1), &obs, &model).unwrap();
    // lp(z) = -z^2, so beta = exp(lp(1) - lp(0)) = e^-1 when z- = 1, z+ = 0
    let mut rng = seeded(2);
    let n = 20_000;
    let mut minus = 0;
    for _ in 0..n {
        let s = refinement_select(&lp, &[1.0], &[0.0], false, &mut rng).unwrap();
        assert!((s.beta - (-1.0f64).exp()).abs() < 1e-15);
        minus += s.chose_minus as usize;
    }
    let frac = minus as f64 / n as f64;
    assert!((frac - (-1.0f64).exp()).abs() < 0.015, "{frac}");
}

struct Fixture {
    problem: ForwardProblem,
    observation: Observation,
    base: SurrogateModel,
}

/// RBF problem on a coarse grid with a cheaply trained surrogate.
fn small_fixture() -> Fixture {
    let rbf = Permeability::Rbf(RbfField::standard());
    let problem = ForwardProblem::new(Grid::new(15).unwrap(), rbf.clone(), Sensors::standard()).unwrap();
    let fine = ForwardProblem::new(Grid::new(31).unwrap(), rbf, Sensors::standard()).unwrap();
    let observation =
        generate_data(&fine, &problem.grid(), &rbf9_truth(), NoiseSpec::Relative { delta: 0.05 }, 2019).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        ..TrainConfig::offline()
    };
    let base = build_low_fidelity(&problem, &Prior::standard_normal(9), 20, &[20, 20], &cfg, 5)
        .unwrap()
        .model;
    Fixture {
        problem,
        observation,
        base,
    }
}

fn small_config(tol: f64, seed: u64) -> AdaptiveConfig {
    AdaptiveConfig {
        subchain_length: 25,
        max_corrections: 8,
        tol,
        q: 4,
        head_hidden: vec![10],
        train: TrainConfig {
            epochs: 100,
            ..TrainConfig::online()
        },
        seed,
        ..AdaptiveConfig::default()
    }
}

fn run(f: &Fixture, cfg: &AdaptiveConfig) -> ChainStore {
    let proposal = ProposalSpec::isotropic(9, 0.1).unwrap();
    adaptive_run(&f.problem, &f.observation, &Prior::standard_normal(9), f.base.clone(), &proposal, cfg, vec![0.0; 9])
        .unwrap()
        .store
}

#[test]
fn infinite_tolerance_never_refines() {
    let f = small_fixture();
    let before = f.problem.evaluations();
    let store = run(&f, &small_config(f64::INFINITY, 3));
    assert_eq!(store.num_refinements(), 0);
    assert_eq!(store.high_fidelity_evals, 16);
    assert_eq!(f.problem.evaluations() - before, 16);
    assert_eq!(store.len(), 8 * 25);
    assert!(store.samples.iter().all(|s| s.surrogate_depth == 0));
}

#[test]
fn eval_accounting_reconciles_and_subchains_are_pure() {
    let f = small_fixture();
    let cfg = small_config(1e-3, 4);
    let before = f.problem.evaluations();
    let store = run(&f, &cfg);
    let refinements = store.num_refinements() as u64;
    assert!(refinements > 0);
    let expected = 2 * cfg.max_corrections as u64 + cfg.q as u64 * refinements;
    assert_eq!(store.high_fidelity_evals, expected);
    assert_eq!(f.problem.evaluations() - before, expected);
    // each check costs 2 solves plus q when it refines; subchains add none
    let mut last = 0;
    for e in &store.refinements {
        let step = e.evals_total - last;
        assert_eq!(step, 2 + if e.triggered { cfg.q as u64 } else { 0 });
        last = e.evals_total;
    }
    // depth of the stored states follows the refinement log
    let mut depth = 0;
    for (n, e) in store.refinements.iter().enumerate() {
        let block = &store.samples[n * cfg.subchain_length..(n + 1) * cfg.subchain_length];
        assert!(block[..cfg.subchain_length - 1].iter().all(|s| s.surrogate_depth == depth));
        depth += e.triggered as usize;
        assert_eq!(block[cfg.subchain_length - 1].surrogate_depth, depth);
    }
    let iters: Vec<usize> = store.samples.iter().map(|s| s.iteration).collect();
    assert_eq!(iters, (1..=store.len()).collect::<Vec<_>>());
}

#[test]
fn adaptive_run_is_deterministic() {
    let f = small_fixture();
    let cfg = small_config(0.05, 9);
    let a = run(&f, &cfg);
    let b = run(&f, &cfg);
    assert_eq!(a, b);
    let c = run(&f, &small_config(0.05, 10));
    assert_ne!(a.samples, c.samples);
}

/// Over ten Example-1 runs, late refinements see smaller indicator values
/// than early ones.
#[test]
fn indicator_shrinks_as_the_run_proceeds() {
    let rbf = Permeability::Rbf(RbfField::standard());
    let problem = ForwardProblem::new(Grid::new(31).unwrap(), rbf.clone(), Sensors::standard()).unwrap();
    let fine = ForwardProblem::new(Grid::new(63).unwrap(), rbf, Sensors::standard()).unwrap();
    let observation =
        generate_data(&fine, &problem.grid(), &rbf9_truth(), NoiseSpec::Relative { delta: 0.05 }, 2019).unwrap();
    let prior = Prior::standard_normal(9);
    let base = build_low_fidelity(&problem, &prior, 50, &[40; 4], &TrainConfig::offline(), 1)
        .unwrap()
        .model;
    let proposal = ProposalSpec::isotropic(9, 0.1).unwrap();
    let (mut early, mut late) = (Vec::new(), Vec::new());
    for seed in 0..10 {
        let cfg = AdaptiveConfig {
            subchain_length: 500,
            max_corrections: 20,
            seed,
            ..AdaptiveConfig::default()
        };
        let store = adaptive_run(&problem, &observation, &prior, base.clone(), &proposal, &cfg, vec![0.0; 9])
            .unwrap()
            .store;
        for e in store.refinements.iter().filter(|e| e.triggered) {
            let err = e.err.unwrap();
            if e.outer_iter <= 10 {
                early.push(err);
            } else {
                late.push(err);
            }
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (a, b) = (median(&mut early), median(&mut late));
    assert!(b <= a, "early median {a}, late median {b}");
}

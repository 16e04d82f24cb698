//! End-to-end experiments: data generation, offline training, sampling with
//! one of three methods, posterior summaries and artifact files.
//!
//! [`Setup`] holds everything derived from an [`ExperimentConfig`] (forward
//! problems, synthetic data, truth); [`run_experiment`] strings the steps
//! together and writes the artifacts.

mod config;
mod summary;

pub use config::{parse_key_values, Example, ExperimentConfig, Method, Reference};
pub use summary::{read_field_matrix, summarize, write_field_matrix, FieldAccumulator, PosteriorSummary};

use std::path::{Path, PathBuf};

use log::info;
use rand::Rng;
use serde_json::json;

use crate::bayes::{LogPosterior, Prior};
use crate::field::{read_kl_cache, write_kl_cache, KlField, KlKey, Permeability, RbfField};
use crate::mcmc::{adaptive_run, rel_error, run_chain, write_refinements, write_samples, ChainStore, ProposalSpec};
use crate::nn::io::parse_floats;
use crate::pde::{generate_data, read_data, write_data, DataMetadata, ForwardProblem, Grid, Observation, Sensors};
use crate::rng::{derive_seed, seeded};
use crate::surrogate::{build_low_fidelity, read_surrogate, write_surrogate, SurrogateModel};
use crate::{Error, Result};

const RBF9_TRUTH: &str = include_str!("../../data/rbf9_truth.txt");

/// The bundled nine-weight truth for the `rbf9` example.
pub fn rbf9_truth() -> Vec<f64> {
    let kv = parse_key_values(RBF9_TRUTH).expect("bundled truth file parses");
    parse_floats(&kv["z_true"].replace(',', " ")).expect("bundled truth values parse")
}

/// `n` independent draws from `U(-5, 5)`; how the bundled truth was made.
pub fn draw_uniform_truth(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n).map(|_| rng.random_range(-5.0..5.0)).collect()
}

/// KL basis for `cfg`, read from or written to the cache directory when one
/// is configured.
pub fn kl_basis(cfg: &ExperimentConfig) -> Result<KlField> {
    let grid = Grid::new(cfg.inversion_grid)?;
    let key = KlKey {
        resolution: cfg.inversion_grid,
        length_scale: cfg.kl_length_scale,
        variance: cfg.kl_variance,
        modes: cfg.kl_modes,
    };
    let Some(dir) = &cfg.kl_cache_dir else {
        return KlField::build(&grid, key.modes, key.length_scale, key.variance);
    };
    let path = kl_cache_path(dir, &key);
    if path.exists() {
        info!("reading KL basis from {}", path.display());
        return read_kl_cache(&std::fs::read_to_string(&path)?, &key);
    }
    let field = KlField::build(&grid, key.modes, key.length_scale, key.variance)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(&path, write_kl_cache(&field))?;
    Ok(field)
}

pub fn kl_cache_path(dir: &Path, key: &KlKey) -> PathBuf {
    dir.join(format!(
        "kl_m{}_l{}_v{}_n{}.txt",
        key.resolution, key.length_scale, key.variance, key.modes
    ))
}

/// Problems, data and truth for one configuration.
#[derive(Debug)]
pub struct Setup {
    pub config: ExperimentConfig,
    /// Inversion-grid forward model; its counter is the online/offline cost.
    pub problem: ForwardProblem,
    /// Finer grid used only to synthesize data.
    pub data_problem: ForwardProblem,
    pub observation: Observation,
    pub prior: Prior,
    pub z_true: Vec<f64>,
    /// `kappa(z_true)` on the inversion grid.
    pub truth_kappa: Vec<f64>,
    /// Field that `rel_error` is measured against.
    pub reference: Vec<f64>,
}

/// Chain plus the final surrogate, when one was used.
#[derive(Debug, Clone)]
pub struct Sampled {
    pub store: ChainStore,
    pub surrogate: Option<SurrogateModel>,
    /// Inversion-grid solves performed while sampling.
    pub online_evals: u64,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let inv = Grid::new(cfg.inversion_grid)?;
        let fine = Grid::new(cfg.data_grid)?;
        let permeability = match cfg.example {
            Example::Rbf9 | Example::Rbf9PriorTruth => Permeability::Rbf(RbfField::standard()),
            Example::KlField => Permeability::Kl(kl_basis(cfg)?),
        };
        let problem = ForwardProblem::new(inv, permeability.clone(), Sensors::standard())?;
        let data_problem = ForwardProblem::new(fine, permeability, Sensors::standard())?;
        let prior = Prior::standard_normal(cfg.parameter_dim());

        let z_true = match (&cfg.truth, cfg.example) {
            (Some(t), _) => t.clone(),
            (None, Example::Rbf9) => rbf9_truth(),
            (None, _) => prior.sample(&mut seeded(cfg.truth_seed)),
        };
        let observation = match &cfg.data_file {
            Some(path) => read_data(path, &path.with_extension("meta"))?.0,
            None => generate_data(&data_problem, &inv, &z_true, cfg.noise, cfg.data_seed)?,
        };
        let truth_kappa = problem.kappa(&z_true)?;
        let reference = match &cfg.reference {
            Reference::Truth => truth_kappa.clone(),
            Reference::MeanFile(path) => {
                let r = read_field_matrix(path)?;
                if r.len() != inv.num_nodes() {
                    return Err(Error::config("reference", "field size does not match the inversion grid"));
                }
                r
            }
        };
        Ok(Self {
            config: cfg.clone(),
            problem,
            data_problem,
            observation,
            prior,
            z_true,
            truth_kappa,
            reference,
        })
    }

    pub fn provenance(&self) -> String {
        format!("config_hash={} seed={}", self.config.hash(), self.config.seed)
    }

    /// Metadata describing the synthetic data.
    pub fn data_metadata(&self) -> DataMetadata {
        DataMetadata {
            seed: self.config.data_seed,
            noise: self.config.noise,
            data_grid: self.config.data_grid,
            inversion_grid: self.config.inversion_grid,
            z_true: self.z_true.clone(),
            config_hash: self.config.hash(),
        }
    }

    /// The prior-trained surrogate: loaded from `offline_model` when set,
    /// otherwise trained on `n_offline` fresh solves.
    pub fn offline_surrogate(&self) -> Result<SurrogateModel> {
        if let Some(path) = &self.config.offline_model {
            let model = read_surrogate(&std::fs::read_to_string(path)?)?;
            if model.input_dim() != self.prior.dim() || model.output_dim() != self.observation.len() {
                return Err(Error::config("offline_model", "surrogate widths do not match the problem"));
            }
            return Ok(model);
        }
        let build = build_low_fidelity(
            &self.problem,
            &self.prior,
            self.config.n_offline,
            &self.config.lf_hidden,
            &self.config.offline_train(),
            derive_seed(self.config.seed, 1),
        )?;
        if let Some(loss) = build.report.final_loss() {
            info!("offline training finished, standardized loss {loss:.3e}");
        }
        Ok(build.model)
    }

    fn proposal(&self) -> Result<ProposalSpec> {
        ProposalSpec::isotropic(self.prior.dim(), self.config.step_sigma)
    }

    /// Run `method`. `offline` is required for the surrogate methods.
    pub fn sample(&self, method: Method, offline: Option<SurrogateModel>) -> Result<Sampled> {
        let cfg = &self.config;
        let z0 = vec![0.0; self.prior.dim()];
        let proposal = self.proposal()?;
        let chain_seed = derive_seed(cfg.seed, 2);
        let before = self.problem.evaluations();
        let need_model = || offline.clone().ok_or_else(|| Error::Input(format!("method {} needs a surrogate", method.name())));
        let (store, surrogate) = match method {
            Method::Direct => {
                let lp = LogPosterior::new(self.prior, &self.observation, &self.problem)?;
                (run_chain(&lp, z0, &proposal, cfg.chain_length, chain_seed)?, None)
            }
            Method::Dnn => {
                let model = need_model()?;
                let lp = LogPosterior::new(self.prior, &self.observation, &model)?;
                let store = run_chain(&lp, z0, &proposal, cfg.chain_length, chain_seed)?;
                (store, Some(model))
            }
            Method::Adnn => {
                let run = adaptive_run(
                    &self.problem,
                    &self.observation,
                    &self.prior,
                    need_model()?,
                    &proposal,
                    &cfg.adaptive(),
                    z0,
                )?;
                (run.store, Some(run.surrogate))
            }
        };
        Ok(Sampled {
            store,
            surrogate,
            online_evals: self.problem.evaluations() - before,
        })
    }

    pub fn summarize(&self, store: &ChainStore) -> Result<PosteriorSummary> {
        summarize(store, self.config.burn_in, self.problem.nodal())
    }

    /// `rel_error` of a posterior-mean field against the configured reference.
    pub fn rel_error(&self, summary: &PosteriorSummary) -> Result<f64> {
        rel_error(&summary.kappa_mean, &self.reference)
    }
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub method: Method,
    pub rel_error: f64,
    pub offline_evals: u64,
    pub online_evals: u64,
    pub data_evals: u64,
    pub refinements: usize,
    pub acceptance_rate: f64,
    pub samples: usize,
    pub retained: usize,
    pub final_depth: usize,
}

impl Metrics {
    pub fn to_json(&self, setup: &Setup) -> serde_json::Value {
        json!({
            "config_hash": setup.config.hash(),
            "seed": setup.config.seed,
            "example": setup.config.example.name(),
            "method": self.method.name(),
            "reference": match &setup.config.reference {
                Reference::Truth => "truth".to_string(),
                Reference::MeanFile(p) => p.display().to_string(),
            },
            "rel_error": self.rel_error,
            "high_fidelity_evals": {
                "offline": self.offline_evals,
                "online": self.online_evals,
                "total": self.offline_evals + self.online_evals,
                "data_generation": self.data_evals,
            },
            "refinements": self.refinements,
            "acceptance_rate": self.acceptance_rate,
            "samples": self.samples,
            "retained_after_burn_in": self.retained,
            "final_surrogate_depth": self.final_depth,
        })
    }
}

/// Everything [`run_experiment`] produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub metrics: Metrics,
    pub summary: PosteriorSummary,
    pub sampled: Sampled,
}

/// Run `cfg.method` end to end and write artifacts into `cfg.output_dir`:
/// `data.csv`/`data.meta`, `samples.csv`, `refinements.csv` (adnn),
/// `kappa_mean.csv`, `kappa_std.csv`, `log_kappa_mean.csv`,
/// `log_kappa_std.csv`, `surrogate.txt` (surrogate methods), `config.txt`
/// and `metrics.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let setup = Setup::new(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    if cfg.data_file.is_none() {
        write_data(&dir.join("data.csv"), &dir.join("data.meta"), &setup.observation, &setup.data_metadata())?;
    }

    let offline = match cfg.method {
        Method::Direct => None,
        Method::Dnn | Method::Adnn => Some(setup.offline_surrogate()?),
    };
    let offline_evals = setup.problem.evaluations();
    let sampled = setup.sample(cfg.method, offline)?;
    let summary = setup.summarize(&sampled.store)?;
    let metrics = Metrics {
        method: cfg.method,
        rel_error: setup.rel_error(&summary)?,
        offline_evals,
        online_evals: sampled.online_evals,
        data_evals: setup.data_problem.evaluations(),
        refinements: sampled.store.num_refinements(),
        acceptance_rate: sampled.store.acceptance_rate(),
        samples: sampled.store.len(),
        retained: summary.retained,
        final_depth: sampled.surrogate.as_ref().map_or(0, SurrogateModel::depth),
    };

    let prov = setup.provenance();
    write_samples(&dir.join("samples.csv"), &sampled.store, &prov)?;
    if cfg.method == Method::Adnn {
        write_refinements(&dir.join("refinements.csv"), &sampled.store, &prov)?;
    }
    write_summary(dir, &setup.problem.grid(), &summary, &prov)?;
    if let Some(model) = &sampled.surrogate {
        std::fs::write(dir.join("surrogate.txt"), write_surrogate(model))?;
    }
    let text = serde_json::to_string_pretty(&metrics.to_json(&setup)).expect("metrics serialize");
    std::fs::write(dir.join("metrics.json"), text + "\n")?;
    info!(
        "{}: rel_error {:.4}, online evals {}, refinements {}",
        cfg.method.name(),
        metrics.rel_error,
        metrics.online_evals,
        metrics.refinements
    );
    Ok(Outcome {
        metrics,
        summary,
        sampled,
    })
}

/// Write the four mean/std matrices.
pub fn write_summary(dir: &Path, grid: &Grid, s: &PosteriorSummary, provenance: &str) -> Result<()> {
    write_field_matrix(&dir.join("kappa_mean.csv"), grid, &s.kappa_mean, provenance)?;
    write_field_matrix(&dir.join("kappa_std.csv"), grid, &s.kappa_std, provenance)?;
    write_field_matrix(&dir.join("log_kappa_mean.csv"), grid, &s.log_kappa_mean, provenance)?;
    write_field_matrix(&dir.join("log_kappa_std.csv"), grid, &s.log_kappa_std, provenance)?;
    Ok(())
}

//! Flat `key = value` experiment configuration.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::mcmc::AdaptiveConfig;
use crate::nn::TrainConfig;
use crate::pde::NoiseSpec;
use crate::surrogate::RefineMode;
use crate::{Error, Result};

/// Parse `key = value` lines. Blank lines and `#` comments (whole-line or
/// trailing) are skipped; later keys override earlier ones.
pub fn parse_key_values(text: &str) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`, found `{line}`", no + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Parse(format!("line {}: empty key", no + 1)));
        }
        out.insert(key.to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    /// Nine RBF weights, truth drawn from `U(-5, 5)` (bundled data file).
    Rbf9,
    /// Nine RBF weights, truth drawn from the prior.
    Rbf9PriorTruth,
    /// Truncated KL log-permeability, truth drawn from the prior.
    KlField,
}

impl Example {
    pub fn name(self) -> &'static str {
        match self {
            Example::Rbf9 => "rbf9",
            Example::Rbf9PriorTruth => "rbf9_prior_truth",
            Example::KlField => "kl_field",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rbf9" => Ok(Example::Rbf9),
            "rbf9_prior_truth" => Ok(Example::Rbf9PriorTruth),
            "kl_field" => Ok(Example::KlField),
            other => Err(Error::config("example", format!("unknown example `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// MH on the high-fidelity posterior.
    Direct,
    /// MH on the prior-trained surrogate only.
    Dnn,
    /// Adaptive multi-fidelity MH.
    Adnn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Dnn => "dnn",
            Method::Adnn => "adnn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Method::Direct),
            "dnn" => Ok(Method::Dnn),
            "adnn" => Ok(Method::Adnn),
            other => Err(Error::config("method", format!("unknown method `{other}`"))),
        }
    }
}

/// Field that `rel_error` is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Truth,
    /// A stored posterior-mean matrix CSV (e.g. from a direct run).
    MeanFile(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub example: Example,
    pub method: Method,
    pub inversion_grid: usize,
    pub data_grid: usize,
    pub noise: NoiseSpec,
    pub n_offline: usize,
    pub lf_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
    pub learning_rate: f64,
    pub regularization: f64,
    pub batch_size: usize,
    pub offline_epochs: usize,
    pub online_epochs: usize,
    pub subchain_length: usize,
    pub max_corrections: usize,
    pub tol: f64,
    pub radius: f64,
    pub q: usize,
    pub refit_head_only: bool,
    pub pool_local_data: bool,
    pub indicator_ratio_flipped: bool,
    pub step_sigma: f64,
    /// Total steps for `direct` and `dnn`.
    pub chain_length: usize,
    pub burn_in: f64,
    pub kl_modes: usize,
    pub kl_length_scale: f64,
    pub kl_variance: f64,
    pub seed: u64,
    pub data_seed: u64,
    pub truth_seed: u64,
    /// Explicit true parameter; overrides the example's own truth.
    pub truth: Option<Vec<f64>>,
    pub reference: Reference,
    pub output_dir: PathBuf,
    pub kl_cache_dir: Option<PathBuf>,
    pub offline_model: Option<PathBuf>,
    pub data_file: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for one of the three examples.
    pub fn for_example(example: Example) -> Self {
        let base = Self {
            example,
            method: Method::Adnn,
            inversion_grid: 31,
            data_grid: 63,
            noise: NoiseSpec::Relative { delta: 0.05 },
            n_offline: 50,
            lf_hidden: vec![40; 4],
            head_hidden: vec![50],
            learning_rate: 1e-3,
            regularization: 0.0,
            batch_size: 32,
            offline_epochs: 5000,
            online_epochs: 2000,
            subchain_length: 1000,
            max_corrections: 50,
            tol: 0.1,
            radius: 0.2,
            q: 10,
            refit_head_only: false,
            pool_local_data: false,
            indicator_ratio_flipped: false,
            step_sigma: 0.1,
            chain_length: 50_000,
            burn_in: 0.4,
            kl_modes: 20,
            kl_length_scale: 0.1,
            kl_variance: 1.0,
            seed: 1,
            data_seed: 2019,
            truth_seed: 111,
            truth: None,
            reference: Reference::Truth,
            output_dir: PathBuf::from("out"),
            kl_cache_dir: None,
            offline_model: None,
            data_file: None,
        };
        match example {
            Example::Rbf9 | Example::Rbf9PriorTruth => base,
            Example::KlField => Self {
                noise: NoiseSpec::Absolute { sigma: 0.05 },
                n_offline: 100,
                lf_hidden: vec![150; 3],
                head_hidden: vec![150],
                regularization: 1e-6,
                q: 50,
                ..base
            },
        }
    }

    /// Parse a config file body, then apply `overrides` (`key=value` strings).
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut kv = parse_key_values(text)?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o.clone(), "override must be `key=value`"))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let example = match kv.remove("example") {
            Some(v) => Example::parse(&v)?,
            None => Example::Rbf9,
        };
        let mut cfg = Self::for_example(example);
        // noise mode and level interact, so resolve them together
        let mode = kv.remove("noise_mode");
        let level = kv.remove("noise_level");
        if mode.is_some() || level.is_some() {
            let mode = mode.unwrap_or_else(|| cfg.noise.mode().to_string());
            let level = match level {
                Some(v) => parse_num::<f64>("noise_level", &v)?,
                None => cfg.noise.level(),
            };
            cfg.noise = NoiseSpec::from_mode(&mode, level)?;
        }
        let mut keys: Vec<_> = kv.into_iter().collect();
        keys.sort();
        for (k, v) in keys {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "method" => self.method = Method::parse(v)?,
            "inversion_grid" => self.inversion_grid = parse_num(key, v)?,
            "data_grid" => self.data_grid = parse_num(key, v)?,
            "n_offline" => self.n_offline = parse_num(key, v)?,
            "lf_hidden" => self.lf_hidden = parse_list(key, v)?,
            "head_hidden" => self.head_hidden = parse_list(key, v)?,
            "learning_rate" => self.learning_rate = parse_num(key, v)?,
            "regularization" => self.regularization = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "offline_epochs" => self.offline_epochs = parse_num(key, v)?,
            "online_epochs" => self.online_epochs = parse_num(key, v)?,
            "subchain_length" => self.subchain_length = parse_num(key, v)?,
            "max_corrections" => self.max_corrections = parse_num(key, v)?,
            "tol" => self.tol = parse_num(key, v)?,
            "radius" => self.radius = parse_num(key, v)?,
            "q" => self.q = parse_num(key, v)?,
            "refit_head_only" => self.refit_head_only = parse_num(key, v)?,
            "pool_local_data" => self.pool_local_data = parse_num(key, v)?,
            "indicator_ratio_flipped" => self.indicator_ratio_flipped = parse_num(key, v)?,
            "step_sigma" => self.step_sigma = parse_num(key, v)?,
            "chain_length" => self.chain_length = parse_num(key, v)?,
            "burn_in" => self.burn_in = parse_num(key, v)?,
            "kl_modes" => self.kl_modes = parse_num(key, v)?,
            "kl_length_scale" => self.kl_length_scale = parse_num(key, v)?,
            "kl_variance" => self.kl_variance = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "data_seed" => self.data_seed = parse_num(key, v)?,
            "truth_seed" => self.truth_seed = parse_num(key, v)?,
            "truth" => self.truth = optional(v).map(|s| parse_list(key, s)).transpose()?,
            "reference" => {
                self.reference = match v {
                    "truth" => Reference::Truth,
                    path => Reference::MeanFile(PathBuf::from(path)),
                }
            }
            "output_dir" => self.output_dir = PathBuf::from(v),
            "kl_cache_dir" => self.kl_cache_dir = optional(v).map(PathBuf::from),
            "offline_model" => self.offline_model = optional(v).map(PathBuf::from),
            "data_file" => self.data_file = optional(v).map(PathBuf::from),
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.inversion_grid < 3 {
            return Err(Error::config("inversion_grid", "must be at least 3"));
        }
        if self.data_grid == self.inversion_grid {
            return Err(Error::InverseCrime(self.data_grid));
        }
        if self.data_grid < self.inversion_grid {
            return Err(Error::config("data_grid", "must be finer than inversion_grid"));
        }
        if self.n_offline < 2 {
            return Err(Error::config("n_offline", "must be at least 2"));
        }
        if self.lf_hidden.contains(&0) {
            return Err(Error::config("lf_hidden", "widths must be positive"));
        }
        if self.head_hidden.contains(&0) {
            return Err(Error::config("head_hidden", "widths must be positive"));
        }
        if !(self.step_sigma > 0.0 && self.step_sigma.is_finite()) {
            return Err(Error::config("step_sigma", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::config("burn_in", "must lie in [0, 1)"));
        }
        if self.chain_length == 0 {
            return Err(Error::config("chain_length", "must be positive"));
        }
        if self.example == Example::KlField && self.kl_modes == 0 {
            return Err(Error::config("kl_modes", "must be positive"));
        }
        if let Some(t) = &self.truth {
            if t.len() != self.parameter_dim() {
                return Err(Error::config(
                    "truth",
                    format!("expected {} entries, got {}", self.parameter_dim(), t.len()),
                ));
            }
        }
        if self.noise.level() <= 0.0 {
            return Err(Error::config("noise_level", "inference needs a positive noise level"));
        }
        self.offline_train().validate()?;
        self.adaptive().validate()
    }

    /// Length of `z`.
    pub fn parameter_dim(&self) -> usize {
        match self.example {
            Example::Rbf9 | Example::Rbf9PriorTruth => 9,
            Example::KlField => self.kl_modes,
        }
    }

    fn train_base(&self, epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            regularization: self.regularization,
            batch_size: self.batch_size,
            epochs,
            ..TrainConfig::default()
        }
    }

    pub fn offline_train(&self) -> TrainConfig {
        self.train_base(self.offline_epochs)
    }

    pub fn adaptive(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            subchain_length: self.subchain_length,
            max_corrections: self.max_corrections,
            tol: self.tol,
            radius: self.radius,
            q: self.q,
            head_hidden: self.head_hidden.clone(),
            train: self.train_base(self.online_epochs),
            mode: RefineMode {
                refit_head_only: self.refit_head_only,
                pool_local_data: self.pool_local_data,
            },
            indicator_ratio_flipped: self.indicator_ratio_flipped,
            seed: crate::rng::derive_seed(self.seed, 3),
        }
    }

    /// Canonical text form; `parse(to_text())` reproduces `self`.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("none".to_string(), |p| p.display().to_string());
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("example", self.example.name().into());
        kv("method", self.method.name().into());
        kv("inversion_grid", self.inversion_grid.to_string());
        kv("data_grid", self.data_grid.to_string());
        kv("noise_mode", self.noise.mode().into());
        kv("noise_level", fmt_num(self.noise.level()));
        kv("n_offline", self.n_offline.to_string());
        kv("lf_hidden", list(&self.lf_hidden));
        kv("head_hidden", list(&self.head_hidden));
        kv("learning_rate", fmt_num(self.learning_rate));
        kv("regularization", fmt_num(self.regularization));
        kv("batch_size", self.batch_size.to_string());
        kv("offline_epochs", self.offline_epochs.to_string());
        kv("online_epochs", self.online_epochs.to_string());
        kv("subchain_length", self.subchain_length.to_string());
        kv("max_corrections", self.max_corrections.to_string());
        kv("tol", fmt_num(self.tol));
        kv("radius", fmt_num(self.radius));
        kv("q", self.q.to_string());
        kv("refit_head_only", self.refit_head_only.to_string());
        kv("pool_local_data", self.pool_local_data.to_string());
        kv("indicator_ratio_flipped", self.indicator_ratio_flipped.to_string());
        kv("step_sigma", fmt_num(self.step_sigma));
        kv("chain_length", self.chain_length.to_string());
        kv("burn_in", fmt_num(self.burn_in));
        kv("kl_modes", self.kl_modes.to_string());
        kv("kl_length_scale", fmt_num(self.kl_length_scale));
        kv("kl_variance", fmt_num(self.kl_variance));
        kv("seed", self.seed.to_string());
        kv("data_seed", self.data_seed.to_string());
        kv("truth_seed", self.truth_seed.to_string());
        kv(
            "truth",
            self.truth
                .as_ref()
                .map_or("none".into(), |t| t.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",")),
        );
        kv(
            "reference",
            match &self.reference {
                Reference::Truth => "truth".into(),
                Reference::MeanFile(p) => p.display().to_string(),
            },
        );
        kv("output_dir", self.output_dir.display().to_string());
        kv("kl_cache_dir", path(&self.kl_cache_dir));
        kv("offline_model", path(&self.offline_model));
        kv("data_file", path(&self.data_file));
        s
    }

    /// First 16 hex digits of the SHA-256 of [`Self::to_text`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn optional(v: &str) -> Option<&str> {
    match v {
        "" | "none" => None,
        s => Some(s),
    }
}

/// Shortest round-tripping decimal form.
fn fmt_num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:?}")
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',').map(|t| parse_num(key, t.trim())).collect()
}

//! Command-line driver. Exit codes: 0 success, 2 config error, 3 numerical
//! failure, 1 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use mfsurrogate::experiment::{
    kl_basis, kl_cache_path, run_experiment, write_summary, ExperimentConfig, Setup,
};
use mfsurrogate::mcmc::read_samples;
use mfsurrogate::pde::write_data;
use mfsurrogate::surrogate::write_surrogate;
use mfsurrogate::{Error, Result};

#[derive(Parser)]
#[command(name = "mfsurrogate", version, about = "Adaptive multi-fidelity NN surrogates for Bayesian inverse problems")]
struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize noisy sensor data on the fine grid.
    GenerateData,
    /// Train the prior-based surrogate and save it.
    TrainOffline,
    /// Sample the posterior with one method.
    Run {
        #[arg(long)]
        method: Option<String>,
    },
    /// Recompute mean/std fields and rel_error from a samples file.
    Summarize {
        /// Defaults to `<output_dir>/samples.csv`.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Build the KL basis and write it to the cache directory.
    KlCache,
}

fn load_config(cli: &Cli, extra: &[String]) -> Result<ExperimentConfig> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut overrides = cli.overrides.clone();
    overrides.extend_from_slice(extra);
    ExperimentConfig::parse(&text, &overrides)
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenerateData => {
            let cfg = load_config(cli, &[])?;
            let setup = Setup::new(&cfg)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let csv = cfg.output_dir.join("data.csv");
            write_data(&csv, &csv.with_extension("meta"), &setup.observation, &setup.data_metadata())?;
            info!("wrote {}", csv.display());
        }
        Command::TrainOffline => {
            let cfg = load_config(cli, &[])?;
            let setup = Setup::new(&cfg)?;
            let model = setup.offline_surrogate()?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = cfg.output_dir.join("offline_surrogate.txt");
            std::fs::write(&path, write_surrogate(&model))?;
            info!("wrote {} after {} solves", path.display(), setup.problem.evaluations());
        }
        Command::Run { method } => {
            let extra: Vec<String> = method.iter().map(|m| format!("method={m}")).collect();
            let cfg = load_config(cli, &extra)?;
            let out = run_experiment(&cfg)?;
            println!(
                "{} rel_error={:.6} offline_evals={} online_evals={} refinements={}",
                cfg.method.name(),
                out.metrics.rel_error,
                out.metrics.offline_evals,
                out.metrics.online_evals,
                out.metrics.refinements
            );
        }
        Command::Summarize { samples } => {
            let cfg = load_config(cli, &[])?;
            let setup = Setup::new(&cfg)?;
            let path = samples.clone().unwrap_or_else(|| cfg.output_dir.join("samples.csv"));
            let store = read_samples(&path)?;
            let summary = setup.summarize(&store)?;
            let rel = setup.rel_error(&summary)?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            write_summary(&cfg.output_dir, &setup.problem.grid(), &summary, &setup.provenance())?;
            let report = serde_json::json!({
                "config_hash": cfg.hash(),
                "samples": store.len(),
                "retained_after_burn_in": summary.retained,
                "acceptance_rate": store.acceptance_rate(),
                "rel_error": rel,
            });
            let text = serde_json::to_string_pretty(&report).expect("summary serializes");
            std::fs::write(cfg.output_dir.join("summary.json"), text + "\n")?;
            println!("rel_error={rel:.6} retained={}", summary.retained);
        }
        Command::KlCache => {
            let mut cfg = load_config(cli, &[])?;
            let dir = cfg.kl_cache_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
            cfg.kl_cache_dir = Some(dir.clone());
            let field = kl_basis(&cfg)?;
            println!("{}", kl_cache_path(&dir, &field.key()).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

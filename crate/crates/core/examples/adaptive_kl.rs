//! Adaptive surrogate MCMC with a 20-mode Karhunen-Loeve permeability.
//!
//! Uses a shortened schedule by default; the basis is cached under
//! `out/kl_cache`.

use mfsurrogate::experiment::{ExperimentConfig, Method, Setup};

fn main() -> mfsurrogate::Result<()> {
    let mut overrides: Vec<String> = ["max_corrections=20", "subchain_length=500", "kl_cache_dir=out/kl_cache"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    overrides.extend(std::env::args().skip(1));
    let cfg = ExperimentConfig::parse("example = kl_field\n", &overrides)?;
    let setup = Setup::new(&cfg)?;
    let offline = setup.offline_surrogate()?;
    let run = setup.sample(Method::Adnn, Some(offline))?;
    let summary = setup.summarize(&run.store)?;
    let min = summary.kappa_mean.iter().copied().fold(f64::MAX, f64::min);
    println!(
        "{} refinements, {} online solves, min posterior-mean kappa {min:.3}, rel error {:.4}",
        run.store.num_refinements(),
        run.online_evals,
        setup.rel_error(&summary)?
    );
    Ok(())
}

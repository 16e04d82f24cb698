//! Random-walk MH on the RBF problem with a PDE solve at every step.
//!
//! A short chain; pass `--set`-style overrides as arguments to change it,
//! e.g. `cargo run --example direct_mcmc -- chain_length=20000`.

use mfsurrogate::experiment::{ExperimentConfig, Method, Setup};

fn main() -> mfsurrogate::Result<()> {
    let mut overrides = vec!["chain_length=5000".to_string()];
    overrides.extend(std::env::args().skip(1));
    let cfg = ExperimentConfig::parse("method = direct\n", &overrides)?;
    let setup = Setup::new(&cfg)?;
    let run = setup.sample(Method::Direct, None)?;
    let summary = setup.summarize(&run.store)?;
    println!(
        "{} steps, acceptance {:.3}, {} solves, rel error {:.4}",
        run.store.len(),
        run.store.acceptance_rate(),
        run.online_evals,
        setup.rel_error(&summary)?
    );
    Ok(())
}

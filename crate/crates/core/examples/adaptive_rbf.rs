//! Adaptive surrogate MCMC on the nine-bump RBF problem.
//!
//! Runs with the shipped defaults unless overrides are given, e.g.
//! `cargo run --release --example adaptive_rbf -- max_corrections=20 subchain_length=500`.

use mfsurrogate::experiment::{ExperimentConfig, Method, Setup};

fn main() -> mfsurrogate::Result<()> {
    let overrides: Vec<String> = std::env::args().skip(1).collect();
    let cfg = ExperimentConfig::parse("", &overrides)?;
    let setup = Setup::new(&cfg)?;
    let offline = setup.offline_surrogate()?;
    let run = setup.sample(Method::Adnn, Some(offline))?;
    let summary = setup.summarize(&run.store)?;
    for e in run.store.refinements.iter().filter(|e| e.triggered) {
        println!("iter {:3}: err {:.3e}, solves so far {}", e.outer_iter, e.err.unwrap_or(f64::NAN), e.evals_total);
    }
    println!(
        "{} refinements, {} online solves, acceptance {:.3}, rel error {:.4}",
        run.store.num_refinements(),
        run.online_evals,
        run.store.acceptance_rate(),
        setup.rel_error(&summary)?
    );
    Ok(())
}

//! MH on a network trained once on prior samples (no solves while sampling).

use mfsurrogate::experiment::{ExperimentConfig, Method, Setup};

fn main() -> mfsurrogate::Result<()> {
    let cfg = ExperimentConfig::parse("method = dnn\nchain_length = 20000\n", &[])?;
    let setup = Setup::new(&cfg)?;
    let offline = setup.offline_surrogate()?;
    let offline_evals = setup.problem.evaluations();
    let run = setup.sample(Method::Dnn, Some(offline))?;
    let summary = setup.summarize(&run.store)?;
    println!(
        "{offline_evals} offline solves, {} online, acceptance {:.3}, rel error {:.4}",
        run.online_evals,
        run.store.acceptance_rate(),
        setup.rel_error(&summary)?
    );
    Ok(())
}

//! Karhunen-Loeve basis of the squared-exponential kernel on a 31x31 grid.

use mfsurrogate::field::KlField;
use mfsurrogate::pde::Grid;
use mfsurrogate::rng::seeded;
use rand_distr::{Distribution, StandardNormal};

fn main() -> mfsurrogate::Result<()> {
    let grid = Grid::new(31)?;
    let kl = KlField::build(&grid, 20, 0.1, 1.0)?;
    let lam = kl.eigenvalues();
    println!("leading eigenvalues:");
    for (k, l) in lam.iter().enumerate().take(10) {
        println!("  {:2}  {l:.5e}  ratio {:.3e}", k + 1, l / lam[0]);
    }
    println!("variance captured by 20 modes: {:.4}", kl.truncated_variance(20));

    // a prior draw of log-permeability
    let mut rng = seeded(3);
    let z: Vec<f64> = (0..20).map(|_| StandardNormal.sample(&mut rng)).collect();
    let log_k = kl.log_field(&z)?;
    let (lo, hi) = log_k.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
    println!("prior draw: log kappa in [{lo:.3}, {hi:.3}]");
    Ok(())
}

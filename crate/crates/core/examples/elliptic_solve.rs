//! Solve `-div(kappa grad u) = f` with homogeneous Dirichlet data.
//!
//! With `kappa = 1` the exact solution is known, so the max-norm error is
//! printed for three grids. Then the nine-bump RBF field is solved and
//! observed at the 81 sensors.

use mfsurrogate::experiment::rbf9_truth;
use mfsurrogate::field::{Permeability, RbfField};
use mfsurrogate::pde::{solve_elliptic, source_term, ForwardProblem, Grid, Sensors};
use mfsurrogate::ForwardModel;
use std::f64::consts::PI;

fn main() -> mfsurrogate::Result<()> {
    let mut last: Option<(f64, f64)> = None;
    for m in [15, 31, 63, 127] {
        let grid = Grid::new(m)?;
        let nodes = grid.nodes();
        let f: Vec<f64> = nodes.iter().map(|x| source_term(*x)).collect();
        let sol = solve_elliptic(&grid, &vec![1.0; nodes.len()], &f)?;
        let c = 100.0 / (2.0 * PI * PI);
        let err = nodes
            .iter()
            .zip(sol.values())
            .map(|(x, u)| (u - c * (PI * x[0]).sin() * (PI * x[1]).sin()).abs())
            .fold(0.0, f64::max);
        let order = last.map(|(e, h)| (e / err).ln() / (h / grid.spacing()).ln());
        match order {
            Some(p) => println!("M = {m:3}: max error {err:.3e}, observed order {p:.3}"),
            None => println!("M = {m:3}: max error {err:.3e}"),
        }
        last = Some((err, grid.spacing()));
    }

    let problem = ForwardProblem::new(Grid::new(31)?, Permeability::Rbf(RbfField::standard()), Sensors::standard())?;
    let y = problem.evaluate(&rbf9_truth())?;
    let max = y.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
    println!("RBF truth: {} sensor readings, largest {max:.4}, {} solve(s)", y.len(), problem.evaluations());
    Ok(())
}

//! High-fidelity forward model: `-div(kappa grad u) = f` on the unit square
//! with `u = 0` on the boundary, observed at sensor locations.
//!
//! The discretization is the flux-form five-point scheme on a uniform grid
//! with `M` interior nodes per axis (`h = 1/(M+1)`). Face permeabilities are
//! arithmetic means of the two adjacent nodal values, so `kappa` is needed on
//! the closed grid including boundary nodes. Closed-grid arrays are stored
//! with the x index fastest: node `(i, j)` sits at `i + j * (M + 2)`.

mod banded;
mod data;

pub use banded::{BandedCholesky, BandedSpd};
pub use data::{add_noise, generate_data, read_data, write_data, DataMetadata, NoiseSpec, Observation};

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::field::{NodalField, Permeability};
use crate::{Error, ForwardModel, Result};

/// Relative residual the linear solve must reach.
pub const SOLVER_TOLERANCE: f64 = 1e-10;

/// Uniform grid on `[0,1]^2` with `m` interior nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid {
    m: usize,
}

impl Grid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::Input(format!("grid needs at least 3 interior nodes, got {m}")));
        }
        Ok(Self { m })
    }

    /// Interior nodes per axis.
    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.m + 1) as f64
    }

    /// Nodes per axis including the two boundary nodes.
    pub fn side(&self) -> usize {
        self.m + 2
    }

    pub fn num_nodes(&self) -> usize {
        self.side() * self.side()
    }

    pub fn num_unknowns(&self) -> usize {
        self.m * self.m
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.side()
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        let h = self.spacing();
        [i as f64 * h, j as f64 * h]
    }

    /// Coordinates of every closed-grid node in storage order.
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        let s = self.side();
        (0..s)
            .flat_map(|j| (0..s).map(move |i| (i, j)))
            .map(|(i, j)| self.node(i, j))
            .collect()
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.m + 1 || j == self.m + 1
    }
}

/// `f(x) = 100 sin(pi x1) sin(pi x2)`.
pub fn source_term(x: [f64; 2]) -> f64 {
    100.0 * (PI * x[0]).sin() * (PI * x[1]).sin()
}

/// Nodal values of `u` on the closed grid (zero on the boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSolution {
    grid: Grid,
    values: Vec<f64>,
}

impl SolverSolution {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Bilinear interpolation at `x`; exact at nodes.
    pub fn interpolate(&self, x: [f64; 2]) -> Result<f64> {
        if !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]) {
            return Err(Error::Input(format!("point ({}, {}) outside [0,1]^2", x[0], x[1])));
        }
        let last = self.grid.side() - 1;
        let locate = |c: f64| -> (usize, f64) {
            let f = c / self.grid.spacing();
            let r = f.round();
            let f = if (f - r).abs() < 1e-9 { r } else { f };
            let i0 = (f.floor() as usize).min(last - 1);
            (i0, f - i0 as f64)
        };
        let (i0, tx) = locate(x[0]);
        let (j0, ty) = locate(x[1]);
        let v00 = self.at(i0, j0);
        let v10 = self.at(i0 + 1, j0);
        let v01 = self.at(i0, j0 + 1);
        let v11 = self.at(i0 + 1, j0 + 1);
        let v = match (tx == 0.0, ty == 0.0) {
            (true, true) => v00,
            (true, false) => v00 * (1.0 - ty) + v01 * ty,
            (false, true) => v00 * (1.0 - tx) + v10 * tx,
            (false, false) => {
                (1.0 - tx) * (1.0 - ty) * v00 + tx * (1.0 - ty) * v10 + (1.0 - tx) * ty * v01 + tx * ty * v11
            }
        };
        Ok(v)
    }

    pub fn max_abs(&self) -> f64 {
        crate::max_norm(&self.values)
    }
}

/// Assemble and solve the flux-form system for nodal `kappa` and `source`
/// (both on the closed grid). Does not touch any evaluation counter.
pub fn solve_elliptic(grid: &Grid, kappa: &[f64], source: &[f64]) -> Result<SolverSolution> {
    let n_nodes = grid.num_nodes();
    if kappa.len() != n_nodes {
        return Err(Error::shape("nodal permeability", n_nodes, kappa.len()));
    }
    if source.len() != n_nodes {
        return Err(Error::shape("nodal source", n_nodes, source.len()));
    }
    if let Some(bad) = kappa.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(Error::Solver(format!("permeability must be positive and finite, found {bad}")));
    }

    let m = grid.resolution();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let unknown = |i: usize, j: usize| (i - 1) + (j - 1) * m;
    let mut a = BandedSpd::zeros(m * m, m);
    let mut rhs = vec![0.0; m * m];

    for j in 1..=m {
        for i in 1..=m {
            let p = unknown(i, j);
            let kc = kappa[grid.index(i, j)];
            let neighbours = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)];
            let mut diag = 0.0;
            for (ni, nj) in neighbours {
                let kf = 0.5 * (kc + kappa[grid.index(ni, nj)]) * inv_h2;
                diag += kf;
                if !grid.is_boundary(ni, nj) {
                    let q = unknown(ni, nj);
                    if q < p {
                        a.add_lower(p, q, -kf);
                    }
                }
            }
            a.add_lower(p, p, diag);
            rhs[p] = source[grid.index(i, j)];
        }
    }

    let chol = a.cholesky()?;
    let mut u = chol.solve(&rhs);
    let rhs_norm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    if rhs_norm > 0.0 {
        let mut rel = residual_norm(&a, &u, &rhs) / rhs_norm;
        // One step of iterative refinement if the direct solve came up short.
        if rel >= SOLVER_TOLERANCE {
            let r: Vec<f64> = rhs.iter().zip(a.mul_vec(&u)).map(|(b, au)| b - au).collect();
            let du = chol.solve(&r);
            u.iter_mut().zip(du).for_each(|(x, d)| *x += d);
            rel = residual_norm(&a, &u, &rhs) / rhs_norm;
        }
        if !(rel < SOLVER_TOLERANCE) {
            return Err(Error::Solver(format!("relative residual {rel:e} above tolerance")));
        }
    }

    let mut values = vec![0.0; n_nodes];
    for j in 1..=m {
        for i in 1..=m {
            values[grid.index(i, j)] = u[unknown(i, j)];
        }
    }
    Ok(SolverSolution { grid: *grid, values })
}

fn residual_norm(a: &BandedSpd, u: &[f64], rhs: &[f64]) -> f64 {
    a.mul_vec(u)
        .iter()
        .zip(rhs)
        .map(|(au, b)| (b - au).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Sensor locations inside the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensors {
    points: Vec<[f64; 2]>,
}

impl Sensors {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("at least one sensor required".into()));
        }
        for p in &points {
            if !(0.0..=1.0).contains(&p[0]) || !(0.0..=1.0).contains(&p[1]) {
                return Err(Error::Input(format!("sensor ({}, {}) outside [0,1]^2", p[0], p[1])));
            }
        }
        Ok(Self { points })
    }

    /// `per_axis x per_axis` uniform sensors spanning `[lo, hi]^2`, ordered
    /// row by row (x fastest).
    pub fn uniform(per_axis: usize, lo: f64, hi: f64) -> Result<Self> {
        if per_axis == 0 {
            return Err(Error::Input("sensor grid needs at least one point per axis".into()));
        }
        let coord = |k: usize| {
            if per_axis == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * k as f64 / (per_axis - 1) as f64
            }
        };
        let points = (0..per_axis)
            .flat_map(|b| (0..per_axis).map(move |a| (a, b)))
            .map(|(a, b)| [coord(a), coord(b)])
            .collect();
        Self::new(points)
    }

    /// The 9 x 9 network at `{0.1, ..., 0.9}^2`.
    pub fn standard() -> Self {
        Self::uniform(9, 0.1, 0.9).expect("static sensor layout")
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn observe(sol: &SolverSolution, sensors: &Sensors) -> Result<Vec<f64>> {
    sensors.points().iter().map(|p| sol.interpolate(*p)).collect()
}

/// Grid + permeability parameterization + sensors, with an exact tally of
/// solves. Safe to share between threads; the tally is atomic.
#[derive(Debug)]
pub struct ForwardProblem {
    grid: Grid,
    permeability: Permeability,
    nodal: NodalField,
    sensors: Sensors,
    source: Vec<f64>,
    evaluations: AtomicU64,
}

impl ForwardProblem {
    pub fn new(grid: Grid, permeability: Permeability, sensors: Sensors) -> Result<Self> {
        let nodal = permeability.on_grid(&grid)?;
        let source = grid.nodes().into_iter().map(source_term).collect();
        Ok(Self {
            grid,
            permeability,
            nodal,
            sensors,
            source,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn permeability(&self) -> &Permeability {
        &self.permeability
    }

    pub fn sensors(&self) -> &Sensors {
        &self.sensors
    }

    pub fn parameter_dim(&self) -> usize {
        self.nodal.dim()
    }

    /// Number of PDE solves performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::SeqCst)
    }

    /// The parameterization evaluated at this problem's grid nodes.
    pub fn nodal(&self) -> &NodalField {
        &self.nodal
    }

    /// Nodal permeability on the closed grid for parameter `z`.
    pub fn kappa(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.nodal.kappa(z)
    }

    pub fn solve(&self, z: &[f64]) -> Result<SolverSolution> {
        let kappa = self.kappa(z)?;
        self.evaluations.fetch_add(1, Ordering::SeqCst);
        solve_elliptic(&self.grid, &kappa, &self.source)
    }
}

impl ForwardModel for ForwardProblem {
    fn input_dim(&self) -> usize {
        self.parameter_dim()
    }

    fn output_dim(&self) -> usize {
        self.sensors.len()
    }

    fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        let sol = self.solve(z)?;
        observe(&sol, &self.sensors)
    }
}

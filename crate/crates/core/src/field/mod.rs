//! Permeability parameterizations `z -> kappa(x)`.
//!
//! Both are exponential, so `kappa > 0` for every finite `z`:
//!
//! - [`RbfField`]: `kappa(x) = sum_i exp(z_i) exp(-0.5 |x - c_i|^2 / w^2)` with
//!   nine centres.
//! - [`KlField`]: `log kappa(x) = sum_i z_i sqrt(lambda_i) phi_i(x)`, a
//!   truncated Karhunen–Loève expansion of a squared-exponential Gaussian
//!   process.

mod kl;
mod rbf;

pub use kl::{nystrom_matrix, quadrature_weights, read_kl_cache, write_kl_cache, KlField, KlKey};
pub use rbf::{rbf_kappa, RbfField};

use ndarray::Array2;

use crate::pde::Grid;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Permeability {
    Rbf(RbfField),
    Kl(KlField),
}

impl Permeability {
    /// Length of the parameter vector `z`.
    pub fn dim(&self) -> usize {
        match self {
            Permeability::Rbf(f) => f.len(),
            Permeability::Kl(f) => f.modes(),
        }
    }

    /// Precompute the basis at every closed-grid node of `grid`.
    pub fn on_grid(&self, grid: &Grid) -> Result<NodalField> {
        self.at_points(&grid.nodes())
    }

    /// Precompute the basis at arbitrary points.
    pub fn at_points(&self, points: &[[f64; 2]]) -> Result<NodalField> {
        match self {
            Permeability::Rbf(f) => {
                let mut basis = Array2::zeros((f.len(), points.len()));
                for (k, x) in points.iter().enumerate() {
                    for (i, b) in f.basis(*x).into_iter().enumerate() {
                        basis[[i, k]] = b;
                    }
                }
                Ok(NodalField {
                    kind: NodalKind::WeightedBumps,
                    basis,
                })
            }
            Permeability::Kl(f) => Ok(NodalField {
                kind: NodalKind::LogLinear,
                basis: f.scaled_modes_at(points),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodalKind {
    /// `kappa = sum_i exp(z_i) B_i`
    WeightedBumps,
    /// `kappa = exp(sum_i z_i B_i)`
    LogLinear,
}

/// A parameterization evaluated at a fixed set of points: `dim x points`
/// basis values plus the rule combining them with `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    kind: NodalKind,
    basis: Array2<f64>,
}

impl NodalField {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn num_points(&self) -> usize {
        self.basis.ncols()
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::shape("parameter vector", self.dim(), z.len()));
        }
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("parameter vector must be finite".into()));
        }
        Ok(())
    }

    pub fn kappa(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        Ok(match self.kind {
            NodalKind::WeightedBumps => {
                let w: Vec<f64> = z.iter().map(|x| x.exp()).collect();
                self.combine(&w)
            }
            NodalKind::LogLinear => self.combine(z).into_iter().map(f64::exp).collect(),
        })
    }

    /// `log kappa` at the points.
    pub fn log_kappa(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            NodalKind::LogLinear => {
                self.check(z)?;
                Ok(self.combine(z))
            }
            NodalKind::WeightedBumps => Ok(self.kappa(z)?.into_iter().map(f64::ln).collect()),
        }
    }

    fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = ndarray::ArrayView1::from(coeffs);
        c.dot(&self.basis).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn both_fields_positive() {
        let grid = Grid::new(7).unwrap();
        let rbf = Permeability::Rbf(RbfField::standard()).on_grid(&grid).unwrap();
        let kl = Permeability::Kl(KlField::build(&grid, 5, 0.1, 1.0).unwrap()).on_grid(&grid).unwrap();
        let mut rng = seeded(4);
        for _ in 0..20 {
            let z: Vec<f64> = (0..9).map(|_| 10.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
            assert!(rbf.kappa(&z).unwrap().iter().all(|k| *k > 0.0));
            assert!(kl.kappa(&z[..5]).unwrap().iter().all(|k| *k > 0.0));
        }
    }

    #[test]
    fn nodal_rbf_matches_pointwise_formula() {
        let grid = Grid::new(5).unwrap();
        let field = RbfField::standard();
        let nodal = Permeability::Rbf(field.clone()).on_grid(&grid).unwrap();
        let z: Vec<f64> = (0..9).map(|i| 0.3 * i as f64 - 1.0).collect();
        let k = nodal.kappa(&z).unwrap();
        for (x, v) in grid.nodes().iter().zip(&k) {
            let direct = rbf_kappa(&field, &z, *x).unwrap();
            assert!((v - direct).abs() <= 1e-13 * direct);
        }
        assert!(nodal.kappa(&z[..3]).is_err());
        assert!(nodal.kappa(&[f64::NAN; 9]).is_err());
    }
}

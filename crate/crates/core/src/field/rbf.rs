use crate::{Error, Result};

/// Sum of isotropic Gaussian bumps with log-weights `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbfField {
    pub centers: Vec<[f64; 2]>,
    pub width: f64,
}

impl RbfField {
    pub fn new(centers: Vec<[f64; 2]>, width: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Input("RBF field needs at least one centre".into()));
        }
        if !(width > 0.0) {
            return Err(Error::Input("RBF width must be positive".into()));
        }
        Ok(Self { centers, width })
    }

    /// Nine centres on `{0.25, 0.5, 0.75}^2` (x fastest), width 0.15.
    pub fn standard() -> Self {
        let c = [0.25, 0.5, 0.75];
        let centers = c.iter().flat_map(|&y| c.iter().map(move |&x| [x, y])).collect();
        Self {
            centers,
            width: 0.15,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Unweighted bump values at `x`.
    pub fn basis(&self, x: [f64; 2]) -> Vec<f64> {
        let w2 = self.width * self.width;
        self.centers
            .iter()
            .map(|c| {
                let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                (-0.5 * d2 / w2).exp()
            })
            .collect()
    }
}

/// `kappa(x) = sum_i exp(z_i) exp(-0.5 |x - c_i|^2 / w^2)`.
pub fn rbf_kappa(field: &RbfField, z: &[f64], x: [f64; 2]) -> Result<f64> {
    if z.len() != field.len() {
        return Err(Error::shape("RBF weights", field.len(), z.len()));
    }
    Ok(z.iter().zip(field.basis(x)).map(|(zi, b)| zi.exp() * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn unit_weights_at_first_centre() {
        let f = RbfField::standard();
        let x0 = f.centers[0];
        let expected = 1.0
            + f.centers[1..]
                .iter()
                .map(|c| (-0.5 * ((x0[0] - c[0]).powi(2) + (x0[1] - c[1]).powi(2)) / 0.0225).exp())
                .sum::<f64>();
        let got = rbf_kappa(&f, &[0.0; 9], x0).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn vanishing_weight_drops_out() {
        let f = RbfField::standard();
        let mut z = [0.0; 9];
        z[0] = -30.0;
        // at centre 1 itself the remaining bumps sum to only ~0.56, so probe the
        // middle of the domain
        let x = [0.5, 0.5];
        let total = rbf_kappa(&f, &z, x).unwrap();
        let contribution = z[0].exp() * f.basis(x)[0];
        assert!(contribution < 1e-13 * total);
    }

    #[test]
    fn matches_one_line_formula() {
        let f = RbfField::standard();
        let mut rng = seeded(12);
        for _ in 0..50 {
            let z: Vec<f64> = (0..9).map(|_| rng.random_range(-3.0..3.0)).collect();
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let mut direct = 0.0;
            for (i, c) in [0.25, 0.5, 0.75].iter().flat_map(|&b| [0.25, 0.5, 0.75].map(|a| [a, b])).enumerate() {
                direct += f64::exp(z[i]) * f64::exp(-0.5 * ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)) / (0.15 * 0.15));
            }
            let got = rbf_kappa(&f, &z, x).unwrap();
            assert!((got - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(rbf_kappa(&RbfField::standard(), &[0.0; 4], [0.5, 0.5]).is_err());
    }
}

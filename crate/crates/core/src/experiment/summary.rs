use std::fmt::Write as _;
use std::path::Path;

use crate::field::NodalField;
use crate::mcmc::ChainStore;
use crate::nn::io::{fmt_f64, parse_floats};
use crate::pde::Grid;
use crate::{Error, Result};

/// Pointwise streaming mean and variance (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldAccumulator {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl FieldAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), x) in self.mean.iter_mut().zip(&mut self.m2).zip(values) {
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population standard deviation (divides by the sample count).
    pub fn std(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.m2.iter().map(|s| (s / n).max(0.0).sqrt()).collect()
    }
}

/// Posterior mean / std of `kappa` (and of `log kappa`) at grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub retained: usize,
    pub kappa_mean: Vec<f64>,
    pub kappa_std: Vec<f64>,
    pub log_kappa_mean: Vec<f64>,
    pub log_kappa_std: Vec<f64>,
}

/// Drop the leading `burn_in` fraction, map every remaining state through
/// `field` and accumulate pointwise moments.
pub fn summarize(store: &ChainStore, burn_in: f64, field: &NodalField) -> Result<PosteriorSummary> {
    let kept = store.retained(burn_in);
    if kept.is_empty() {
        return Err(Error::Input("no samples left after burn-in".into()));
    }
    let mut kappa = FieldAccumulator::new(field.num_points());
    let mut log_kappa = FieldAccumulator::new(field.num_points());
    for s in kept {
        let k = field.kappa(&s.z)?;
        let p = field.log_kappa(&s.z)?;
        kappa.push(&k);
        log_kappa.push(&p);
    }
    Ok(PosteriorSummary {
        retained: kept.len(),
        kappa_mean: kappa.mean().to_vec(),
        kappa_std: kappa.std(),
        log_kappa_mean: log_kappa.mean().to_vec(),
        log_kappa_std: log_kappa.std(),
    })
}

/// Write a nodal field as a `side x side` CSV matrix (row `j` is `y_j`).
pub fn write_field_matrix(path: &Path, grid: &Grid, values: &[f64], provenance: &str) -> Result<()> {
    if values.len() != grid.num_nodes() {
        return Err(Error::shape("field matrix", grid.num_nodes(), values.len()));
    }
    let side = grid.side();
    let mut out = String::new();
    writeln!(out, "# {provenance}").unwrap();
    for row in values.chunks(side) {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Inverse of [`write_field_matrix`], flattened x fastest.
pub fn read_field_matrix(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut width = None;
    for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')) {
        let row = parse_floats(&line.replace(',', " "))?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(Error::Parse("ragged field matrix".into()));
        }
        out.extend(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn streaming_matches_two_pass() {
        let mut rng = seeded(77);
        let rows: Vec<Vec<f64>> = (0..5000)
            .map(|_| (0..6).map(|j| 1e3 * j as f64 + rng.random::<f64>() * (j + 1) as f64).collect())
            .collect();
        let mut acc = FieldAccumulator::new(6);
        for r in &rows {
            acc.push(r);
        }
        let n = rows.len() as f64;
        for j in 0..6 {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            assert!((acc.mean()[j] - mean).abs() < 1e-10);
            assert!((acc.std()[j] - var.sqrt()).abs() < 1e-10);
        }
    }

    #[test]
    fn repeated_sample_has_zero_spread() {
        let mut acc = FieldAccumulator::new(3);
        for _ in 0..100 {
            acc.push(&[2.5, -1.0, 7.0]);
        }
        assert_eq!(acc.mean(), &[2.5, -1.0, 7.0]);
        assert!(acc.std().iter().all(|s| *s == 0.0));
    }

    #[test]
    fn matrix_round_trip() {
        let g = Grid::new(3).unwrap();
        let v: Vec<f64> = (0..25).map(|i| i as f64 * 0.37 - 2.0).collect();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_field_matrix(&p, &g, &v, "config_hash=x seed=1").unwrap();
        assert_eq!(read_field_matrix(&p).unwrap(), v);
    }
}

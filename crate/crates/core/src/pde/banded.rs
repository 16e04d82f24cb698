//! Symmetric positive-definite banded matrices and their Cholesky factors.

use crate::{Error, Result};

/// Lower band of a symmetric matrix with half-bandwidth `bw`.
///
/// Entry `(i, j)` with `i - bw <= j <= i` lives at `i * (bw + 1) + (bw - (i - j))`.
#[derive(Debug, Clone)]
pub struct BandedSpd {
    n: usize,
    bw: usize,
    band: Vec<f64>,
}

impl BandedSpd {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            band: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    /// Entry `(i, j)` of the full symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            0.0
        } else {
            self.band[self.idx(r, c)]
        }
    }

    /// Add `v` to entry `(i, j)` with `j <= i`.
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        assert!(j <= i && i - j <= self.bw, "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.band[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..=i {
                let a = self.band[self.idx(i, j)];
                if a == 0.0 {
                    continue;
                }
                y[i] += a * x[j];
                if j != i {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    /// `L L^T` factorization; fails on a nonpositive pivot.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let mut l = self.band.clone();
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut s = l[self.idx(i, j)];
                for k in lo..j {
                    s -= l[self.idx(i, k)] * l[self.idx(j, k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Solver(format!(
                            "matrix not positive definite (pivot {s:e} at row {i})"
                        )));
                    }
                    l[self.idx(i, i)] = s.sqrt();
                } else {
                    l[self.idx(i, j)] = s / l[self.idx(j, j)];
                }
            }
        }
        Ok(BandedCholesky {
            factor: BandedSpd { n, bw, band: l },
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandedCholesky {
    factor: BandedSpd,
}

impl BandedCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let f = &self.factor;
        let (n, bw) = (f.n, f.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= f.band[f.idx(i, k)] * y[k];
            }
            y[i] = s / f.band[f.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= f.band[f.idx(k, i)] * y[k];
            }
            y[i] = s / f.band[f.idx(i, i)];
        }
        y
    }
}

//! Truncated Karhunen–Loève expansion of a zero-mean Gaussian process with
//! kernel `C(x, y) = sigma^2 exp(-|x - y|^2 / (2 l^2))` on the unit square.
//!
//! The integral operator is discretized by Nyström quadrature on the closed
//! solver grid with trapezoidal weights `w_k` (which sum to one). The
//! symmetric matrix `S = W^{1/2} C W^{1/2}` shares its eigenvalues with the
//! discretized operator; eigenfunctions are `phi = W^{-1/2} psi`, orthonormal
//! in `<f, g> = sum_k w_k f_k g_k`. Off-grid values use the Nyström
//! extension `phi_i(x) = lambda_i^{-1} sum_k w_k C(x, x_k) phi_i(x_k)`.

use std::fmt::Write as _;

use ndarray::{Array1, Array2, Axis};
use rand_distr::{Distribution, StandardNormal};

use crate::nn::io::{fmt_f64, parse_floats, LineCursor};
use crate::pde::Grid;
use crate::rng::seeded;
use crate::{Error, Result};

const NEGATIVE_EIGENVALUE_LIMIT: f64 = -1e-10;
const RESIDUAL_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 2000;

/// Cache key: everything the basis depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlKey {
    pub resolution: usize,
    pub length_scale: f64,
    pub variance: f64,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlField {
    grid: Grid,
    length_scale: f64,
    variance: f64,
    weights: Vec<f64>,
    eigenvalues: Vec<f64>,
    /// `modes x nodes`, discrete-L2 orthonormal rows.
    eigenfunctions: Array2<f64>,
}

/// Trapezoidal weights on the closed grid of `grid`.
pub fn quadrature_weights(grid: &Grid) -> Vec<f64> {
    let h = grid.spacing();
    let side = grid.side();
    let c = |i: usize| if i == 0 || i == side - 1 { 0.5 } else { 1.0 };
    (0..side)
        .flat_map(|j| (0..side).map(move |i| (i, j)))
        .map(|(i, j)| h * h * c(i) * c(j))
        .collect()
}

fn kernel(a: [f64; 2], b: [f64; 2], length_scale: f64, variance: f64) -> f64 {
    let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    variance * (-d2 / (2.0 * length_scale * length_scale)).exp()
}

/// The symmetric Nyström matrix `W^{1/2} C W^{1/2}` over closed-grid nodes.
pub fn nystrom_matrix(grid: &Grid, length_scale: f64, variance: f64) -> Array2<f64> {
    let nodes = grid.nodes();
    let sw: Vec<f64> = quadrature_weights(grid).iter().map(|w| w.sqrt()).collect();
    let n = nodes.len();
    let mut s = Array2::zeros((n, n));
    for a in 0..n {
        for b in 0..=a {
            let v = sw[a] * kernel(nodes[a], nodes[b], length_scale, variance) * sw[b];
            s[[a, b]] = v;
            s[[b, a]] = v;
        }
    }
    s
}

impl KlField {
    /// Leading `modes` eigenpairs of the Nyström-discretized covariance.
    pub fn build(grid: &Grid, modes: usize, length_scale: f64, variance: f64) -> Result<Self> {
        if !(length_scale > 0.0) || !(variance > 0.0) {
            return Err(Error::Input("kernel length scale and variance must be positive".into()));
        }
        let n_nodes = grid.num_nodes();
        if modes == 0 || modes > n_nodes {
            return Err(Error::Input(format!(
                "truncation order {modes} must lie in 1..={n_nodes}"
            )));
        }
        let s = nystrom_matrix(grid, length_scale, variance);
        let (values, vectors) = top_eigenpairs(&s, modes)?;
        if let Some(bad) = values.iter().find(|v| **v < NEGATIVE_EIGENVALUE_LIMIT) {
            return Err(Error::Numerical(format!(
                "covariance has negative eigenvalue {bad:e}; kernel matrix is not PSD"
            )));
        }
        let weights = quadrature_weights(grid);
        let mut eigenfunctions = vectors;
        for mut row in eigenfunctions.rows_mut() {
            for (v, w) in row.iter_mut().zip(&weights) {
                *v /= w.sqrt();
            }
        }
        Ok(Self {
            grid: *grid,
            length_scale,
            variance,
            weights,
            eigenvalues: values.into_iter().map(|v| v.max(0.0)).collect(),
            eigenfunctions,
        })
    }

    pub fn key(&self) -> KlKey {
        KlKey {
            resolution: self.grid.resolution(),
            length_scale: self.length_scale,
            variance: self.variance,
            modes: self.modes(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `modes x nodes` eigenfunction values on the build grid.
    pub fn eigenfunctions(&self) -> &Array2<f64> {
        &self.eigenfunctions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted Gram matrix `<phi_i, phi_j>`; the identity up to round-off.
    pub fn gram(&self) -> Array2<f64> {
        let w = Array1::from(self.weights.clone());
        let weighted = &self.eigenfunctions * &w;
        weighted.dot(&self.eigenfunctions.t())
    }

    /// `p(x) = sum_i z_i sqrt(lambda_i) phi_i(x)` at the build-grid nodes.
    pub fn log_field(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.modes() {
            return Err(Error::shape("KL coefficients", self.modes(), z.len()));
        }
        let coeffs: Array1<f64> = z
            .iter()
            .zip(&self.eigenvalues)
            .map(|(zi, l)| zi * l.sqrt())
            .collect();
        Ok(coeffs.dot(&self.eigenfunctions).to_vec())
    }

    /// `kappa = exp(p)` at the build-grid nodes.
    pub fn kl_kappa(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(self.log_field(z)?.into_iter().map(f64::exp).collect())
    }

    /// Variance of the truncated field at build-grid node `k`.
    pub fn truncated_variance(&self, k: usize) -> f64 {
        self.eigenvalues
            .iter()
            .zip(self.eigenfunctions.column(k))
            .map(|(l, p)| l * p * p)
            .sum()
    }

    /// Eigenfunctions at arbitrary points via the Nyström extension
    /// (`modes x points`). Reproduces the stored values at build nodes.
    pub fn eigenfunctions_at(&self, points: &[[f64; 2]]) -> Array2<f64> {
        let nodes = self.grid.nodes();
        if points.len() == nodes.len() && points.iter().zip(&nodes).all(|(a, b)| a == b) {
            return self.eigenfunctions.clone();
        }
        let mut k = Array2::zeros((nodes.len(), points.len()));
        for (a, x) in nodes.iter().enumerate() {
            for (b, y) in points.iter().enumerate() {
                k[[a, b]] = self.weights[a] * kernel(*x, *y, self.length_scale, self.variance);
            }
        }
        let mut out = self.eigenfunctions.dot(&k);
        for (mut row, l) in out.axis_iter_mut(Axis(0)).zip(&self.eigenvalues) {
            if *l > 0.0 {
                row.mapv_inplace(|v| v / l);
            } else {
                row.fill(0.0);
            }
        }
        out
    }

    /// `sqrt(lambda_i) phi_i` at `points`.
    pub(crate) fn scaled_modes_at(&self, points: &[[f64; 2]]) -> Array2<f64> {
        let mut phi = self.eigenfunctions_at(points);
        for (mut row, l) in phi.axis_iter_mut(Axis(0)).zip(&self.eigenvalues) {
            let s = l.sqrt();
            row.mapv_inplace(|v| v * s);
        }
        phi
    }
}

/// Leading eigenpairs of a symmetric PSD matrix by block subspace iteration
/// with Rayleigh–Ritz projection. Returns descending eigenvalues and the
/// matching unit eigenvectors as rows.
fn top_eigenpairs(s: &Array2<f64>, count: usize) -> Result<(Vec<f64>, Array2<f64>)> {
    let n = s.nrows();
    let block = (count + (count / 2).max(8)).min(n);
    let mut rng = seeded(0x4b4c);
    let mut q = Array2::from_shape_fn((n, block), |_| StandardNormal.sample(&mut rng));
    orthonormalize(&mut q);

    for _ in 0..MAX_SWEEPS {
        let sq = s.dot(&q);
        let t = q.t().dot(&sq);
        let (theta, u) = symmetric_eigen(&t);
        let ritz = q.dot(&u);
        let s_ritz = sq.dot(&u);

        let scale = theta[0].abs().max(f64::MIN_POSITIVE);
        let converged = (0..count).all(|i| {
            let r = &s_ritz.column(i) - &(&ritz.column(i) * theta[i]);
            r.dot(&r).sqrt() <= RESIDUAL_TOLERANCE * scale
        });
        if converged {
            let mut vectors = Array2::zeros((count, n));
            for i in 0..count {
                let mut v = ritz.column(i).to_owned();
                let norm = v.dot(&v).sqrt();
                v /= norm;
                fix_sign(&mut v);
                vectors.row_mut(i).assign(&v);
            }
            return Ok((theta[..count].to_vec(), vectors));
        }
        q = s_ritz;
        orthonormalize(&mut q);
    }
    Err(Error::Numerical(format!(
        "subspace iteration did not converge for {count} eigenpairs"
    )))
}

/// Largest-magnitude entry positive (first one on ties).
fn fix_sign(v: &mut Array1<f64>) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
}

/// Modified Gram–Schmidt, applied twice.
fn orthonormalize(q: &mut Array2<f64>) {
    for _ in 0..2 {
        for j in 0..q.ncols() {
            for k in 0..j {
                let proj = q.column(k).dot(&q.column(j));
                let col_k = q.column(k).to_owned();
                q.column_mut(j).scaled_add(-proj, &col_k);
            }
            let norm = q.column(j).dot(&q.column(j)).sqrt();
            if norm > 0.0 {
                q.column_mut(j).mapv_inplace(|x| x / norm);
            }
        }
    }
}

/// Cyclic Jacobi eigensolver for a small symmetric matrix. Eigenvalues are
/// returned in descending order with eigenvectors as matching columns.
fn symmetric_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    // symmetrize round-off from the projection
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[[i, j]] + m[[j, i]]);
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let diag: f64 = (0..n).map(|i| m[[i, i]] * m[[i, i]]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = m[[p, r]];
                if apr.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[r, r]] - m[[p, p]]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkr = m[[k, r]];
                    m[[k, p]] = c * mkp - s * mkr;
                    m[[k, r]] = s * mkp + c * mkr;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mrk = m[[r, k]];
                    m[[p, k]] = c * mpk - s * mrk;
                    m[[r, k]] = s * mpk + c * mrk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkr = v[[k, r]];
                    v[[k, p]] = c * vkp - s * vkr;
                    v[[k, r]] = s * vkp + c * vkr;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
    let values = order.iter().map(|&i| m[[i, i]]).collect();
    let vectors = v.select(Axis(1), &order);
    (values, vectors)
}

/// Text dump of a KL basis keyed by resolution, length scale, variance and
/// truncation order.
pub fn write_kl_cache(field: &KlField) -> String {
    let key = field.key();
    let mut out = String::new();
    out.push_str("kl_cache\n");
    writeln!(out, "resolution: {}", key.resolution).unwrap();
    writeln!(out, "length_scale: {}", fmt_f64(key.length_scale)).unwrap();
    writeln!(out, "variance: {}", fmt_f64(key.variance)).unwrap();
    writeln!(out, "modes: {}", key.modes).unwrap();
    let ev: Vec<String> = field.eigenvalues.iter().map(|v| fmt_f64(*v)).collect();
    writeln!(out, "eigenvalues: {}", ev.join(" ")).unwrap();
    for row in field.eigenfunctions.rows() {
        let vals: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", vals.join(" ")).unwrap();
    }
    out
}

/// Parse a cache file; fails if its key differs from `expected`.
pub fn read_kl_cache(text: &str, expected: &KlKey) -> Result<KlField> {
    let mut cur = LineCursor::new(text);
    cur.expect_exact("kl_cache")?;
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("bad integer `{s}`: {e}")));
    let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("bad float `{s}`: {e}")));
    let key = KlKey {
        resolution: parse_usize(cur.expect_key("resolution")?)?,
        length_scale: parse_f(cur.expect_key("length_scale")?)?,
        variance: parse_f(cur.expect_key("variance")?)?,
        modes: parse_usize(cur.expect_key("modes")?)?,
    };
    if key != *expected {
        return Err(Error::Input(format!("KL cache key {key:?} does not match {expected:?}")));
    }
    let grid = Grid::new(key.resolution)?;
    let eigenvalues = parse_floats(cur.expect_key("eigenvalues")?)?;
    if eigenvalues.len() != key.modes {
        return Err(Error::Parse("eigenvalue count does not match modes".into()));
    }
    let n_nodes = grid.num_nodes();
    let mut flat = Vec::with_capacity(key.modes * n_nodes);
    for _ in 0..key.modes {
        let (no, line) = cur.next_line()?;
        let row = parse_floats(line)?;
        if row.len() != n_nodes {
            return Err(Error::Parse(format!("line {no}: expected {n_nodes} nodal values")));
        }
        flat.extend(row);
    }
    Ok(KlField {
        grid,
        length_scale: key.length_scale,
        variance: key.variance,
        weights: quadrature_weights(&grid),
        eigenvalues,
        eigenfunctions: Array2::from_shape_vec((key.modes, n_nodes), flat).unwrap(),
    })
}

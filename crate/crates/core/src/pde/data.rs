use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{observe, ForwardProblem, Grid};
use crate::nn::io::{fmt_f64, parse_floats};
use crate::rng::seeded;
use crate::{max_norm, Error, Result};

/// How observation noise is generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// `d_j = u_j + max_j |u_j| * delta * xi_j`.
    Relative { delta: f64 },
    /// `d_j = u_j + sigma * xi_j`.
    Absolute { sigma: f64 },
}

impl NoiseSpec {
    pub fn mode(&self) -> &'static str {
        match self {
            NoiseSpec::Relative { .. } => "relative",
            NoiseSpec::Absolute { .. } => "absolute",
        }
    }

    pub fn level(&self) -> f64 {
        match *self {
            NoiseSpec::Relative { delta } => delta,
            NoiseSpec::Absolute { sigma } => sigma,
        }
    }

    pub fn from_mode(mode: &str, level: f64) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::config("noise_level", "must be a nonnegative number"));
        }
        match mode {
            "relative" => Ok(NoiseSpec::Relative { delta: level }),
            "absolute" => Ok(NoiseSpec::Absolute { sigma: level }),
            other => Err(Error::config("noise_mode", format!("unknown mode `{other}`"))),
        }
    }
}

/// Noisy sensor data plus the noise standard deviation per component.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub data: Vec<f64>,
    pub sensors: Vec<[f64; 2]>,
    pub noise_sigma: Vec<f64>,
    /// Relative level used at generation time, if any.
    pub noise_level: Option<f64>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.is_empty() {
            return Err(Error::Input("observation has no data".into()));
        }
        if self.noise_sigma.len() != self.data.len() {
            return Err(Error::shape("noise sigma", self.data.len(), self.noise_sigma.len()));
        }
        if !self.noise_sigma.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::Input("noise sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Perturb clean sensor values; returns the data and the per-component sigma.
pub fn add_noise<R: Rng + ?Sized>(clean: &[f64], noise: NoiseSpec, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let sigma = match noise {
        NoiseSpec::Relative { delta } => max_norm(clean) * delta,
        NoiseSpec::Absolute { sigma } => sigma,
    };
    let data = clean
        .iter()
        .map(|u| {
            let xi: f64 = rng.sample(StandardNormal);
            u + sigma * xi
        })
        .collect();
    (data, vec![sigma; clean.len()])
}

/// Solve on the (finer) data grid at `z_true`, observe and add noise.
///
/// Fails when the data grid is not strictly finer than `inversion`.
pub fn generate_data(
    problem_fine: &ForwardProblem,
    inversion: &Grid,
    z_true: &[f64],
    noise: NoiseSpec,
    seed: u64,
) -> Result<Observation> {
    let fine = problem_fine.grid().resolution();
    if fine == inversion.resolution() {
        return Err(Error::InverseCrime(fine));
    }
    if fine < inversion.resolution() {
        return Err(Error::Input(format!(
            "data grid ({fine}) must be finer than the inversion grid ({})",
            inversion.resolution()
        )));
    }
    let sol = problem_fine.solve(z_true)?;
    let clean = observe(&sol, problem_fine.sensors())?;
    let mut rng = seeded(seed);
    let (data, noise_sigma) = add_noise(&clean, noise, &mut rng);
    Ok(Observation {
        data,
        sensors: problem_fine.sensors().points().to_vec(),
        noise_sigma,
        noise_level: match noise {
            NoiseSpec::Relative { delta } => Some(delta),
            NoiseSpec::Absolute { .. } => None,
        },
    })
}

/// Sidecar metadata for a data file.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMetadata {
    pub seed: u64,
    pub noise: NoiseSpec,
    pub data_grid: usize,
    pub inversion_grid: usize,
    pub z_true: Vec<f64>,
    pub config_hash: String,
}

/// Write `sensor_x,sensor_y,value` CSV plus a `key = value` sidecar.
pub fn write_data(csv: &Path, meta_path: &Path, obs: &Observation, meta: &DataMetadata) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# config_hash={} seed={}", meta.config_hash, meta.seed).unwrap();
    out.push_str("sensor_x,sensor_y,value\n");
    for (p, v) in obs.sensors.iter().zip(&obs.data) {
        writeln!(out, "{},{},{}", fmt_f64(p[0]), fmt_f64(p[1]), fmt_f64(*v)).unwrap();
    }
    std::fs::write(csv, out)?;

    let sigma = obs.noise_sigma.first().copied().unwrap_or(0.0);
    let mut side = String::new();
    writeln!(side, "config_hash = {}", meta.config_hash).unwrap();
    writeln!(side, "seed = {}", meta.seed).unwrap();
    writeln!(side, "noise_mode = {}", meta.noise.mode()).unwrap();
    writeln!(side, "noise_level = {}", fmt_f64(meta.noise.level())).unwrap();
    writeln!(side, "noise_sigma = {}", fmt_f64(sigma)).unwrap();
    writeln!(side, "data_grid = {}", meta.data_grid).unwrap();
    writeln!(side, "inversion_grid = {}", meta.inversion_grid).unwrap();
    let z: Vec<String> = meta.z_true.iter().map(|x| fmt_f64(*x)).collect();
    writeln!(side, "z_true = {}", z.join(", ")).unwrap();
    std::fs::write(meta_path, side)?;
    Ok(())
}

pub fn read_data(csv: &Path, meta_path: &Path) -> Result<(Observation, DataMetadata)> {
    let text = std::fs::read_to_string(csv)?;
    let mut rows = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header = rows.next().ok_or_else(|| Error::Parse("empty data file".into()))?;
    if header.trim() != "sensor_x,sensor_y,value" {
        return Err(Error::Parse(format!("unexpected data header `{header}`")));
    }
    let mut sensors = Vec::new();
    let mut data = Vec::new();
    for row in rows {
        let vals = parse_floats(&row.replace(',', " "))?;
        if vals.len() != 3 {
            return Err(Error::Parse(format!("data row `{row}` needs 3 columns")));
        }
        sensors.push([vals[0], vals[1]]);
        data.push(vals[2]);
    }

    let side = std::fs::read_to_string(meta_path)?;
    let kv = crate::experiment::parse_key_values(&side)?;
    let get = |k: &str| kv.get(k).ok_or_else(|| Error::Parse(format!("metadata missing `{k}`")));
    let num = |k: &str| -> Result<f64> {
        get(k)?.parse::<f64>().map_err(|e| Error::Parse(format!("metadata `{k}`: {e}")))
    };
    let int = |k: &str| -> Result<u64> {
        get(k)?.parse::<u64>().map_err(|e| Error::Parse(format!("metadata `{k}`: {e}")))
    };
    let noise = NoiseSpec::from_mode(get("noise_mode")?, num("noise_level")?)?;
    let sigma = num("noise_sigma")?;
    let z_true = parse_floats(&get("z_true")?.replace(',', " "))?;
    let meta = DataMetadata {
        seed: int("seed")?,
        noise,
        data_grid: int("data_grid")? as usize,
        inversion_grid: int("inversion_grid")? as usize,
        z_true,
        config_hash: get("config_hash")?.clone(),
    };
    let obs = Observation {
        noise_sigma: vec![sigma; data.len()],
        data,
        sensors,
        noise_level: match noise {
            NoiseSpec::Relative { delta } => Some(delta),
            NoiseSpec::Absolute { .. } => None,
        },
    };
    Ok((obs, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Permeability, RbfField};
    use crate::pde::Sensors;
    use crate::ForwardModel;

    fn fine_problem() -> ForwardProblem {
        ForwardProblem::new(Grid::new(15).unwrap(), Permeability::Rbf(RbfField::standard()), Sensors::standard()).unwrap()
    }

    #[test]
    fn zero_noise_is_clean() {
        let p = fine_problem();
        let z = vec![0.3; 9];
        let clean = p.evaluate(&z).unwrap();
        let obs = generate_data(&p, &Grid::new(7).unwrap(), &z, NoiseSpec::Relative { delta: 0.0 }, 5).unwrap();
        assert_eq!(obs.data, clean);
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let p = fine_problem();
        let g = Grid::new(7).unwrap();
        let z = vec![-0.2; 9];
        let a = generate_data(&p, &g, &z, NoiseSpec::Relative { delta: 0.05 }, 42).unwrap();
        let b = generate_data(&p, &g, &z, NoiseSpec::Relative { delta: 0.05 }, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(p.evaluations(), 2);
    }

    #[test]
    fn equal_grids_are_an_inverse_crime() {
        let p = fine_problem();
        let err = generate_data(&p, &Grid::new(15).unwrap(), &[0.0; 9], NoiseSpec::Absolute { sigma: 0.05 }, 0);
        assert!(matches!(err, Err(Error::InverseCrime(15))));
        assert!(generate_data(&p, &Grid::new(31).unwrap(), &[0.0; 9], NoiseSpec::Absolute { sigma: 0.05 }, 0).is_err());
    }

    #[test]
    fn relative_noise_has_requested_spread() {
        let clean: Vec<f64> = (0..81).map(|k| 3.0 * ((k as f64) * 0.3).sin()).collect();
        let scale = max_norm(&clean);
        let mut rng = seeded(2024);
        let (mut sum, mut sum2, mut n) = (0.0, 0.0, 0.0);
        for _ in 0..10_000 {
            let (d, sigma) = add_noise(&clean, NoiseSpec::Relative { delta: 0.05 }, &mut rng);
            assert!((sigma[0] - 0.05 * scale).abs() < 1e-15);
            for (dj, uj) in d.iter().zip(&clean) {
                let e = (dj - uj) / scale;
                sum += e;
                sum2 += e * e;
                n += 1.0;
            }
        }
        let mean = sum / n;
        let sd = (sum2 / n - mean * mean).sqrt();
        assert!((0.049..=0.051).contains(&sd), "{sd}");
    }

    #[test]
    fn data_files_round_trip() {
        let p = fine_problem();
        let z: Vec<f64> = (0..9).map(|i| 0.1 * i as f64 - 0.4).collect();
        let obs = generate_data(&p, &Grid::new(7).unwrap(), &z, NoiseSpec::Relative { delta: 0.05 }, 8).unwrap();
        let meta = DataMetadata {
            seed: 8,
            noise: NoiseSpec::Relative { delta: 0.05 },
            data_grid: 15,
            inversion_grid: 7,
            z_true: z,
            config_hash: "abc123".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let (csv, side) = (dir.path().join("data.csv"), dir.path().join("data.meta"));
        write_data(&csv, &side, &obs, &meta).unwrap();
        let (obs2, meta2) = read_data(&csv, &side).unwrap();
        assert_eq!(obs2, obs);
        assert_eq!(meta2, meta);
    }
}

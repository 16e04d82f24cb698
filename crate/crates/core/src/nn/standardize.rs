use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{train, Network, TrainConfig, TrainReport, TrainingSet};
use crate::{Error, Result};

/// Componentwise affine map `v -> (v - shift) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Affine {
    pub fn identity(dim: usize) -> Self {
        Self {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Zero-mean, unit-variance transform fitted to the rows of `data`.
    ///
    /// Columns with (numerically) zero spread keep unit scale.
    pub fn fit(data: ArrayView2<f64>) -> Self {
        let n = data.nrows().max(1) as f64;
        let mean = data.sum_axis(Axis(0)) / n;
        let mut scale = Vec::with_capacity(data.ncols());
        for (j, col) in data.axis_iter(Axis(1)).enumerate() {
            let var = col.iter().map(|x| (x - mean[j]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let floor = 1e-10 * mean[j].abs().max(1e-300);
            scale.push(if sd > floor && sd > 0.0 { sd } else { 1.0 });
        }
        Self {
            shift: mean.to_vec(),
            scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn forward(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(x, (s, c))| (x - s) / c)
            .collect()
    }

    pub fn inverse(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.shift.iter().zip(&self.scale))
            .map(|(x, (s, c))| x * c + s)
            .collect()
    }

    pub fn forward_rows(&self, data: ArrayView2<f64>) -> Array2<f64> {
        let shift = Array1::from(self.shift.clone());
        let scale = Array1::from(self.scale.clone());
        (&data - &shift) / &scale
    }

    pub fn inverse_rows(&self, data: ArrayView2<f64>) -> Array2<f64> {
        let shift = Array1::from(self.shift.clone());
        let scale = Array1::from(self.scale.clone());
        &data * &scale + &shift
    }
}

/// A network that works in physical units: inputs are standardized before the
/// forward pass and outputs de-standardized after it.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedNetwork {
    pub input: Affine,
    pub net: Network,
    pub output: Affine,
}

impl StandardizedNetwork {
    pub fn new(input: Affine, net: Network, output: Affine) -> Result<Self> {
        if input.dim() != net.input_dim() {
            return Err(Error::shape("input transform", net.input_dim(), input.dim()));
        }
        if output.dim() != net.output_dim() {
            return Err(Error::shape("output transform", net.output_dim(), output.dim()));
        }
        Ok(Self { input, net, output })
    }

    /// Fit transforms on `data`, then train `init` on the standardized rows.
    pub fn fit(init: &Network, data: &TrainingSet, cfg: &TrainConfig) -> Result<(Self, TrainReport)> {
        let input = Affine::fit(data.inputs.view());
        let output = Affine::fit(data.targets.view());
        Self::fit_with(input, output, init, data, cfg)
    }

    /// Train `init` on `data` mapped through the given fixed transforms.
    pub fn fit_with(
        input: Affine,
        output: Affine,
        init: &Network,
        data: &TrainingSet,
        cfg: &TrainConfig,
    ) -> Result<(Self, TrainReport)> {
        let scaled = TrainingSet::new(
            input.forward_rows(data.inputs.view()),
            output.forward_rows(data.targets.view()),
        )?;
        let report = train(init, &scaled, cfg)?;
        let model = Self::new(input, report.network.clone(), output)?;
        Ok((model, report))
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::shape("surrogate input", self.input_dim(), x.len()));
        }
        let y = self.net.forward(&self.input.forward(x))?;
        Ok(self.output.inverse(&y))
    }

    pub fn predict_rows(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let y = self.net.forward_batch(self.input.forward_rows(x).view())?;
        Ok(self.output.inverse_rows(y.view()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn fitted_transform_standardizes() {
        let data = array![[1.0, 10.0, 5.0], [3.0, 30.0, 5.0], [5.0, 20.0, 5.0]];
        let t = Affine::fit(data.view());
        let z = t.forward_rows(data.view());
        for j in 0..2 {
            let col = z.column(j);
            let mean = col.sum() / 3.0;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-14);
            assert!((var - 1.0).abs() < 1e-12);
        }
        // constant column keeps unit scale
        assert_eq!(t.scale[2], 1.0);
    }

    #[test]
    fn round_trip() {
        let t = Affine {
            shift: vec![1.5, -3.0],
            scale: vec![0.2, 7.0],
        };
        let v = [4.25, 1e3];
        let back = t.inverse(&t.forward(&v));
        for (a, b) in back.iter().zip(v) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

//! Low-fidelity and composite network surrogates.
//!
//! A [`SurrogateModel`] is either a prior-trained network `NN_L(z)` or a
//! composite `NN_H(z) = head(z, base(z))` whose base is itself a surrogate.
//! Each call to [`refine`] wraps the current model in one more head trained
//! on `Q` high-fidelity solves drawn uniformly from a max-norm ball.

use std::fmt::Write as _;

use ndarray::{concatenate, Array2, Axis};
use rand::Rng;

use crate::bayes::Prior;
use crate::nn::io::{parse_standardized, LineCursor};
use crate::nn::{write_standardized, Network, StandardizedNetwork, TrainConfig, TrainReport, TrainingSet};
use crate::rng::seeded;
use crate::{Error, ForwardModel, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum SurrogateModel {
    LowFidelity(StandardizedNetwork),
    Composite {
        base: Box<SurrogateModel>,
        head: StandardizedNetwork,
    },
}

impl SurrogateModel {
    /// Number of composite heads stacked on the low-fidelity network.
    pub fn depth(&self) -> usize {
        match self {
            SurrogateModel::LowFidelity(_) => 0,
            SurrogateModel::Composite { base, .. } => base.depth() + 1,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SurrogateModel::LowFidelity(n) => n.input_dim(),
            SurrogateModel::Composite { base, .. } => base.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            SurrogateModel::LowFidelity(n) => n.output_dim(),
            SurrogateModel::Composite { head, .. } => head.output_dim(),
        }
    }

    /// The innermost (prior-trained) network.
    pub fn low_fidelity(&self) -> &StandardizedNetwork {
        match self {
            SurrogateModel::LowFidelity(n) => n,
            SurrogateModel::Composite { base, .. } => base.low_fidelity(),
        }
    }

    pub fn predict(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self {
            SurrogateModel::LowFidelity(n) => n.predict(z),
            SurrogateModel::Composite { base, head } => {
                let mut x = z.to_vec();
                x.extend(base.predict(z)?);
                head.predict(&x)
            }
        }
    }

    /// Batched prediction, one row per input.
    pub fn predict_rows(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            SurrogateModel::LowFidelity(n) => n.predict_rows(z.view()),
            SurrogateModel::Composite { base, head } => {
                let y = base.predict_rows(z)?;
                head.predict_rows(concatenate![Axis(1), *z, y].view())
            }
        }
    }

    /// Wrap `self` under a new head. The head must read `n + m_obs` inputs.
    pub fn compose(self, head: StandardizedNetwork) -> Result<Self> {
        let want = self.input_dim() + self.output_dim();
        if head.input_dim() != want {
            return Err(Error::shape("composite head input", want, head.input_dim()));
        }
        if head.output_dim() != self.output_dim() {
            return Err(Error::shape("composite head output", self.output_dim(), head.output_dim()));
        }
        Ok(SurrogateModel::Composite {
            base: Box::new(self),
            head,
        })
    }

    /// Networks from the base outward.
    fn layers(&self) -> Vec<&StandardizedNetwork> {
        match self {
            SurrogateModel::LowFidelity(n) => vec![n],
            SurrogateModel::Composite { base, head } => {
                let mut v = base.layers();
                v.push(head);
                v
            }
        }
    }
}

impl ForwardModel for SurrogateModel {
    fn input_dim(&self) -> usize {
        SurrogateModel::input_dim(self)
    }

    fn output_dim(&self) -> usize {
        SurrogateModel::output_dim(self)
    }

    fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.predict(z)
    }
}

/// `depth: k` followed by `k + 1` standardized network blocks, base first.
pub fn write_surrogate(model: &SurrogateModel) -> String {
    let mut out = String::new();
    writeln!(out, "depth: {}", model.depth()).unwrap();
    for net in model.layers() {
        out.push_str(&write_standardized(net));
    }
    out
}

pub fn read_surrogate(text: &str) -> Result<SurrogateModel> {
    let mut cur = LineCursor::new(text);
    let depth: usize = cur
        .expect_key("depth")?
        .parse()
        .map_err(|e| Error::Parse(format!("bad depth: {e}")))?;
    let mut model = SurrogateModel::LowFidelity(parse_standardized(&mut cur)?);
    for _ in 0..depth {
        let head = parse_standardized(&mut cur)?;
        model = model.compose(head)?;
    }
    if !cur.is_done() {
        return Err(Error::Parse("trailing content after surrogate blocks".into()));
    }
    Ok(model)
}

/// `{z : |z - center|_inf <= radius}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl LocalBall {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::config("radius", "must be positive"));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.center.len()
            && z.iter().zip(&self.center).all(|(a, c)| (a - c).abs() <= self.radius)
    }

    /// Componentwise uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.center
            .iter()
            .map(|c| c + self.radius * (2.0 * rng.random::<f64>() - 1.0))
            .collect()
    }
}

/// Evaluate a forward model on every input row.
pub fn evaluate_all<F: ForwardModel + ?Sized>(model: &F, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    inputs.iter().map(|z| model.evaluate(z)).collect()
}

fn layer_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut dims = Vec::with_capacity(hidden.len() + 2);
    dims.push(input);
    dims.extend_from_slice(hidden);
    dims.push(output);
    dims
}

/// Result of offline training on prior samples.
#[derive(Debug, Clone)]
pub struct LowFidelityBuild {
    pub model: SurrogateModel,
    pub report: TrainReport,
    pub data: TrainingSet,
}

/// Draw `n` prior samples, solve at each and train `NN_L`.
///
/// `hidden` lists the hidden-layer widths. Performs exactly `n` high-fidelity
/// evaluations.
pub fn build_low_fidelity<F: ForwardModel + ?Sized>(
    high: &F,
    prior: &Prior,
    n: usize,
    hidden: &[usize],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LowFidelityBuild> {
    if n < 2 {
        return Err(Error::config("n_offline", "need at least two training samples"));
    }
    if prior.dim() != high.input_dim() {
        return Err(Error::shape("prior dimension", high.input_dim(), prior.dim()));
    }
    cfg.validate()?;
    let mut rng = seeded(seed);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| prior.sample(&mut rng)).collect();
    let targets = evaluate_all(high, &inputs)?;
    let data = TrainingSet::from_rows(&inputs, &targets)?;
    let init = Network::new(&layer_dims(high.input_dim(), hidden, high.output_dim()), &mut rng)?;
    let cfg = cfg.clone().with_seed(rng.random());
    let (net, report) = StandardizedNetwork::fit(&init, &data, &cfg)?;
    Ok(LowFidelityBuild {
        model: SurrogateModel::LowFidelity(net),
        report,
        data,
    })
}

/// Train a fresh head on `((z_k, base(z_k)), y_k)` and compose it over `base`.
pub fn fit_head<R: Rng + ?Sized>(
    base: SurrogateModel,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    hidden: &[usize],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<SurrogateModel> {
    let z = crate::nn::TrainingSet::from_rows(inputs, targets)?;
    let low = base.predict_rows(&z.inputs)?;
    let data = TrainingSet::new(concatenate![Axis(1), z.inputs, low], z.targets)?;
    let dims = layer_dims(data.input_dim(), hidden, data.output_dim());
    let init = Network::new(&dims, rng)?;
    let cfg = cfg.clone().with_seed(rng.random());
    let (head, _) = StandardizedNetwork::fit(&init, &data, &cfg)?;
    base.compose(head)
}

/// One refinement step: `q` uniform draws from `ball`, `q` high-fidelity
/// solves, a fresh head over `model`.
pub fn refine<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
    model: SurrogateModel,
    high: &F,
    ball: &LocalBall,
    q: usize,
    head_hidden: &[usize],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<SurrogateModel> {
    let mut refiner = Refiner::new(q, head_hidden.to_vec(), cfg.clone(), RefineMode::default())?;
    refiner.refine(model, high, ball, rng)
}

/// Variants of the refinement step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RefineMode {
    /// Replace the top head instead of nesting; the head is trained on every
    /// local sample gathered so far.
    pub refit_head_only: bool,
    /// Train each new nested head on all local samples gathered so far.
    pub pool_local_data: bool,
}

/// Stateful refinement driver; keeps local high-fidelity samples when a mode
/// needs them.
#[derive(Debug, Clone)]
pub struct Refiner {
    q: usize,
    head_hidden: Vec<usize>,
    cfg: TrainConfig,
    mode: RefineMode,
    pool_inputs: Vec<Vec<f64>>,
    pool_targets: Vec<Vec<f64>>,
}

impl Refiner {
    pub fn new(q: usize, head_hidden: Vec<usize>, cfg: TrainConfig, mode: RefineMode) -> Result<Self> {
        if q < 2 {
            return Err(Error::config("q", "need at least two local samples"));
        }
        cfg.validate()?;
        Ok(Self {
            q,
            head_hidden,
            cfg,
            mode,
            pool_inputs: Vec::new(),
            pool_targets: Vec::new(),
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn refine<F: ForwardModel + ?Sized, R: Rng + ?Sized>(
        &mut self,
        model: SurrogateModel,
        high: &F,
        ball: &LocalBall,
        rng: &mut R,
    ) -> Result<SurrogateModel> {
        if ball.center.len() != model.input_dim() {
            return Err(Error::shape("ball centre", model.input_dim(), ball.center.len()));
        }
        let inputs: Vec<Vec<f64>> = (0..self.q).map(|_| ball.sample(rng)).collect();
        let targets = evaluate_all(high, &inputs)?;

        let pooled = self.mode.refit_head_only || self.mode.pool_local_data;
        if !pooled {
            return fit_head(model, &inputs, &targets, &self.head_hidden, &self.cfg, rng);
        }
        self.pool_inputs.extend(inputs);
        self.pool_targets.extend(targets);
        let base = match (self.mode.refit_head_only, model) {
            (true, SurrogateModel::Composite { base, .. }) => *base,
            (_, m) => m,
        };
        fit_head(base, &self.pool_inputs, &self.pool_targets, &self.head_hidden, &self.cfg, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Affine;

    /// `y = (sin z0 + z1, z0 z1, z1^2)`.
    struct Toy;

    impl ForwardModel for Toy {
        fn input_dim(&self) -> usize {
            2
        }
        fn output_dim(&self) -> usize {
            3
        }
        fn evaluate(&self, z: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![z[0].sin() + z[1], z[0] * z[1], z[1] * z[1]])
        }
    }

    fn quick_cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn ball_samples_stay_inside() {
        let ball = LocalBall::new(vec![1.0, -2.0, 0.5], 0.3).unwrap();
        let mut rng = seeded(1);
        for _ in 0..1000 {
            assert!(ball.contains(&ball.sample(&mut rng)));
        }
        assert!(LocalBall::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn ball_sample_mean_is_centre() {
        let ball = LocalBall::new(vec![0.7, -1.1], 0.2).unwrap();
        let mut rng = seeded(9);
        let n = 10_000;
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let s = ball.sample(&mut rng);
            sum[0] += s[0];
            sum[1] += s[1];
        }
        // uniform on [c - R, c + R] has sd R / sqrt(3)
        let se = 0.2 / 3f64.sqrt() / (n as f64).sqrt();
        for i in 0..2 {
            assert!((sum[i] / n as f64 - ball.center[i]).abs() < 3.0 * se);
        }
    }

    #[test]
    fn low_fidelity_build_and_determinism() {
        let prior = Prior::standard_normal(2);
        let a = build_low_fidelity(&Toy, &prior, 30, &[16, 16], &quick_cfg(300), 5).unwrap();
        let b = build_low_fidelity(&Toy, &prior, 30, &[16, 16], &quick_cfg(300), 5).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.model.depth(), 0);
        assert_eq!(a.model.output_dim(), 3);
        assert!(build_low_fidelity(&Toy, &prior, 1, &[4], &quick_cfg(1), 5).is_err());
    }

    #[test]
    fn composition_nests_and_round_trips() {
        let prior = Prior::standard_normal(2);
        let lf = build_low_fidelity(&Toy, &prior, 10, &[4], &quick_cfg(5), 2).unwrap().model;
        let ball = LocalBall::new(vec![0.1, 0.2], 0.3).unwrap();
        let mut rng = seeded(4);
        let one = refine(lf, &Toy, &ball, 5, &[6], &quick_cfg(5), &mut rng).unwrap();
        let two = refine(one.clone(), &Toy, &ball, 5, &[6], &quick_cfg(5), &mut rng).unwrap();
        assert_eq!(one.depth(), 1);
        assert_eq!(two.depth(), 2);
        let text = write_surrogate(&two);
        let back = read_surrogate(&text).unwrap();
        assert_eq!(back, two);
        let z = [0.3, -0.4];
        assert_eq!(back.predict(&z).unwrap(), two.predict(&z).unwrap());
        let rows = Array2::from_shape_vec((1, 2), z.to_vec()).unwrap();
        let batch = two.predict_rows(&rows).unwrap();
        for (a, b) in batch.row(0).iter().zip(two.predict(&z).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn refit_head_only_keeps_depth_one() {
        let prior = Prior::standard_normal(2);
        let lf = build_low_fidelity(&Toy, &prior, 10, &[4], &quick_cfg(5), 2).unwrap().model;
        let mode = RefineMode {
            refit_head_only: true,
            ..RefineMode::default()
        };
        let mut refiner = Refiner::new(4, vec![5], quick_cfg(5), mode).unwrap();
        let ball = LocalBall::new(vec![0.0, 0.0], 0.5).unwrap();
        let mut rng = seeded(0);
        let mut model = lf;
        for _ in 0..3 {
            model = refiner.refine(model, &Toy, &ball, &mut rng).unwrap();
            assert_eq!(model.depth(), 1);
        }
        assert_eq!(refiner.pool_inputs.len(), 12);
    }

    #[test]
    fn head_must_match_widths() {
        let net = Network::zeros(&[2, 3]).unwrap();
        let lf = SurrogateModel::LowFidelity(
            StandardizedNetwork::new(Affine::identity(2), net, Affine::identity(3)).unwrap(),
        );
        let bad = StandardizedNetwork::new(Affine::identity(2), Network::zeros(&[2, 3]).unwrap(), Affine::identity(3)).unwrap();
        assert!(lf.compose(bad).is_err());
    }
}

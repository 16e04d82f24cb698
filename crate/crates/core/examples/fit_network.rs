//! Fit a small Swish network to `sin(2 pi x) + y^2` on the unit square.

use mfsurrogate::nn::{Network, StandardizedNetwork, TrainConfig, TrainingSet};
use mfsurrogate::rng::seeded;
use rand::Rng;

fn target(x: &[f64]) -> f64 {
    (2.0 * std::f64::consts::PI * x[0]).sin() + x[1] * x[1]
}

fn main() -> mfsurrogate::Result<()> {
    let mut rng = seeded(7);
    let inputs: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
    let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![target(x)]).collect();
    let data = TrainingSet::from_rows(&inputs, &targets)?;

    let init = Network::new(&[2, 30, 30, 1], &mut rng)?;
    let cfg = TrainConfig {
        epochs: 2000,
        ..TrainConfig::offline()
    };
    let (model, report) = StandardizedNetwork::fit(&init, &data, &cfg)?;
    println!(
        "standardized loss {:.3e} -> {:.3e}",
        report.initial_loss,
        report.final_loss().unwrap_or(f64::NAN)
    );

    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        worst = worst.max((model.predict(&x)?[0] - target(&x)).abs());
    }
    println!("max error on 1000 fresh points: {worst:.3e}");
    Ok(())
}

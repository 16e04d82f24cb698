use mfsurrogate::nn::{Affine, Network, TrainingSet};
use mfsurrogate::rng::seeded;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_net(rng: &mut ChaCha8Rng) -> Network {
    let depth = rng.random_range(0..=2);
    let mut dims = vec![rng.random_range(1..=6)];
    for _ in 0..depth {
        dims.push(rng.random_range(1..=6));
    }
    dims.push(rng.random_range(1..=6));
    let mut net = Network::new(&dims, rng).unwrap();
    // non-zero biases so every parameter is exercised
    let p: Vec<f64> = net.params().iter().map(|_| rng.random_range(-1.0..1.0)).collect();
    net.set_params(&p).unwrap();
    net
}

fn random_batch(net: &Network, rows: usize, rng: &mut ChaCha8Rng) -> TrainingSet {
    let x = Array2::from_shape_fn((rows, net.input_dim()), |_| rng.random_range(-2.0..2.0));
    let y = Array2::from_shape_fn((rows, net.output_dim()), |_| rng.random_range(-2.0..2.0));
    TrainingSet::new(x, y).unwrap()
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = seeded(2024);
    let h = 1e-5;
    for case in 0..20 {
        let net = random_net(&mut rng);
        let batch = random_batch(&net, rng.random_range(1..=5), &mut rng);
        let lambda = if case % 2 == 0 { 0.0 } else { 0.3 };
        let analytic = net.gradient(&batch, lambda).unwrap().flatten();
        let theta = net.params();
        for k in 0..theta.len() {
            let mut plus = net.clone();
            let mut minus = net.clone();
            let mut tp = theta.clone();
            tp[k] += h;
            plus.set_params(&tp).unwrap();
            let mut tm = theta.clone();
            tm[k] -= h;
            minus.set_params(&tm).unwrap();
            let fd = (plus.loss(&batch, lambda).unwrap() - minus.loss(&batch, lambda).unwrap()) / (2.0 * h);
            let diff = (fd - analytic[k]).abs();
            let rel = diff / fd.abs().max(analytic[k].abs());
            assert!(
                rel < 1e-4 || diff < 1e-8,
                "case {case} dims {:?} param {k}: backprop {} vs fd {fd}",
                net.dims(),
                analytic[k]
            );
        }
    }
}

#[test]
fn small_gradient_step_decreases_loss() {
    let mut rng = seeded(77);
    for _ in 0..10 {
        let net = random_net(&mut rng);
        let batch = random_batch(&net, 4, &mut rng);
        let before = net.loss(&batch, 0.0).unwrap();
        let grad = net.gradient(&batch, 0.0).unwrap();
        assert!(!grad.is_zero());
        let mut stepped = net.clone();
        stepped.descend(&grad, 1e-4);
        assert!(stepped.loss(&batch, 0.0).unwrap() < before);
    }
}

#[test]
fn regulariser_gradient_is_two_lambda_theta() {
    let mut rng = seeded(5);
    let net = random_net(&mut rng);
    // targets equal to the network's own outputs: zero residual
    let x = Array2::from_shape_fn((3, net.input_dim()), |_| rng.random_range(-1.0..1.0));
    let y = net.forward_batch(x.view()).unwrap();
    let batch = TrainingSet::new(x, y).unwrap();
    let g = net.gradient(&batch, 0.5).unwrap().flatten();
    for (gi, ti) in g.iter().zip(net.params()) {
        assert!((gi - ti).abs() < 1e-12);
    }
}

#[test]
fn forward_is_pure() {
    let mut rng = seeded(9);
    let net = random_net(&mut rng);
    let z: Vec<f64> = (0..net.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let first = net.forward(&z).unwrap();
    for _ in 0..5 {
        assert_eq!(net.forward(&z).unwrap(), first);
    }
}

proptest! {
    #[test]
    fn loss_ignores_row_order(seed in 0u64..1000, rows in 2usize..8, shift in 1usize..7) {
        let mut rng = seeded(seed);
        let net = random_net(&mut rng);
        let batch = random_batch(&net, rows, &mut rng);
        let order: Vec<usize> = (0..rows).map(|i| (i + shift) % rows).collect();
        let a = net.loss(&batch, 0.1).unwrap();
        let b = net.loss(&batch.select(&order), 0.1).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn standardization_round_trips(
        rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 2..12),
        probe in proptest::collection::vec(-1e3f64..1e3, 3),
    ) {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let data = Array2::from_shape_vec((rows.len(), 3), flat).unwrap();
        let t = Affine::fit(data.view());
        let back = t.inverse(&t.forward(&probe));
        for (a, b) in back.iter().zip(&probe) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}

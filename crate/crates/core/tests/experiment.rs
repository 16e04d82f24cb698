use std::path::Path;

use mfsurrogate::experiment::{read_field_matrix, run_experiment, summarize, ExperimentConfig, Setup};
use mfsurrogate::field::{KlField, Permeability};
use mfsurrogate::mcmc::{read_samples, ChainStore, SampleRecord};
use mfsurrogate::pde::Grid;

/// A small but complete Example-1 configuration.
fn small(method: &str, dir: &Path) -> ExperimentConfig {
    let text = format!(
        "method = {method}
inversion_grid = 15
data_grid = 31
n_offline = 12
lf_hidden = 12,12
head_hidden = 8
offline_epochs = 100
online_epochs = 60
subchain_length = 20
max_corrections = 4
q = 3
tol = 0.01
chain_length = 80
output_dir = {}
",
        dir.display()
    );
    ExperimentConfig::parse(&text, &[]).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("a");
    let cfg = small("adnn", &dir);
    let files = ["samples.csv", "refinements.csv", "kappa_mean.csv", "surrogate.txt", "data.csv", "metrics.json"];
    run_experiment(&cfg).unwrap();
    let first: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect();
    run_experiment(&cfg).unwrap();
    for (f, bytes) in files.iter().zip(&first) {
        assert_eq!(&std::fs::read(dir.join(f)).unwrap(), bytes, "{f} differs");
    }
    let text = String::from_utf8(first[0].clone()).unwrap();
    assert!(text.starts_with(&format!("# config_hash={} seed=1", cfg.hash())));
}

#[test]
fn method_costs_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let direct = run_experiment(&small("direct", &tmp.path().join("d"))).unwrap();
    // one solve for the starting state, then one per step
    assert_eq!(direct.metrics.offline_evals, 0);
    assert_eq!(direct.metrics.online_evals, 81);
    assert_eq!(direct.metrics.data_evals, 1);

    let dnn = run_experiment(&small("dnn", &tmp.path().join("n"))).unwrap();
    assert_eq!(dnn.metrics.offline_evals, 12);
    assert_eq!(dnn.metrics.online_evals, 0);
    assert_eq!(dnn.metrics.samples, 80);

    let adnn = run_experiment(&small("adnn", &tmp.path().join("a"))).unwrap();
    let m = &adnn.metrics;
    assert_eq!(m.online_evals, 2 * 4 + 3 * m.refinements as u64);
    assert_eq!(m.samples, 80);
    assert_eq!(m.final_depth, m.refinements);

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("a/metrics.json")).unwrap()).unwrap();
    assert_eq!(json["high_fidelity_evals"]["online"], m.online_evals);
    assert_eq!(json["high_fidelity_evals"]["total"], 12 + m.online_evals);
    assert_eq!(json["method"], "adnn");
}

#[test]
fn stored_samples_summarize_to_the_same_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("d");
    let cfg = small("direct", &dir);
    let out = run_experiment(&cfg).unwrap();
    let store = read_samples(&dir.join("samples.csv")).unwrap();
    assert_eq!(store.len(), 80);
    assert_eq!(store.accepted, out.sampled.store.accepted);
    let setup = Setup::new(&cfg).unwrap();
    let again = setup.summarize(&store).unwrap();
    let written = read_field_matrix(&dir.join("kappa_mean.csv")).unwrap();
    for ((a, b), c) in again.kappa_mean.iter().zip(&out.summary.kappa_mean).zip(&written) {
        assert!((a - b).abs() <= 1e-12 * b.abs());
        assert!((a - c).abs() <= 1e-12 * c.abs());
    }
    assert_eq!(setup.rel_error(&again).unwrap(), out.metrics.rel_error);
}

#[test]
fn constant_field_summaries() {
    let grid = Grid::new(7).unwrap();
    let kl = KlField::build(&grid, 3, 0.1, 1.0).unwrap();
    let nodal = Permeability::Kl(kl).on_grid(&grid).unwrap();
    let store = ChainStore {
        samples: (1..=10)
            .map(|i| SampleRecord {
                z: vec![0.0; 3],
                iteration: i,
                accepted: false,
                surrogate_depth: 0,
            })
            .collect(),
        ..ChainStore::default()
    };
    let s = summarize(&store, 0.4, &nodal).unwrap();
    assert_eq!(s.retained, 6);
    assert!(s.kappa_mean.iter().all(|k| (k - 1.0).abs() < 1e-15));
    assert!(s.kappa_std.iter().all(|k| *k == 0.0));
    assert!(s.log_kappa_mean.iter().all(|k| k.abs() < 1e-15));
    assert!(summarize(&ChainStore::default(), 0.4, &nodal).is_err());
}

#[test]
fn inverse_crime_is_refused() {
    let err = ExperimentConfig::parse("inversion_grid = 31\ndata_grid = 31\n", &[]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

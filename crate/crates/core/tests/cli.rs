use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfsurrogate"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.cfg");
    let text = format!(
        "# tiny Example-1 run\n\
         inversion_grid = 15\n\
         data_grid = 31\n\
         n_offline = 10\n\
         lf_hidden = 10\n\
         head_hidden = 6\n\
         offline_epochs = 50\n\
         online_epochs = 30\n\
         subchain_length = 10\n\
         max_corrections = 3\n\
         q = 2\n\
         chain_length = 30\n\
         output_dir = {}\n",
        dir.join("out").display()
    );
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn verbs_run_and_write_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("out");

    let o = cli(&["generate-data", "--config", &cfg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("data.csv").exists() && out.join("data.meta").exists());

    let o = cli(&["train-offline", "--config", &cfg]);
    assert!(o.status.success());
    let model = out.join("offline_surrogate.txt");
    assert!(model.exists());

    let model_arg = format!("offline_model={}", model.display());
    let o = cli(&["run", "--method", "adnn", "--config", &cfg, "--set", &model_arg]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("adnn rel_error="), "{stdout}");
    // the loaded model costs no offline solves
    assert!(stdout.contains("offline_evals=0"), "{stdout}");
    for f in ["samples.csv", "refinements.csv", "kappa_mean.csv", "kappa_std.csv", "metrics.json", "config.txt"] {
        assert!(out.join(f).exists(), "missing {f}");
    }

    let o = cli(&["summarize", "--config", &cfg]);
    assert!(o.status.success());
    assert!(out.join("summary.json").exists());

    let o = cli(&["kl-cache", "--config", &cfg, "--set", "example=kl_field", "--set", "kl_modes=4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let path = String::from_utf8_lossy(&o.stdout).trim().to_string();
    assert!(Path::new(&path).exists(), "{path}");
}

#[test]
fn config_errors_exit_with_two() {
    let o = cli(&["run", "--set", "bogus_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cli(&["run", "--set", "data_grid=31"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cli(&["run", "--method", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cli(&["generate-data", "--config", "/nonexistent/file.cfg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    // a huge learning rate makes offline training diverge
    let o = cli(&["train-offline", "--config", &cfg, "--set", "learning_rate=1e200"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

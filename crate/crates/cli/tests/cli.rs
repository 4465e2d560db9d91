//! End-to-end tests of the `otfs-sim` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use otfs_core::harness::{ExperimentConfig, Mode};

fn sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otfs-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// Small but complete config written to `dir/config.toml`.
fn write_config(dir: &Path, mode: Mode) -> String {
    let cfg = ExperimentConfig {
        trials: 3,
        sweep_db: vec![20.0],
        ..ExperimentConfig::default_for(mode)
    };
    let path = dir.join("in.toml");
    fs::write(&path, cfg.to_toml()).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_into(config: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", config, "--output", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    sim(&args)
}

#[test]
fn default_config_roundtrips() {
    for mode in ["nmse", "param-mse", "ser", "oracle-check"] {
        let out = sim(&["print-default-config", "--mode", mode]);
        assert!(out.status.success());
        let cfg = ExperimentConfig::from_toml(&stdout(&out)).unwrap();
        assert_eq!(cfg, ExperimentConfig::default_for(mode.parse().unwrap()));
    }
    let cfg = ExperimentConfig::from_toml(&stdout(&sim(&["print-default-config"]))).unwrap();
    assert_eq!((cfg.grid.m, cfg.grid.n, cfg.search.p_max), (64, 32, 5));
}

#[test]
fn fixed_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), Mode::Nmse);
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    assert!(run_into(&config, &a, &[]).status.success());
    assert!(run_into(&config, &b, &[]).status.success());
    assert!(run_into(&config, &c, &["--threads", "3"]).status.success());
    for file in ["results.csv", "manifest.json", "config.toml"] {
        let first = fs::read(a.join(file)).unwrap();
        assert_eq!(first, fs::read(b.join(file)).unwrap(), "{file}");
        assert_eq!(first, fs::read(c.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn overrides_reach_the_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), Mode::Nmse);
    let base = dir.path().join("base");
    let other = dir.path().join("other");
    assert!(run_into(&config, &base, &[]).status.success());
    let out = run_into(
        &config,
        &other,
        &[
            "--seed",
            "99",
            "--trials",
            "2",
            "--no-ipi",
            "--mode",
            "param-mse",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(other.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 99);
    assert_eq!(manifest["trials"], 2);
    assert_eq!(manifest["mode"], "param-mse");
    assert_eq!(manifest["ipi_elimination"], false);
    let base_manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(base.join("manifest.json")).unwrap()).unwrap();
    assert_ne!(manifest["config_sha256"], base_manifest["config_sha256"]);
    let saved =
        ExperimentConfig::from_toml(&fs::read_to_string(other.join("config.toml")).unwrap())
            .unwrap();
    assert_eq!(
        (saved.seed, saved.trials, saved.ipi_elimination),
        (99, 2, false)
    );
}

#[test]
fn csv_and_manifest_schema() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), Mode::Nmse);
    let out_dir = dir.path().join("out");
    let out = run_into(&config, &out_dir, &[]);
    assert!(out.status.success());
    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(stdout(&out), csv);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "sweep_db,metric_mean,metric_stderr,trials_ok,trials_failed"
    );
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "20");
    assert!(fields[1].parse::<f64>().unwrap() < 0.0);
    assert_eq!(&fields[3..], ["3", "0"]);

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    for key in [
        "tool",
        "version",
        "mode",
        "seed",
        "config_sha256",
        "trials",
        "sweep_db",
    ] {
        assert!(!manifest[key].is_null(), "missing {key}");
    }
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);

    let config = write_config(dir.path(), Mode::ParamMse);
    let pm = dir.path().join("pm");
    assert!(run_into(&config, &pm, &[]).status.success());
    let header = fs::read_to_string(pm.join("results.csv")).unwrap();
    let header = header.lines().next().unwrap();
    for col in [
        "delay_mse_s2_mean",
        "doppler_mse_hz2_mean",
        "delay_mse_grid2_mean",
        "doppler_mse_grid2_mean",
        "gain_mse_mean",
    ] {
        assert!(header.contains(col), "{header}");
    }
}

#[test]
fn oracle_check_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        trials: 10,
        ..ExperimentConfig::default_for(Mode::OracleCheck)
    };
    let config = dir.path().join("oracle.toml");
    fs::write(&config, cfg.to_toml()).unwrap();
    let out = run_into(config.to_str().unwrap(), &dir.path().join("o"), &[]);
    assert!(out.status.success());
    let csv = stdout(&out);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "sweep_db,metric_mean,metric_stderr,agreements,trials_ok,trials_failed"
    );
    assert!(lines[1].starts_with("inf,"));
}

#[test]
fn bad_configs_exit_nonzero_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("never");

    let syntax = dir.path().join("syntax.toml");
    let mut text = ExperimentConfig::default().to_toml();
    text = text.replace("trials = 100", "trials = = 100");
    fs::write(&syntax, text).unwrap();
    let out = run_into(syntax.to_str().unwrap(), &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let semantic = dir.path().join("semantic.toml");
    let cfg = ExperimentConfig {
        trials: 0,
        ..Default::default()
    };
    fs::write(&semantic, cfg.to_toml()).unwrap();
    let out = run_into(semantic.to_str().unwrap(), &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("trials"), "{}", stderr(&out));

    let out = run_into(
        dir.path().join("missing.toml").to_str().unwrap(),
        &out_dir,
        &[],
    );
    assert_eq!(out.status.code(), Some(2));

    let good = write_config(dir.path(), Mode::Nmse);
    let out = run_into(&good, &out_dir, &["--mode", "bogus"]);
    assert!(!out.status.success());
    assert!(!out_dir.exists());
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), Mode::Nmse);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = run_into(&config, &blocker.join("sub"), &[]);
    assert_eq!(out.status.code(), Some(1));
}

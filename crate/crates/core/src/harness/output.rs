use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::run::ExperimentResult;

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Hex SHA-256 of the canonical TOML rendering of `cfg`.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    Sha256::digest(cfg.to_toml().as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:e}")
    }
}

/// One row per sweep point: `sweep_db`, the mode's metric columns,
/// `trials_ok`, `trials_failed`.
pub fn render_csv(result: &ExperimentResult) -> String {
    let mut out = String::new();
    let mut header = vec!["sweep_db".to_string()];
    if let Some(row) = result.rows.first() {
        header.extend(row.columns.iter().map(|(name, _)| name.clone()));
    }
    header.push("trials_ok".into());
    header.push("trials_failed".into());
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &result.rows {
        let mut fields = vec![format!("{}", row.sweep_db)];
        fields.extend(row.columns.iter().map(|(_, v)| format_value(*v)));
        fields.push(row.trials_ok.to_string());
        fields.push(row.trials_failed.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    mode: &'a str,
    seed: u64,
    config_sha256: String,
    trials: usize,
    sweep_db: &'a [f64],
    ipi_elimination: bool,
    trials_ok: usize,
    trials_failed: usize,
    files: [&'static str; 2],
}

/// Run manifest; contains no timestamps so identical runs give identical bytes.
pub fn render_manifest(result: &ExperimentResult) -> String {
    let cfg = &result.config;
    let manifest = Manifest {
        tool: "otfs-sim",
        version: env!("CARGO_PKG_VERSION"),
        mode: cfg.mode.as_str(),
        seed: cfg.seed,
        config_sha256: config_hash(cfg),
        trials: cfg.trials,
        sweep_db: &cfg.sweep_db,
        ipi_elimination: cfg.ipi_elimination,
        trials_ok: result.rows.iter().map(|r| r.trials_ok).sum(),
        trials_failed: result.rows.iter().map(|r| r.trials_failed).sum(),
        files: [RESULTS_FILE, CONFIG_FILE],
    };
    let mut s = serde_json::to_string_pretty(&manifest).expect("manifest is serialisable");
    s.push('\n');
    s
}

/// Write the CSV, the manifest and the effective config into `dir`.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(RESULTS_FILE), render_csv(result))?;
    fs::write(dir.join(CONFIG_FILE), result.config.to_toml())?;
    fs::write(dir.join(MANIFEST_FILE), render_manifest(result))?;
    Ok(())
}

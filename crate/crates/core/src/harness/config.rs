use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::estimator::SearchConfig;
use crate::grid::DdGrid;
use crate::transceiver::{Constellation, PilotConfig, MAX_DENSE_SIZE};

/// What each trial measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Channel NMSE over a PSNR sweep.
    Nmse,
    /// Delay, Doppler and gain MSE over a PSNR sweep.
    ParamMse,
    /// LMMSE symbol error rate over an SNR sweep, estimated vs. perfect CSI.
    Ser,
    /// Separable estimate vs. exhaustive joint search on random single paths.
    /// Noiseless when the sweep point is `inf`.
    OracleCheck,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Nmse => "nmse",
            Mode::ParamMse => "param-mse",
            Mode::Ser => "ser",
            Mode::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nmse" => Ok(Mode::Nmse),
            "param-mse" => Ok(Mode::ParamMse),
            "ser" => Ok(Mode::Ser),
            "oracle-check" => Ok(Mode::OracleCheck),
            other => Err(Error::InvalidConfig(format!(
                "unknown mode `{other}` (expected nmse, param-mse, ser or oracle-check)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub m: usize,
    pub n: usize,
    pub delta_f_hz: f64,
    pub carrier_hz: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            m: 64,
            n: 32,
            delta_f_hz: 30e3,
            carrier_hz: 5.1e9,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<DdGrid> {
        DdGrid::new(self.m, self.n, self.delta_f_hz, self.carrier_hz)
    }
}

/// Data-link settings for `ser` mode, which runs on its own smaller grid so
/// the dense LMMSE solve stays cheap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SerConfig {
    pub m: usize,
    pub n: usize,
    pub order: usize,
}

impl Default for SerConfig {
    fn default() -> Self {
        Self {
            m: 16,
            n: 8,
            order: 4,
        }
    }
}

/// Full experiment description, loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub trials: usize,
    /// PSNR (or SNR in `ser` mode) points in dB. `inf` runs the point
    /// without noise (not allowed in `ser` mode).
    pub sweep_db: Vec<f64>,
    pub seed: u64,
    pub ipi_elimination: bool,
    pub output: String,
    pub grid: GridConfig,
    pub scenario: ScenarioConfig,
    pub pilot: PilotConfig,
    pub search: SearchConfig,
    #[serde(default)]
    pub ser: SerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Nmse,
            trials: 100,
            sweep_db: vec![10.0, 20.0, 30.0, 40.0],
            seed: 1,
            ipi_elimination: true,
            output: "results/nmse".into(),
            grid: GridConfig::default(),
            scenario: ScenarioConfig::default(),
            pilot: PilotConfig::default(),
            search: SearchConfig::default(),
            ser: SerConfig::default(),
        }
    }
}

fn field_err(field: &str, e: Error) -> Error {
    match e {
        Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{field}: {msg}")),
        other => Error::InvalidConfig(format!("{field}: {other}")),
    }
}

impl ExperimentConfig {
    /// Reference configuration with sweep and output adjusted to `mode`.
    pub fn default_for(mode: Mode) -> Self {
        let sweep_db = match mode {
            Mode::Nmse | Mode::ParamMse => vec![10.0, 20.0, 30.0, 40.0],
            Mode::Ser => vec![0.0, 5.0, 10.0, 15.0, 20.0],
            Mode::OracleCheck => vec![f64::INFINITY],
        };
        Self {
            mode,
            sweep_db,
            output: format!("results/{mode}"),
            ..Default::default()
        }
    }

    /// Parse and validate. Syntax and type errors carry the line and column
    /// of the offending TOML; semantic errors name the key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serialisable")
    }

    /// Grid used for channel estimation in this mode.
    pub fn estimation_grid(&self) -> Result<DdGrid> {
        match self.mode {
            Mode::Ser => DdGrid::new(
                self.ser.m,
                self.ser.n,
                self.grid.delta_f_hz,
                self.grid.carrier_hz,
            ),
            _ => self.grid.build(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials: must be at least 1".into()));
        }
        if self.sweep_db.is_empty() {
            return Err(Error::InvalidConfig("sweep_db: must not be empty".into()));
        }
        if let Some(v) = self
            .sweep_db
            .iter()
            .find(|v| v.is_nan() || **v == f64::NEG_INFINITY)
        {
            return Err(Error::InvalidConfig(format!(
                "sweep_db: {v} is not a level"
            )));
        }
        if self.mode == Mode::Ser && self.sweep_db.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidConfig(
                "sweep_db: ser mode needs finite SNR points".into(),
            ));
        }
        self.grid.build().map_err(|e| field_err("grid", e))?;
        let est_grid = self.estimation_grid().map_err(|e| field_err("ser", e))?;
        self.scenario
            .validate(&est_grid)
            .map_err(|e| field_err("scenario", e))?;
        self.pilot
            .validate(&est_grid)
            .map_err(|e| field_err("pilot", e))?;
        self.search.validate().map_err(|e| field_err("search", e))?;
        if self.search.p_max * 5 > est_grid.len() {
            return Err(Error::InvalidConfig(format!(
                "search: p_max {} exceeds MN/5 = {}",
                self.search.p_max,
                est_grid.len() / 5
            )));
        }
        if self.mode == Mode::Ser {
            Constellation::from_order(self.ser.order).map_err(|e| field_err("ser", e))?;
            if est_grid.len() > MAX_DENSE_SIZE {
                return Err(Error::InvalidConfig(format!(
                    "ser: M*N = {} exceeds the dense limit {MAX_DENSE_SIZE}",
                    est_grid.len()
                )));
            }
        }
        if self.mode == Mode::OracleCheck
            && self.search.offsets().len() > crate::metrics::ORACLE_MAX_CANDIDATES
        {
            return Err(Error::InvalidConfig(
                "search: oracle-check needs at most 201 candidates per axis".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_roundtrips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let mut text = ExperimentConfig::default().to_toml();
        text = text.replace("trials = 100", "trials = \"many\"");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = format!("{}\nbogus = 3\n", ExperimentConfig::default().to_toml());
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let cfg = ExperimentConfig {
            trials: 0,
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("trials"));
        let cfg = ExperimentConfig {
            sweep_db: vec![],
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("sweep_db"));
        let mut cfg = ExperimentConfig::default();
        cfg.scenario.delay_range_s = (1e-6, 50e-6);
        assert!(cfg.validate().unwrap_err().to_string().contains("scenario"));
        let mut cfg = ExperimentConfig::default_for(Mode::Ser);
        cfg.ser.order = 8;
        assert!(cfg.validate().unwrap_err().to_string().contains("ser"));
    }

    #[test]
    fn per_mode_defaults_validate() {
        for m in [Mode::Nmse, Mode::ParamMse, Mode::Ser, Mode::OracleCheck] {
            let cfg = ExperimentConfig::default_for(m);
            assert_eq!(cfg.mode, m);
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn mode_parsing() {
        for m in [Mode::Nmse, Mode::ParamMse, Mode::Ser, Mode::OracleCheck] {
            assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
        }
        assert!("psnr".parse::<Mode>().is_err());
    }
}

//! Fractional delay/Doppler path estimation on the recovered effective channel.
//!
//! The pipeline per frame is:
//!
//! 1. [`extract_paths`] picks the `P_max` strongest cells that are strict
//!    local peaks of `|H|`.
//! 2. Each tap gets a [`leakage_score`]; taps are processed from the highest
//!    leakage (most fractional spreading) down.
//! 3. For each tap, the Doppler column and delay row through the tap are
//!    correlated against precomputed magnitude templates
//!    ([`TemplateBank`]) to pick the fractional Doppler and delay.
//! 4. The gain is obtained by inverting the channel model at the peak cell
//!    ([`estimate_gain`]), the path is re-synthesised and subtracted from the
//!    working channel before the next tap is handled.
//!
//! No step iterates; the template tables are built once per grid and search
//! configuration and reused for every path.

mod extract;
mod templates;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{accumulate_path, generate_dd_channel, path_phase, periodic_sum_kernel};
use crate::error::{Error, Result};
use crate::grid::{DdGrid, DdMatrix, PathParams};

pub use extract::{extract_paths, leakage_score, TapLocation};
pub use templates::{delay_template, doppler_template, TemplateBank};

/// Gain denominators smaller than this are rejected.
pub const GAIN_SINGULAR_THRESHOLD: f64 = 1e-9;

/// Fractional search window and path budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Search `[tap - half_width, tap + half_width]` in grid units.
    pub half_width: f64,
    /// Candidate spacing in grid units.
    pub step: f64,
    /// Number of paths to extract.
    pub p_max: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            half_width: 1.0,
            step: 0.01,
            p_max: 5,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0 && self.step <= self.half_width) {
            return Err(Error::InvalidConfig(format!(
                "search step {} must satisfy 0 < step <= half_width ({})",
                self.step, self.half_width
            )));
        }
        if !self.half_width.is_finite() || self.half_width > 1e3 {
            return Err(Error::InvalidConfig(format!(
                "search half width {} is not usable",
                self.half_width
            )));
        }
        if self.p_max == 0 {
            return Err(Error::InvalidConfig("P_max must be at least 1".into()));
        }
        Ok(())
    }

    /// Candidates on each side of the tap.
    pub fn steps_per_side(&self) -> usize {
        (self.half_width / self.step + 1e-9).floor() as usize
    }

    /// Nominal search-point count `2 * half_width / step`.
    pub fn search_points(&self) -> usize {
        2 * self.steps_per_side()
    }

    /// Candidate offsets including both endpoints; offset zero is exact.
    pub fn offsets(&self) -> Vec<f64> {
        let s = self.steps_per_side() as i64;
        (-s..=s).map(|i| i as f64 * self.step).collect()
    }
}

/// One estimated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEstimate {
    pub tap: TapLocation,
    pub l_tau_hat: f64,
    /// Signed Doppler index, near `[-N/2, N/2)`.
    pub k_nu_hat: f64,
    pub alpha_hat: Complex64,
    pub leakage: f64,
}

impl PathEstimate {
    pub fn to_path_params(&self) -> PathParams {
        PathParams::new(self.l_tau_hat, self.k_nu_hat, self.alpha_hat)
    }
}

/// Turn a tap plus fractional offsets into `(l_tau, k_nu)`.
///
/// Delay stays anchored at the tap (`l_p + offset`); the Doppler tap is
/// mapped to its signed representative in `[-N/2, N/2)` first.
pub fn tap_to_indices(tap: &TapLocation, d_tau: f64, d_nu: f64, grid: &DdGrid) -> (f64, f64) {
    let n = grid.n() as f64;
    let k = tap.k_p as f64;
    let k_signed = if k >= n / 2.0 { k - n } else { k };
    (tap.l_p as f64 + d_tau, k_signed + d_nu)
}

/// Separable template-matching estimate of `(l_tau, k_nu)` for one tap.
///
/// Builds a throw-away [`TemplateBank`]; use [`Estimator`] when estimating
/// more than one path.
pub fn estimate_delay_doppler(
    h_hat: &DdMatrix,
    tap: &TapLocation,
    cfg: &SearchConfig,
) -> Result<(f64, f64)> {
    TemplateBank::new(h_hat.grid(), cfg)?.estimate(h_hat, tap)
}

/// Invert the channel model at the peak cell:
/// `alpha = MN H[k_p, l_p] / (S_tau(l_p) S_nu(k_p) exp(j 2 pi k_nu l_tau / MN))`.
pub fn estimate_gain(
    h_hat: &DdMatrix,
    tap: &TapLocation,
    l_tau_hat: f64,
    k_nu_hat: f64,
    grid: &DdGrid,
) -> Result<Complex64> {
    let (n, m) = (grid.n(), grid.m());
    let s_nu = periodic_sum_kernel((k_nu_hat - tap.k_p as f64) / n as f64, n);
    let s_tau = periodic_sum_kernel((tap.l_p as f64 - l_tau_hat) / m as f64, m);
    let denom = s_tau * s_nu * path_phase(l_tau_hat, k_nu_hat, grid);
    if denom.norm() < GAIN_SINGULAR_THRESHOLD {
        return Err(Error::GainSingular {
            k: tap.k_p,
            l: tap.l_p,
            magnitude: denom.norm(),
        });
    }
    Ok(h_hat.get(tap.k_p, tap.l_p) * grid.len() as f64 / denom)
}

/// Channel containing only the estimated path.
pub fn reconstruct_path_channel(est: &PathEstimate, grid: &DdGrid) -> DdMatrix {
    generate_dd_channel(&[est.to_path_params()], grid)
}

/// Channel re-synthesised from all estimates.
pub fn reconstruct_channel(estimates: &[PathEstimate], grid: &DdGrid) -> DdMatrix {
    let params: Vec<PathParams> = estimates.iter().map(|e| e.to_path_params()).collect();
    generate_dd_channel(&params, grid)
}

/// Reusable estimator for one grid and search configuration.
#[derive(Debug, Clone)]
pub struct Estimator {
    cfg: SearchConfig,
    bank: Arc<TemplateBank>,
    ipi_elimination: bool,
}

impl Estimator {
    pub fn new(grid: &DdGrid, cfg: SearchConfig) -> Result<Self> {
        Ok(Self {
            cfg,
            bank: Arc::new(TemplateBank::new(grid, &cfg)?),
            ipi_elimination: true,
        })
    }

    /// Disable (`false`) or enable the subtraction of each estimated path.
    pub fn with_ipi_elimination(mut self, enabled: bool) -> Self {
        self.ipi_elimination = enabled;
        self
    }

    /// Same templates, different path budget.
    pub fn with_max_paths(&self, p_max: usize) -> Result<Self> {
        let cfg = SearchConfig { p_max, ..self.cfg };
        cfg.validate()?;
        Ok(Self {
            cfg,
            bank: Arc::clone(&self.bank),
            ipi_elimination: self.ipi_elimination,
        })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    pub fn templates(&self) -> &Arc<TemplateBank> {
        &self.bank
    }

    pub fn grid(&self) -> &DdGrid {
        self.bank.grid()
    }

    /// Leakage-ordered sequential estimation.
    ///
    /// Returns the estimates in processing order (highest leakage first).
    /// Paths whose gain inversion is singular are logged and skipped.
    pub fn estimate_sequential(&self, h_hat: &DdMatrix) -> Result<Vec<PathEstimate>> {
        let grid = *self.grid();
        h_hat.ensure_grid(&grid)?;

        let taps = extract_paths(h_hat, self.cfg.p_max)?;
        let mut ranked = Vec::with_capacity(taps.len());
        for tap in taps {
            ranked.push((leakage_score(h_hat, &tap)?, tap));
        }
        // stable: equal leakage keeps the peak-strength order
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

        let mut working = h_hat.clone();
        let mut out = Vec::with_capacity(ranked.len());
        for (leakage, tap) in ranked {
            let (l_tau_hat, k_nu_hat) = self.bank.estimate(&working, &tap)?;
            let alpha_hat = match estimate_gain(&working, &tap, l_tau_hat, k_nu_hat, &grid) {
                Ok(a) => a,
                Err(e) => {
                    log::warn!("skipping path at tap ({}, {}): {e}", tap.k_p, tap.l_p);
                    continue;
                }
            };
            let est = PathEstimate {
                tap,
                l_tau_hat,
                k_nu_hat,
                alpha_hat,
                leakage,
            };
            if self.ipi_elimination {
                let mut neg = est.to_path_params();
                neg.alpha = -neg.alpha;
                accumulate_path(&mut working, &neg);
            }
            out.push(est);
        }
        Ok(out)
    }
}

/// One-shot sequential estimation; builds the template tables for this call.
pub fn estimate_sequential(
    h_hat: &DdMatrix,
    cfg: &SearchConfig,
    ipi_elimination: bool,
) -> Result<Vec<PathEstimate>> {
    Estimator::new(h_hat.grid(), *cfg)?
        .with_ipi_elimination(ipi_elimination)
        .estimate_sequential(h_hat)
}

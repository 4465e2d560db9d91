//! Scoring and independent verification oracles.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimator::{tap_to_indices, PathEstimate, SearchConfig, TapLocation};
use crate::grid::{DdGrid, DdMatrix, PathParams};

/// Stand-in for an NMSE of minus infinity.
pub const NMSE_FLOOR_DB: f64 = -320.0;

/// Largest candidate count per axis accepted by [`joint_grid_oracle`].
pub const ORACLE_MAX_CANDIDATES: usize = 201;

/// `10 log10(||H_hat - H||^2 / ||H||^2)`, floored at [`NMSE_FLOOR_DB`].
pub fn nmse_db(h_hat: &DdMatrix, h: &DdMatrix) -> Result<f64> {
    Ok(ratio_to_db(nmse_linear(h_hat, h)?))
}

/// Linear NMSE ratio.
pub fn nmse_linear(h_hat: &DdMatrix, h: &DdMatrix) -> Result<f64> {
    h_hat.ensure_same_grid(h)?;
    let reference = h.energy();
    if reference == 0.0 {
        return Err(Error::ZeroReference);
    }
    let err: f64 = h_hat
        .as_slice()
        .iter()
        .zip(h.as_slice())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(err / reference)
}

/// `10 log10(ratio)` with the floor applied.
pub fn ratio_to_db(ratio: f64) -> f64 {
    if ratio <= 0.0 {
        NMSE_FLOOR_DB
    } else {
        (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
    }
}

/// Scores of one trial. Fields a trial mode does not compute stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrialScore {
    pub nmse_db: Option<f64>,
    pub mse_delay_s2: Option<f64>,
    pub mse_doppler_hz2: Option<f64>,
    pub mse_gain: Option<f64>,
    pub mse_delay_grid2: Option<f64>,
    pub mse_doppler_grid2: Option<f64>,
    pub ser: Option<f64>,
    /// `(truth index, estimate index)`, sorted by truth index.
    pub matched_pairs: Vec<(usize, usize)>,
    /// True paths left without an estimate.
    pub misses: usize,
    /// Estimates left without a true path.
    pub spurious: usize,
}

/// Signed cyclic difference in `[-period/2, period/2)`.
fn cyclic_diff(a: f64, b: f64, period: usize) -> f64 {
    let p = period as f64;
    let d = a - b;
    d - p * (d / p + 0.5).floor()
}

/// Greedy nearest-neighbour association of estimates to true paths and the
/// per-parameter MSE over the matched pairs.
///
/// Distance is `sqrt((dl / M)^2 + (dk / N)^2)` with cyclic differences; the
/// globally closest unmatched pair is matched first. Every pair is eligible.
pub fn associate_and_score(
    truth: &[PathParams],
    est: &[PathEstimate],
    grid: &DdGrid,
) -> TrialScore {
    associate_and_score_gated(truth, est, grid, f64::INFINITY)
}

/// [`associate_and_score`] restricted to pairs whose cyclic delay and
/// Doppler differences are both at most `gate` grid cells. True paths with
/// no estimate inside the gate count as misses.
pub fn associate_and_score_gated(
    truth: &[PathParams],
    est: &[PathEstimate],
    grid: &DdGrid,
    gate: f64,
) -> TrialScore {
    let (m, n) = (grid.m(), grid.n());
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(truth.len() * est.len());
    for (i, t) in truth.iter().enumerate() {
        for (j, e) in est.iter().enumerate() {
            let dl = cyclic_diff(e.l_tau_hat, t.l_tau, m);
            let dk = cyclic_diff(e.k_nu_hat, t.k_nu, n);
            if dl.abs() <= gate && dk.abs() <= gate {
                pairs.push(((dl / m as f64).hypot(dk / n as f64), i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut truth_used = vec![false; truth.len()];
    let mut est_used = vec![false; est.len()];
    let mut matched = Vec::new();
    for (_, i, j) in pairs {
        if !truth_used[i] && !est_used[j] {
            truth_used[i] = true;
            est_used[j] = true;
            matched.push((i, j));
        }
    }
    matched.sort_unstable();

    let mut score = TrialScore {
        misses: truth.len() - matched.len(),
        spurious: est.len() - matched.len(),
        ..Default::default()
    };
    if !matched.is_empty() {
        let cnt = matched.len() as f64;
        let (mut dl2, mut dk2, mut da2) = (0.0, 0.0, 0.0);
        for &(i, j) in &matched {
            let dl = cyclic_diff(est[j].l_tau_hat, truth[i].l_tau, m);
            let dk = cyclic_diff(est[j].k_nu_hat, truth[i].k_nu, n);
            dl2 += dl * dl;
            dk2 += dk * dk;
            da2 += (est[j].alpha_hat - truth[i].alpha).norm_sqr();
        }
        let (dl2, dk2) = (dl2 / cnt, dk2 / cnt);
        score.mse_delay_grid2 = Some(dl2);
        score.mse_doppler_grid2 = Some(dk2);
        score.mse_delay_s2 = Some(dl2 * grid.delay_resolution().powi(2));
        score.mse_doppler_hz2 = Some(dk2 * grid.doppler_resolution().powi(2));
        score.mse_gain = Some(da2 / cnt);
    }
    score.matched_pairs = matched;
    score
}

/// Fraction of positions where `detected` differs from `transmitted`.
pub fn ser(detected: &[usize], transmitted: &[usize]) -> Result<f64> {
    if detected.len() != transmitted.len() {
        return Err(Error::dimension(transmitted.len(), detected.len()));
    }
    if detected.is_empty() {
        return Ok(0.0);
    }
    let errors = detected
        .iter()
        .zip(transmitted)
        .filter(|(a, b)| a != b)
        .count();
    Ok(errors as f64 / detected.len() as f64)
}

/// `|sum_{i<len} exp(j 2 pi i x)|` by direct summation.
fn direct_response(x: f64, len: usize) -> f64 {
    (0..len)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 * x))
        .sum::<Complex64>()
        .norm()
}

/// Exhaustive joint `(delay, Doppler)` search over the full candidate product.
///
/// The objective is the 2D correlation of the outer-product template
/// `|h_nu(k)| |h_tau(l)|` with `|H|` over the whole grid; templates are
/// evaluated by direct summation. Ties are broken toward the tap (smallest
/// `|d_tau| + |d_nu|`), then the smaller delay, then the smaller Doppler.
pub fn joint_grid_oracle(
    h_hat: &DdMatrix,
    tap: &TapLocation,
    cfg: &SearchConfig,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    let grid = *h_hat.grid();
    let (n, m) = (grid.n(), grid.m());
    let offsets = cfg.offsets();
    if offsets.len() > ORACLE_MAX_CANDIDATES {
        return Err(Error::InvalidConfig(format!(
            "oracle limited to {ORACLE_MAX_CANDIDATES} candidates per axis, got {}",
            offsets.len()
        )));
    }
    let mags: Vec<f64> = h_hat.as_slice().iter().map(|z| z.norm()).collect();
    let (kp, lp) = (tap.k_p as f64, tap.l_p as f64);

    // tau_rows[i][k] = sum_l |h_tau_i(l)| |H[k, l]|
    let tau_rows: Vec<Vec<f64>> = offsets
        .iter()
        .map(|&off| {
            let lt = lp + off;
            let tmpl: Vec<f64> = (0..m)
                .map(|l| direct_response((l as f64 - lt) / m as f64, m))
                .collect();
            (0..n)
                .map(|k| (0..m).map(|l| tmpl[l] * mags[k * m + l]).sum())
                .collect()
        })
        .collect();
    let nu_tmpls: Vec<Vec<f64>> = offsets
        .iter()
        .map(|&off| {
            let kn = kp + off;
            (0..n)
                .map(|k| direct_response((kn - k as f64) / n as f64, n))
                .collect()
        })
        .collect();

    let mut best: Option<(f64, f64, f64)> = None;
    for (i, row) in tau_rows.iter().enumerate() {
        for (j, tn) in nu_tmpls.iter().enumerate() {
            let score: f64 = tn.iter().zip(row).map(|(a, b)| a * b).sum();
            let (dt, dn) = (offsets[i], offsets[j]);
            let better = match best {
                None => true,
                Some((bs, bt, bn)) => {
                    let tol = 1e-12 * score.abs().max(bs.abs());
                    if score > bs + tol {
                        true
                    } else if (score - bs).abs() <= tol {
                        let (c, bc) = (dt.abs() + dn.abs(), bt.abs() + bn.abs());
                        c < bc || (c == bc && (dt < bt || (dt == bt && dn < bn)))
                    } else {
                        false
                    }
                }
            };
            if better {
                best = Some((score, dt, dn));
            }
        }
    }
    let (_, dt, dn) = best.expect("offsets are never empty");
    Ok(tap_to_indices(tap, dt, dn, &grid))
}

//! Magnitude templates of the Doppler and delay responses and the separable
//! correlation search around an integer tap.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::channel::periodic_sum_kernel;
use crate::error::{Error, Result};
use crate::grid::{DdGrid, DdMatrix};

use super::{SearchConfig, TapLocation};

/// `|sum_n exp(j 2 pi n (k_nu - k) / N)|` for every Doppler bin `k`.
pub fn doppler_template(k_nu: f64, grid: &DdGrid) -> Vec<f64> {
    let n = grid.n();
    (0..n)
        .map(|k| periodic_sum_kernel((k_nu - k as f64) / n as f64, n).norm())
        .collect()
}

/// `|sum_m exp(j 2 pi m (l - l_tau) / M)|` for every delay bin `l`.
pub fn delay_template(l_tau: f64, grid: &DdGrid) -> Vec<f64> {
    let m = grid.m();
    (0..m)
        .map(|l| periodic_sum_kernel((l as f64 - l_tau) / m as f64, m).norm())
        .collect()
}

/// Index of the best score. Scores within a relative `1e-12` of each other
/// tie; ties go to the offset closest to zero, then to the smaller offset.
pub(crate) fn argmax_with_tiebreak(scores: &[f64], offsets: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        let (s, b) = (scores[i], scores[best]);
        let tol = 1e-12 * s.abs().max(b.abs());
        if s > b + tol {
            best = i;
        } else if (s - b).abs() <= tol {
            let (oi, ob) = (offsets[i], offsets[best]);
            if oi.abs() < ob.abs() || (oi.abs() == ob.abs() && oi < ob) {
                best = i;
            }
        }
    }
    best
}

static TABLES_BUILT: AtomicUsize = AtomicUsize::new(0);

/// Precomputed template tables, shared by every path of every frame on one
/// grid.
///
/// Row `i` of the Doppler table holds the template for candidate offset
/// `offsets[i]` relative to the tap, indexed by the cyclic distance `d` from
/// the tap: the candidate `k_p + offset` seen at bin `[k_p + d]_N`.
#[derive(Debug, Clone)]
pub struct TemplateBank {
    grid: DdGrid,
    offsets: Vec<f64>,
    doppler: Vec<f64>,
    delay: Vec<f64>,
}

impl TemplateBank {
    pub fn new(grid: &DdGrid, cfg: &SearchConfig) -> Result<Self> {
        cfg.validate()?;
        TABLES_BUILT.fetch_add(1, Ordering::Relaxed);
        let offsets = cfg.offsets();
        let (n, m) = (grid.n(), grid.m());
        let mut doppler = Vec::with_capacity(offsets.len() * n);
        let mut delay = Vec::with_capacity(offsets.len() * m);
        for &off in &offsets {
            doppler
                .extend((0..n).map(|d| periodic_sum_kernel((off - d as f64) / n as f64, n).norm()));
            delay
                .extend((0..m).map(|d| periodic_sum_kernel((d as f64 - off) / m as f64, m).norm()));
        }
        Ok(Self {
            grid: *grid,
            offsets,
            doppler,
            delay,
        })
    }

    /// Number of template tables built by this process so far.
    pub fn tables_built() -> usize {
        TABLES_BUILT.load(Ordering::Relaxed)
    }

    pub fn grid(&self) -> &DdGrid {
        &self.grid
    }

    /// Candidate offsets relative to the integer tap.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// Correlation of every Doppler candidate with `|H[., l_p]|`.
    pub fn doppler_scores(&self, h: &DdMatrix, tap: &TapLocation) -> Vec<f64> {
        let n = self.grid.n();
        let slice: Vec<f64> = (0..n)
            .map(|d| h.get((tap.k_p + d) % n, tap.l_p).norm())
            .collect();
        self.doppler
            .chunks_exact(n)
            .map(|t| t.iter().zip(&slice).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Correlation of every delay candidate with `|H[k_p, .]|`.
    pub fn delay_scores(&self, h: &DdMatrix, tap: &TapLocation) -> Vec<f64> {
        let m = self.grid.m();
        let row = h.row(tap.k_p);
        let slice: Vec<f64> = (0..m).map(|d| row[(tap.l_p + d) % m].norm()).collect();
        self.delay
            .chunks_exact(m)
            .map(|t| t.iter().zip(&slice).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Best `(delay offset, Doppler offset)` around `tap`.
    pub fn best_offsets(&self, h: &DdMatrix, tap: &TapLocation) -> Result<(f64, f64)> {
        h.ensure_grid(&self.grid)?;
        if tap.k_p >= self.grid.n() || tap.l_p >= self.grid.m() {
            return Err(Error::InvalidConfig(format!(
                "tap ({}, {}) outside the grid",
                tap.k_p, tap.l_p
            )));
        }
        let nu = argmax_with_tiebreak(&self.doppler_scores(h, tap), &self.offsets);
        let tau = argmax_with_tiebreak(&self.delay_scores(h, tap), &self.offsets);
        Ok((self.offsets[tau], self.offsets[nu]))
    }

    /// Fractional `(l_tau, k_nu)` estimate for `tap`, see [`super::tap_to_indices`].
    pub fn estimate(&self, h: &DdMatrix, tap: &TapLocation) -> Result<(f64, f64)> {
        let (d_tau, d_nu) = self.best_offsets(h, tap)?;
        Ok(super::tap_to_indices(tap, d_tau, d_nu, &self.grid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    fn direct_doppler(k_nu: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        Complex64::from_polar(
                            1.0,
                            2.0 * PI * i as f64 * (k_nu - k as f64) / n as f64,
                        )
                    })
                    .sum::<Complex64>()
                    .norm()
            })
            .collect()
    }

    #[test]
    fn integer_candidate_collapses() {
        let g = DdGrid::reference();
        let t = doppler_template(3.0, &g);
        for (k, v) in t.iter().enumerate() {
            let want = if k == 3 { 32.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "k={k} v={v}");
        }
        let t = delay_template(10.0, &g);
        assert!((t[10] - 64.0).abs() < 1e-12);
        assert!(t
            .iter()
            .enumerate()
            .all(|(l, v)| l == 10 || v.abs() < 1e-12));
    }

    #[test]
    fn half_bin_templates_mirror() {
        let g = DdGrid::reference();
        let plus = doppler_template(7.5, &g);
        let minus = doppler_template(6.5, &g);
        // +0.5 around tap 7 vs -0.5 around tap 7: reflection k -> 14 - k
        for (k, p) in plus.iter().enumerate() {
            let mirrored = (14 + 32 - k) % 32;
            assert!((p - minus[mirrored]).abs() < 1e-9);
        }
    }

    #[test]
    fn fractional_template_matches_direct_sum() {
        let g = DdGrid::reference();
        let t = doppler_template(5.3, &g);
        let d = direct_doppler(5.3, 32);
        for (a, b) in t.iter().zip(&d) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn template_energy_is_constant() {
        let g = DdGrid::reference();
        for c in [0.0, 0.13, 0.5, 0.77] {
            let e: f64 = doppler_template(c, &g).iter().map(|v| v * v).sum();
            assert!((e - 1024.0).abs() < 1e-8, "{e}");
        }
    }

    #[test]
    fn bank_rows_match_direct_templates() {
        let g = DdGrid::new(16, 8, 30e3, 5.1e9).unwrap();
        let bank = TemplateBank::new(&g, &SearchConfig::default()).unwrap();
        assert_eq!(bank.offsets().len(), 201);
        let (k_p, l_p) = (6usize, 2usize);
        for (i, &off) in bank.offsets().iter().enumerate().step_by(17) {
            let direct = doppler_template(k_p as f64 + off, &g);
            for d in 0..8 {
                assert!((bank.doppler[i * 8 + d] - direct[(k_p + d) % 8]).abs() < 1e-9);
            }
            let direct = delay_template(l_p as f64 + off, &g);
            for d in 0..16 {
                assert!((bank.delay[i * 16 + d] - direct[(l_p + d) % 16]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn tiebreak_prefers_zero_then_smaller() {
        let offs = [-1.0, -0.5, 0.0, 0.5, 1.0];
        assert_eq!(argmax_with_tiebreak(&[0.0; 5], &offs), 2);
        assert_eq!(argmax_with_tiebreak(&[1.0, 2.0, 0.0, 2.0, 1.0], &offs), 1);
        assert_eq!(argmax_with_tiebreak(&[1.0, 2.0, 0.0, 3.0, 1.0], &offs), 3);
    }
}

//! Peak-based path extraction and the energy-leakage metric.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::grid::DdMatrix;

/// Integer grid position of a candidate path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapLocation {
    /// Doppler tap in `0..N`.
    pub k_p: usize,
    /// Delay tap in `0..M`.
    pub l_p: usize,
    /// `|H[k_p, l_p]|` at extraction time.
    pub peak_energy: f64,
}

/// The four cyclic neighbours `([k-1]_N, l), ([k+1]_N, l), (k, [l-1]_M), (k, [l+1]_M)`.
pub(crate) fn neighbors(k: usize, l: usize, n: usize, m: usize) -> [(usize, usize); 4] {
    [
        ((k + n - 1) % n, l),
        ((k + 1) % n, l),
        (k, (l + m - 1) % m),
        (k, (l + 1) % m),
    ]
}

/// Strength order: larger magnitude first, equal magnitudes by row-major index.
fn stronger(a: (f64, usize), b: (f64, usize)) -> Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Select up to `p_max` taps that are strict local peaks over their cyclic
/// 4-neighbourhood.
///
/// Cells are visited strongest first; a cell that does not beat all of its
/// neighbours is replaced by the next strongest one. Equal magnitudes are
/// ordered by row-major index so a two-cell plateau yields exactly one peak.
/// Fewer than `p_max` taps are returned when the grid runs out of peaks.
pub fn extract_paths(h_hat: &DdMatrix, p_max: usize) -> Result<Vec<TapLocation>> {
    let grid = *h_hat.grid();
    let (n, m) = (grid.n(), grid.m());
    if p_max == 0 || p_max * 5 > grid.len() {
        return Err(Error::InvalidConfig(format!(
            "P_max = {p_max} must be in 1..={}",
            grid.len() / 5
        )));
    }
    let mags: Vec<f64> = h_hat.as_slice().iter().map(|z| z.norm()).collect();
    let mut order: Vec<usize> = (0..mags.len()).collect();
    order.sort_unstable_by(|&a, &b| stronger((mags[a], a), (mags[b], b)));

    let mut taps = Vec::with_capacity(p_max);
    for idx in order {
        if taps.len() == p_max {
            break;
        }
        let mag = mags[idx];
        if mag <= 0.0 {
            break;
        }
        let (k, l) = (idx / m, idx % m);
        let is_peak = neighbors(k, l, n, m).iter().all(|&(nk, nl)| {
            let j = nk * m + nl;
            j == idx || stronger((mag, idx), (mags[j], j)) == Ordering::Less
        });
        if is_peak {
            taps.push(TapLocation {
                k_p: k,
                l_p: l,
                peak_energy: mag,
            });
        }
    }
    if taps.len() < p_max {
        log::debug!("only {} of {p_max} peaks available", taps.len());
    }
    Ok(taps)
}

/// Neighbour magnitude sum over peak magnitude.
pub fn leakage_score(h_hat: &DdMatrix, tap: &TapLocation) -> Result<f64> {
    let grid = h_hat.grid();
    let peak = h_hat.get(tap.k_p, tap.l_p).norm();
    if peak == 0.0 {
        return Err(Error::UndefinedLeakage {
            k: tap.k_p,
            l: tap.l_p,
        });
    }
    let spill: f64 = neighbors(tap.k_p, tap.l_p, grid.n(), grid.m())
        .iter()
        .map(|&(k, l)| h_hat.get(k, l).norm())
        .sum();
    Ok(spill / peak)
}

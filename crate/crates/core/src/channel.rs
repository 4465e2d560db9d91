//! Effective delay-Doppler channel synthesis and the frame input/output relation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DdGrid, DdMatrix, PathParams};

/// Offsets closer than this to an integer take the `L` branch of the kernel.
pub const INTEGER_GUARD: f64 = 1e-12;

/// `sum_{n=0}^{L-1} exp(j 2 pi n x)` in closed form.
///
/// Equal to `exp(j pi (L-1) x) sin(pi L x) / sin(pi x)`, or `L` when `x` is
/// an integer.
pub fn periodic_sum_kernel(x: f64, len: usize) -> Complex64 {
    let l = len as f64;
    if (x - x.round()).abs() < INTEGER_GUARD {
        return Complex64::new(l, 0.0);
    }
    let ratio = (PI * l * x).sin() / (PI * x).sin();
    Complex64::from_polar(ratio, PI * (l - 1.0) * x)
}

/// Doppler response `h_nu(k) = sum_n exp(-j 2 pi n (k - k_nu) / N)` for `k` in `0..N`.
pub fn doppler_response(k_nu: f64, grid: &DdGrid) -> Vec<Complex64> {
    let n = grid.n();
    (0..n)
        .map(|k| periodic_sum_kernel((k_nu - k as f64) / n as f64, n))
        .collect()
}

/// Delay response `h_tau(l) = sum_m exp(j 2 pi m (l - l_tau) / M)` for `l` in `0..M`.
pub fn delay_response(l_tau: f64, grid: &DdGrid) -> Vec<Complex64> {
    let m = grid.m();
    (0..m)
        .map(|l| periodic_sum_kernel((l as f64 - l_tau) / m as f64, m))
        .collect()
}

/// Per-path phase rotation `exp(+j 2 pi k_nu l_tau / (MN))`.
///
/// The same sign is used for synthesis, reconstruction and gain inversion.
pub fn path_phase(l_tau: f64, k_nu: f64, grid: &DdGrid) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * k_nu * l_tau / grid.len() as f64)
}

/// Accumulate one path's contribution into `h`.
pub(crate) fn accumulate_path(h: &mut DdMatrix, path: &PathParams) {
    let grid = *h.grid();
    let coef = path.alpha * path_phase(path.l_tau, path.k_nu, &grid) / grid.len() as f64;
    let dop = doppler_response(path.k_nu, &grid);
    let del = delay_response(path.l_tau, &grid);
    let m = grid.m();
    for (k, row) in h.as_mut_slice().chunks_exact_mut(m).enumerate() {
        let a = coef * dop[k];
        for (cell, d) in row.iter_mut().zip(&del) {
            *cell += a * d;
        }
    }
}

/// Effective DD-domain channel of a set of paths.
///
/// `H[k, l] = sum_p alpha_p exp(j 2 pi k_nu l_tau / MN) / MN * h_nu(k) * h_tau(l)`.
/// An empty path list gives the zero matrix.
pub fn generate_dd_channel(paths: &[PathParams], grid: &DdGrid) -> DdMatrix {
    let mut h = DdMatrix::zeros(*grid);
    for p in paths {
        accumulate_path(&mut h, p);
    }
    h
}

struct Fft2 {
    rows: std::sync::Arc<dyn Fft<f64>>,
    cols: std::sync::Arc<dyn Fft<f64>>,
}

impl Fft2 {
    fn new(grid: &DdGrid, inverse: bool) -> Self {
        let mut planner = FftPlanner::new();
        if inverse {
            Self {
                rows: planner.plan_fft_inverse(grid.m()),
                cols: planner.plan_fft_inverse(grid.n()),
            }
        } else {
            Self {
                rows: planner.plan_fft_forward(grid.m()),
                cols: planner.plan_fft_forward(grid.n()),
            }
        }
    }

    fn process(&self, data: &mut [Complex64], n: usize, m: usize) {
        self.rows.process(data);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for l in 0..m {
            for k in 0..n {
                col[k] = data[k * m + l];
            }
            self.cols.process(&mut col);
            for k in 0..n {
                data[k * m + l] = col[k];
            }
        }
    }
}

/// Two-dimensional circular convolution `a (*) b` via the 2D DFT.
pub fn circular_convolve(a: &DdMatrix, b: &DdMatrix) -> Result<DdMatrix> {
    a.ensure_same_grid(b)?;
    let grid = *a.grid();
    let (n, m) = (grid.n(), grid.m());
    let fwd = Fft2::new(&grid, false);
    let mut fa = a.as_slice().to_vec();
    let mut fb = b.as_slice().to_vec();
    fwd.process(&mut fa, n, m);
    fwd.process(&mut fb, n, m);
    let scale = 1.0 / grid.len() as f64;
    fa.iter_mut().zip(&fb).for_each(|(x, y)| *x *= y * scale);
    Fft2::new(&grid, true).process(&mut fa, n, m);
    DdMatrix::from_row_major(grid, fa)
}

/// Noiseless received frame `Y = H (*) X` for the given paths.
pub fn apply_channel(x: &DdMatrix, paths: &[PathParams], grid: &DdGrid) -> Result<DdMatrix> {
    let h = generate_dd_channel(paths, grid);
    x.ensure_same_grid(&h)?;
    circular_convolve(&h, x)
}

/// Receiver noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    sigma2: f64,
}

impl NoiseConfig {
    pub fn from_sigma2(sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        Ok(Self { sigma2 })
    }

    /// `sigma2 = E_p / 10^(psnr_db / 10)`.
    pub fn from_psnr_db(psnr_db: f64, pilot_energy: f64) -> Result<Self> {
        if !(pilot_energy.is_finite() && pilot_energy > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pilot energy must be positive, got {pilot_energy}"
            )));
        }
        Self::from_sigma2(pilot_energy / 10f64.powf(psnr_db / 10.0))
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
}

/// One circularly-symmetric complex Gaussian draw of variance `sigma2`.
pub(crate) fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, sigma2: f64) -> Complex64 {
    let s = (sigma2 / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Add i.i.d. CN(0, sigma2) noise to every entry.
pub fn add_awgn<R: Rng + ?Sized>(a: &DdMatrix, noise: &NoiseConfig, rng: &mut R) -> DdMatrix {
    let mut out = a.clone();
    for z in out.as_mut_slice() {
        *z += complex_gaussian(rng, noise.sigma2);
    }
    out
}

/// Random multipath scenario parameters.
///
/// Path 1 is the line-of-sight path at zero delay, path 2 sits
/// `fixed_delay_gap_s` behind it and the remaining paths are uniform over
/// `delay_range_s`. Doppler shifts follow `nu_max cos(theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_paths: usize,
    pub rice_factor_db: f64,
    pub fixed_delay_gap_s: f64,
    pub delay_range_s: (f64, f64),
    pub max_doppler_hz: f64,
    /// Salt mixed into the harness' per-trial scenario seeds.
    #[serde(default)]
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_paths: 5,
            rice_factor_db: 15.0,
            fixed_delay_gap_s: 0.2e-6,
            delay_range_s: (0.867e-6, 7e-6),
            max_doppler_hz: 1700.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self, grid: &DdGrid) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let t = grid.symbol_duration();
        let (lo, hi) = self.delay_range_s;
        if self.num_paths == 0 {
            return bad("scenario needs at least one path".into());
        }
        if !self.rice_factor_db.is_finite() {
            return bad("rice factor must be finite".into());
        }
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return bad(format!(
                "delay range ({lo}, {hi}) must satisfy 0 <= low <= high"
            ));
        }
        if hi >= t {
            return bad(format!(
                "delay range upper bound {hi} s reaches the symbol duration {t} s"
            ));
        }
        if !(0.0..t).contains(&self.fixed_delay_gap_s) {
            return bad(format!(
                "fixed delay gap {} s outside [0, {t})",
                self.fixed_delay_gap_s
            ));
        }
        if !(self.max_doppler_hz >= 0.0 && self.max_doppler_hz < grid.delta_f() / 2.0) {
            return bad(format!(
                "max Doppler {} Hz outside [0, {}) Hz",
                self.max_doppler_hz,
                grid.delta_f() / 2.0
            ));
        }
        Ok(())
    }

    /// Linear Rician K-factor.
    pub fn k_factor(&self) -> f64 {
        10f64.powf(self.rice_factor_db / 10.0)
    }
}

/// Draw one random path set.
///
/// Mean total path power is one: the LoS path carries `K / (K + 1)` with a
/// uniform random phase and the NLoS paths share `1 / (K + 1)` equally as
/// CN(0, .) gains.
pub fn sample_scenario<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    grid: &DdGrid,
    rng: &mut R,
) -> Result<Vec<PathParams>> {
    cfg.validate(grid)?;
    let p = cfg.num_paths;
    let k = cfg.k_factor();
    let (lo, hi) = cfg.delay_range_s;

    let mut out = Vec::with_capacity(p);
    for i in 0..p {
        let tau = match i {
            0 => 0.0,
            1 => cfg.fixed_delay_gap_s,
            _ => {
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            }
        };
        // theta uniform on (0, 2 pi]
        let theta = 2.0 * PI * (1.0 - rng.random::<f64>());
        let nu = cfg.max_doppler_hz * theta.cos();
        let alpha = if i == 0 {
            let los_power = if p == 1 { 1.0 } else { k / (k + 1.0) };
            Complex64::from_polar(los_power.sqrt(), 2.0 * PI * rng.random::<f64>())
        } else {
            complex_gaussian(rng, 1.0 / ((k + 1.0) * (p - 1) as f64))
        };
        out.push(PathParams::from_physical(tau, nu, alpha, grid));
    }
    Ok(out)
}

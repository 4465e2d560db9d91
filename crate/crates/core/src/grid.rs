//! Frame geometry, the delay-Doppler grid container and index arithmetic.
//!
//! Every grid in this crate is addressed Doppler-major: `A[k, l]` with the
//! Doppler index `k` in `0..N` selecting the row and the delay index `l` in
//! `0..M` selecting the column.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Static OTFS frame geometry.
///
/// The symbol duration `T` is always derived as `1 / delta_f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdGrid {
    m: usize,
    n: usize,
    delta_f: f64,
    fc: f64,
}

impl DdGrid {
    /// `m` delay bins, `n` Doppler bins, subcarrier spacing `delta_f` (Hz) and
    /// carrier frequency `fc` (Hz).
    pub fn new(m: usize, n: usize, delta_f: f64, fc: f64) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs M >= 2 and N >= 2, got M={m}, N={n}"
            )));
        }
        if !(delta_f.is_finite() && delta_f > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "subcarrier spacing must be positive, got {delta_f}"
            )));
        }
        if !(fc.is_finite() && fc > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "carrier frequency must be positive, got {fc}"
            )));
        }
        Ok(Self { m, n, delta_f, fc })
    }

    /// M = 64, N = 32, 30 kHz spacing, 5.1 GHz carrier.
    pub fn reference() -> Self {
        Self {
            m: 64,
            n: 32,
            delta_f: 30e3,
            fc: 5.1e9,
        }
    }

    /// Number of delay bins.
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of Doppler bins.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.m * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    pub fn carrier(&self) -> f64 {
        self.fc
    }

    /// Symbol duration `T = 1 / delta_f` in seconds.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Delay bin width `T / M` in seconds.
    pub fn delay_resolution(&self) -> f64 {
        self.symbol_duration() / self.m as f64
    }

    /// Doppler bin width `delta_f / N` in Hz.
    pub fn doppler_resolution(&self) -> f64 {
        self.delta_f / self.n as f64
    }
}

/// One propagation path in grid units.
///
/// `l_tau` is the fractional delay index in `[0, M)` and `k_nu` the signed
/// fractional Doppler index in `[-N/2, N/2)`. Doppler is only wrapped into
/// `[0, N)` when a grid cell is addressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub l_tau: f64,
    pub k_nu: f64,
    pub alpha: Complex64,
}

impl PathParams {
    pub fn new(l_tau: f64, k_nu: f64, alpha: Complex64) -> Self {
        Self { l_tau, k_nu, alpha }
    }

    /// Build from physical delay (s) and Doppler (Hz).
    pub fn from_physical(tau_s: f64, nu_hz: f64, alpha: Complex64, grid: &DdGrid) -> Self {
        Self {
            l_tau: tau_s / grid.delay_resolution(),
            k_nu: nu_hz / grid.doppler_resolution(),
            alpha,
        }
    }

    /// Nearest integer grid cell `(k, l)`, wrapped onto the grid.
    pub fn integer_tap(&self, grid: &DdGrid) -> (usize, usize) {
        let k = wrap_doppler(self.k_nu.round(), grid.n()) as usize % grid.n();
        let l = wrap_delay(self.l_tau.round(), grid.m()) as usize % grid.m();
        (k, l)
    }

    /// Fractional Doppler part `kappa` in `[-0.5, 0.5]`.
    pub fn kappa(&self) -> f64 {
        self.k_nu - self.k_nu.round()
    }

    /// Fractional delay part `iota` in `[-0.5, 0.5]`.
    pub fn iota(&self) -> f64 {
        self.l_tau - self.l_tau.round()
    }

    pub fn validate(&self, grid: &DdGrid) -> Result<()> {
        let half_n = grid.n() as f64 / 2.0;
        if !(self.l_tau.is_finite() && (0.0..grid.m() as f64).contains(&self.l_tau)) {
            return Err(Error::InvalidConfig(format!(
                "path delay index {} outside [0, {})",
                self.l_tau,
                grid.m()
            )));
        }
        if !(self.k_nu.is_finite() && (-half_n..half_n).contains(&self.k_nu)) {
            return Err(Error::InvalidConfig(format!(
                "path Doppler index {} outside [-{half_n}, {half_n})",
                self.k_nu
            )));
        }
        if !(self.alpha.re.is_finite() && self.alpha.im.is_finite()) {
            return Err(Error::InvalidConfig("path gain is not finite".into()));
        }
        Ok(())
    }
}

/// Physical quantities of one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalUnits {
    pub tau_s: f64,
    pub nu_hz: f64,
    pub range_m: f64,
    pub velocity_mps: f64,
}

/// Convert grid-unit path parameters into delay, Doppler, one-way range and
/// radial velocity.
pub fn physical_units(p: &PathParams, grid: &DdGrid) -> PhysicalUnits {
    let tau_s = p.l_tau * grid.delay_resolution();
    let nu_hz = p.k_nu * grid.doppler_resolution();
    PhysicalUnits {
        tau_s,
        nu_hz,
        range_m: SPEED_OF_LIGHT * tau_s,
        velocity_mps: SPEED_OF_LIGHT * nu_hz / grid.carrier(),
    }
}

#[inline]
fn wrap_into(x: f64, period: usize) -> f64 {
    let p = period as f64;
    let r = x.rem_euclid(p);
    // rem_euclid can round up to exactly `p` for tiny negative inputs
    if r >= p {
        r - p
    } else {
        r
    }
}

/// `[k]_N`: wrap a (fractional) Doppler index into `[0, N)`.
#[inline]
pub fn wrap_doppler(k: f64, n: usize) -> f64 {
    wrap_into(k, n)
}

/// `[l]_M`: wrap a (fractional) delay index into `[0, M)`.
#[inline]
pub fn wrap_delay(l: f64, m: usize) -> f64 {
    wrap_into(l, m)
}

#[inline]
pub(crate) fn wrap_index(i: isize, period: usize) -> usize {
    i.rem_euclid(period as isize) as usize
}

/// Complex `N x M` grid (Doppler rows, delay columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DdMatrix {
    grid: DdGrid,
    data: Vec<Complex64>,
}

impl DdMatrix {
    pub fn zeros(grid: DdGrid) -> Self {
        Self {
            grid,
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Row-major (Doppler-major) data of length `N * M`.
    pub fn from_row_major(grid: DdGrid, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::dimension(grid.len(), data.len()));
        }
        Ok(Self { grid, data })
    }

    pub fn from_fn(grid: DdGrid, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let m = grid.m();
        let data = (0..grid.len()).map(|i| f(i / m, i % m)).collect();
        Self { grid, data }
    }

    #[inline]
    pub fn grid(&self) -> &DdGrid {
        &self.grid
    }

    /// Row-major storage.
    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_row_major(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> Complex64 {
        self.data[k * self.grid.m() + l]
    }

    /// Cyclic access with signed indices.
    #[inline]
    pub fn get_wrapped(&self, k: isize, l: isize) -> Complex64 {
        self.get(wrap_index(k, self.grid.n()), wrap_index(l, self.grid.m()))
    }

    /// Doppler row `k` (length M).
    pub fn row(&self, k: usize) -> &[Complex64] {
        let m = self.grid.m();
        &self.data[k * m..(k + 1) * m]
    }

    /// Delay column `l` (length N).
    pub fn column(&self, l: usize) -> Vec<Complex64> {
        (0..self.grid.n()).map(|k| self.get(k, l)).collect()
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&mut self, c: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= c);
    }

    /// Fails unless this matrix has the `N x M` shape of `grid`.
    pub fn ensure_grid(&self, grid: &DdGrid) -> Result<()> {
        if self.grid.m() != grid.m() || self.grid.n() != grid.n() {
            return Err(Error::dimension(
                format!("{}x{}", grid.n(), grid.m()),
                format!("{}x{}", self.grid.n(), self.grid.m()),
            ));
        }
        Ok(())
    }

    /// Same grid geometry check used by the binary operations.
    pub fn ensure_same_grid(&self, other: &DdMatrix) -> Result<()> {
        other.ensure_grid(&self.grid)
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for DdMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (k, l): (usize, usize)) -> &Complex64 {
        assert!(
            k < self.grid.n() && l < self.grid.m(),
            "index ({k}, {l}) out of grid"
        );
        &self.data[k * self.grid.m() + l]
    }
}

impl IndexMut<(usize, usize)> for DdMatrix {
    #[inline]
    fn index_mut(&mut self, (k, l): (usize, usize)) -> &mut Complex64 {
        assert!(
            k < self.grid.n() && l < self.grid.m(),
            "index ({k}, {l}) out of grid"
        );
        let m = self.grid.m();
        &mut self.data[k * m + l]
    }
}

impl AddAssign<&DdMatrix> for DdMatrix {
    fn add_assign(&mut self, rhs: &DdMatrix) {
        assert_eq!(self.data.len(), rhs.data.len(), "grid mismatch");
        self.data
            .iter_mut()
            .zip(&rhs.data)
            .for_each(|(a, b)| *a += b);
    }
}

impl SubAssign<&DdMatrix> for DdMatrix {
    fn sub_assign(&mut self, rhs: &DdMatrix) {
        assert_eq!(self.data.len(), rhs.data.len(), "grid mismatch");
        self.data
            .iter_mut()
            .zip(&rhs.data)
            .for_each(|(a, b)| *a -= b);
    }
}

impl Add<&DdMatrix> for &DdMatrix {
    type Output = DdMatrix;

    fn add(self, rhs: &DdMatrix) -> DdMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub<&DdMatrix> for &DdMatrix {
    type Output = DdMatrix;

    fn sub(self, rhs: &DdMatrix) -> DdMatrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Mul<Complex64> for &DdMatrix {
    type Output = DdMatrix;

    fn mul(self, rhs: Complex64) -> DdMatrix {
        let mut out = self.clone();
        out.scale(rhs);
        out
    }
}

/// Column-wise vectorization: stacks the delay columns, each of length N.
pub fn vec(a: &DdMatrix) -> Vec<Complex64> {
    let (n, m) = (a.grid.n(), a.grid.m());
    let mut out = Vec::with_capacity(n * m);
    for l in 0..m {
        out.extend((0..n).map(|k| a.get(k, l)));
    }
    out
}

/// Inverse of [`vec`]: fills the delay columns sequentially.
pub fn invec(v: &[Complex64], grid: DdGrid) -> Result<DdMatrix> {
    if v.len() != grid.len() {
        return Err(Error::dimension(grid.len(), v.len()));
    }
    let n = grid.n();
    Ok(DdMatrix::from_fn(grid, |k, l| v[l * n + k]))
}

//! Pilot and data frames, effective-channel recovery and LMMSE detection.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::generate_dd_channel;
use crate::error::{Error, Result};
use crate::grid::{wrap_index, DdGrid, DdMatrix, PathParams};

/// Largest `M * N` for which the dense effective matrix is built.
pub const MAX_DENSE_SIZE: usize = 4096;

/// Single-impulse pilot placement and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotConfig {
    pub k_pilot: usize,
    pub l_pilot: usize,
    pub e_p: f64,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            k_pilot: 0,
            l_pilot: 0,
            e_p: 1.0,
        }
    }
}

impl PilotConfig {
    pub fn validate(&self, grid: &DdGrid) -> Result<()> {
        if self.k_pilot >= grid.n() || self.l_pilot >= grid.m() {
            return Err(Error::InvalidConfig(format!(
                "pilot ({}, {}) outside the {}x{} grid",
                self.k_pilot,
                self.l_pilot,
                grid.n(),
                grid.m()
            )));
        }
        if !(self.e_p.is_finite() && self.e_p > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "pilot energy must be positive, got {}",
                self.e_p
            )));
        }
        Ok(())
    }

    /// Pilot amplitude `sqrt(M N E_p)`.
    pub fn amplitude(&self, grid: &DdGrid) -> f64 {
        (grid.len() as f64 * self.e_p).sqrt()
    }
}

/// Frame carrying `sqrt(M N E_p)` at the pilot cell and zeros elsewhere.
pub fn make_pilot_frame(cfg: &PilotConfig, grid: &DdGrid) -> Result<DdMatrix> {
    cfg.validate(grid)?;
    let mut x = DdMatrix::zeros(*grid);
    x[(cfg.k_pilot, cfg.l_pilot)] = Complex64::new(cfg.amplitude(grid), 0.0);
    Ok(x)
}

/// Undo the cyclic shift and scaling the channel applies to the pilot impulse:
/// `H[k, l] = Y[[k + k_pilot]_N, [l + l_pilot]_M] / sqrt(M N E_p)`.
pub fn recover_effective_channel(y: &DdMatrix, cfg: &PilotConfig) -> DdMatrix {
    let grid = *y.grid();
    let inv = 1.0 / cfg.amplitude(&grid);
    let (kp, lp) = (cfg.k_pilot as isize, cfg.l_pilot as isize);
    DdMatrix::from_fn(grid, |k, l| {
        y.get_wrapped(k as isize + kp, l as isize + lp) * inv
    })
}

/// Square QAM constellations with Gray labelling and unit average energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Constellation {
    #[serde(rename = "4qam")]
    Qam4,
    #[serde(rename = "16qam")]
    Qam16,
}

impl Constellation {
    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            4 => Ok(Self::Qam4),
            16 => Ok(Self::Qam16),
            other => Err(Error::UnsupportedOrder(other)),
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Self::Qam4 => 4,
            Self::Qam16 => 16,
        }
    }

    fn bits_per_axis(&self) -> usize {
        match self {
            Self::Qam4 => 1,
            Self::Qam16 => 2,
        }
    }

    fn scale(&self) -> f64 {
        match self {
            Self::Qam4 => 2f64.sqrt().recip(),
            Self::Qam16 => 10f64.sqrt().recip(),
        }
    }

    /// Gray-coded PAM level for a per-axis label.
    fn level(&self, label: usize) -> f64 {
        match self {
            Self::Qam4 => [-1.0, 1.0][label],
            // 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
            Self::Qam16 => [-3.0, -1.0, 3.0, 1.0][label],
        }
    }

    fn axis_label(&self, v: f64) -> usize {
        let v = v / self.scale();
        match self {
            Self::Qam4 => usize::from(v >= 0.0),
            Self::Qam16 => {
                if v < -2.0 {
                    0
                } else if v < 0.0 {
                    1
                } else if v < 2.0 {
                    3
                } else {
                    2
                }
            }
        }
    }

    /// Constellation point of a symbol index (high bits in-phase, low bits quadrature).
    pub fn point(&self, index: usize) -> Complex64 {
        let b = self.bits_per_axis();
        let mask = (1 << b) - 1;
        let s = self.scale();
        Complex64::new(self.level(index >> b) * s, self.level(index & mask) * s)
    }

    /// Nearest constellation point index.
    pub fn slice(&self, z: Complex64) -> usize {
        (self.axis_label(z.re) << self.bits_per_axis()) | self.axis_label(z.im)
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.order()).map(|i| self.point(i)).collect()
    }
}

/// A frame of QAM data symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFrame {
    pub symbols: DdMatrix,
    pub constellation: Constellation,
}

/// Random i.i.d. uniform data frame; returns the frame and its symbol indices
/// in row-major (Doppler-major) order.
pub fn make_data_frame<R: Rng + ?Sized>(
    order: usize,
    rng: &mut R,
    grid: &DdGrid,
) -> Result<(DataFrame, Vec<usize>)> {
    let constellation = Constellation::from_order(order)?;
    let indices: Vec<usize> = (0..grid.len())
        .map(|_| rng.random_range(0..order))
        .collect();
    let symbols = DdMatrix::from_row_major(
        *grid,
        indices.iter().map(|&i| constellation.point(i)).collect(),
    )?;
    Ok((
        DataFrame {
            symbols,
            constellation,
        },
        indices,
    ))
}

/// Dense `MN x MN` matrix `G` with `vec(H (*) X) = G vec(X)`.
pub fn build_effective_matrix(paths: &[PathParams], grid: &DdGrid) -> Result<DMatrix<Complex64>> {
    effective_matrix_from_channel(&generate_dd_channel(paths, grid))
}

/// Same as [`build_effective_matrix`] but from an already synthesised channel.
pub fn effective_matrix_from_channel(h: &DdMatrix) -> Result<DMatrix<Complex64>> {
    let grid = *h.grid();
    let size = grid.len();
    if size > MAX_DENSE_SIZE {
        return Err(Error::MatrixTooLarge {
            size,
            limit: MAX_DENSE_SIZE,
        });
    }
    let (n, m) = (grid.n(), grid.m());
    // vec index of (k, l) is l * N + k
    Ok(DMatrix::from_fn(size, size, |row, col| {
        let (l, k) = (row / n, row % n);
        let (l2, k2) = (col / n, col % n);
        h.get(
            wrap_index(k as isize - k2 as isize, n),
            wrap_index(l as isize - l2 as isize, m),
        )
    }))
}

/// Soft LMMSE estimate `H^H (H H^H + sigma2 I)^-1 y`.
pub fn lmmse_equalize(
    y: &[Complex64],
    heff: &DMatrix<Complex64>,
    sigma2: f64,
) -> Result<DVector<Complex64>> {
    if !heff.is_square() || heff.nrows() != y.len() {
        return Err(Error::dimension(
            format!("{0}x{0} matrix for length-{0} vector", y.len()),
            format!("{}x{}", heff.nrows(), heff.ncols()),
        ));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let hh = heff.adjoint();
    let mut gram = heff * &hh;
    for i in 0..gram.nrows() {
        gram[(i, i)] += Complex64::new(sigma2, 0.0);
    }
    let rhs = DVector::from_column_slice(y);
    let z = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Solver("LMMSE system is singular".into()))?;
    if z.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Solver("LMMSE solution is not finite".into()));
    }
    Ok(hh * z)
}

/// LMMSE equalisation followed by nearest-point slicing. `y` and the
/// returned indices are in `vec` (column-stacked) order.
pub fn lmmse_detect(
    y: &[Complex64],
    heff: &DMatrix<Complex64>,
    sigma2: f64,
    constellation: Constellation,
) -> Result<Vec<usize>> {
    let x = lmmse_equalize(y, heff, sigma2)?;
    Ok(x.iter().map(|&z| constellation.slice(z)).collect())
}

//! Periodic grids, Fourier transforms and the diagonal operators built on them.
//!
//! All spectral work uses the standard FFT layout: index `j < N/2` carries
//! wavenumber `j·π/L`, index `j ≥ N/2` carries `(j − N)·π/L`. The zero mode
//! holds the mean (for the CH-NLS runs, the cw background).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Periodic grid on `[-L, L)` with `N` equispaced nodes.
#[derive(Clone)]
pub struct Grid {
    half_length: f64,
    n_points: usize,
    dx: f64,
    wavenumbers: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("half_length", &self.half_length)
            .field("n_points", &self.n_points)
            .field("dx", &self.dx)
            .finish_non_exhaustive()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n_points == other.n_points && self.half_length == other.half_length
    }
}

impl Grid {
    /// Smallest accepted point count.
    pub const MIN_POINTS: usize = 8;

    pub fn new(half_length: f64, n_points: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half length must be positive and finite, got {half_length}"
            )));
        }
        if !n_points.is_power_of_two() || n_points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "point count must be a power of two >= {}, got {n_points}",
                Self::MIN_POINTS
            )));
        }

        let dx = 2.0 * half_length / n_points as f64;
        let unit = PI / half_length;
        let half = n_points / 2;
        let wavenumbers = (0..n_points)
            .map(|j| {
                let m = if j < half {
                    j as i64
                } else {
                    j as i64 - n_points as i64
                };
                m as f64 * unit
            })
            .collect();

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_points);
        let inverse = planner.plan_fft_inverse(n_points);

        Ok(Self {
            half_length,
            n_points,
            dx,
            wavenumbers,
            forward,
            inverse,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Lattice spacing `π/L` of the wavenumbers.
    pub fn wavenumber_unit(&self) -> f64 {
        PI / self.half_length
    }

    /// Node `x_j = -L + j·dx`.
    pub fn node(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.dx
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.node(j)).collect()
    }

    /// Index of the Nyquist mode, which has no conjugate partner.
    pub fn nyquist_index(&self) -> usize {
        self.n_points / 2
    }

    /// Scratch length needed by the `*_with_scratch` transforms.
    pub fn scratch_len(&self) -> usize {
        self.forward
            .get_inplace_scratch_len()
            .max(self.inverse.get_inplace_scratch_len())
    }

    /// Unnormalized forward DFT, in place.
    pub fn forward(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n_points);
        self.forward.process(buf);
    }

    /// Inverse DFT including the `1/N` factor, in place.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n_points);
        self.inverse.process(buf);
        normalize(buf);
    }

    pub fn forward_with_scratch(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, scratch);
    }

    pub fn inverse_with_scratch(&self, buf: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, scratch);
        normalize(buf);
    }

    /// Multiplies every Fourier mode of `values` by `symbol(k)` and returns the
    /// physical-space result.
    pub fn apply_symbol<F>(&self, values: &[Complex64], symbol: F) -> Vec<Complex64>
    where
        F: Fn(f64) -> Complex64,
    {
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        for (c, &k) in buf.iter_mut().zip(&self.wavenumbers) {
            *c *= symbol(k);
        }
        self.inverse(&mut buf);
        buf
    }

    /// Spectral symbol `(ik)^order`. For odd orders the Nyquist mode is
    /// zeroed so that real data stays real.
    pub fn derivative_symbol(&self, order: u32) -> Vec<Complex64> {
        let nyquist = self.nyquist_index();
        self.wavenumbers
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if order % 2 == 1 && j == nyquist {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, k).powu(order)
                }
            })
            .collect()
    }

    /// 2/3-rule mask: modes with `|m| > N/3` are removed.
    pub fn two_thirds_mask(&self) -> Vec<f64> {
        let cutoff = self.n_points as f64 / 3.0;
        let unit = self.wavenumber_unit();
        self.wavenumbers
            .iter()
            .map(|&k| if (k / unit).abs() > cutoff { 0.0 } else { 1.0 })
            .collect()
    }
}

fn normalize(buf: &mut [Complex64]) {
    let scale = 1.0 / buf.len() as f64;
    for c in buf.iter_mut() {
        *c *= scale;
    }
}

/// Complex samples of a field on a shared grid.
///
/// Real quantities (densities, KdV profiles) are stored with zero imaginary
/// part so that one container serves every field in the solver.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::LengthMismatch {
                expected: grid.n_points(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F>(grid: Arc<Grid>, f: F) -> Self
    where
        F: Fn(f64) -> Complex64,
    {
        let values = (0..grid.n_points()).map(|j| f(grid.node(j))).collect();
        Self { grid, values }
    }

    pub fn from_real(grid: Arc<Grid>, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn constant(grid: Arc<Grid>, value: Complex64) -> Self {
        let values = vec![value; grid.n_points()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Unnormalized DFT of the samples.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.values.clone();
        self.grid.forward(&mut buf);
        buf
    }

    pub fn from_spectrum(grid: Arc<Grid>, mut spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.n_points() {
            return Err(Error::LengthMismatch {
                expected: grid.n_points(),
                found: spectrum.len(),
            });
        }
        grid.inverse(&mut spectrum);
        Ok(Self {
            grid,
            values: spectrum,
        })
    }

    /// `order`-th spectral derivative.
    pub fn derivative(&self, order: u32) -> Field {
        let symbol = self.grid.derivative_symbol(order);
        let mut buf = self.values.clone();
        self.grid.forward(&mut buf);
        for (c, s) in buf.iter_mut().zip(&symbol) {
            *c *= s;
        }
        self.grid.inverse(&mut buf);
        self.with_values(buf)
    }

    /// `(1 - a²∂²ₓ) f`.
    pub fn helmholtz_apply(&self, a: f64) -> Field {
        let a2 = a * a;
        let out = self
            .grid
            .apply_symbol(&self.values, |k| Complex64::new(1.0 + a2 * k * k, 0.0));
        self.with_values(out)
    }

    /// `(1 - a²∂²ₓ)⁻¹ f`; the symbol is bounded below by one so this never fails.
    pub fn helmholtz_invert(&self, a: f64) -> Field {
        let a2 = a * a;
        let out = self
            .grid
            .apply_symbol(&self.values, |k| Complex64::new(1.0 / (1.0 + a2 * k * k), 0.0));
        self.with_values(out)
    }

    /// `|f|²` at every node.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.values.iter().map(|c| c.norm()).collect()
    }

    /// Discrete `L²` inner product `Σ conj(f) g dx`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.check_same_grid(other)?;
        let sum: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(f, g)| f.conj() * g)
            .sum();
        Ok(sum * self.grid.dx())
    }

    /// `Σ |f|² dx`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(f, g)| (f - g).norm())
            .fold(0.0, f64::max))
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    fn with_values(&self, values: Vec<Complex64>) -> Field {
        Field {
            grid: Arc::clone(&self.grid),
            values,
        }
    }
}

//! The CH-NLS model: parameters, linear stability of the cw background, the
//! dark/antidark classification, and the right-hand side of the rotated-frame
//! evolution equation
//!
//! ```text
//! i m_t + ψ_xx + 2σ|u₀|² m (|ψ|² − a²|ψ_x|² − 1) = 0,   m = ψ − a²ψ_xx,
//! ```
//!
//! obtained from `u = u₀ exp(2iσ|u₀|²t) ψ`. In Fourier space this is
//! `ψ̂_t = L(k) ψ̂ + N̂(ψ)` with the diagonal part
//! `L(k) = −i k² / (1 + a²k²)` and everything else in `N̂`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etd::NonlinearTerm;
use crate::grid::{Field, Grid};

/// Sign of the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum Sigma {
    /// σ = +1.
    Focusing,
    /// σ = −1.
    Defocusing,
}

impl Sigma {
    pub fn value(self) -> f64 {
        match self {
            Sigma::Focusing => 1.0,
            Sigma::Defocusing => -1.0,
        }
    }
}

impl TryFrom<i32> for Sigma {
    type Error = String;

    fn try_from(v: i32) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Sigma::Focusing),
            -1 => Ok(Sigma::Defocusing),
            other => Err(format!("sigma must be +1 or -1, got {other}")),
        }
    }
}

impl From<Sigma> for i32 {
    fn from(s: Sigma) -> i32 {
        match s {
            Sigma::Focusing => 1,
            Sigma::Defocusing => -1,
        }
    }
}

/// Physical parameters of one CH-NLS run. `u0` is the (real, positive)
/// background amplitude; any phase of the background is absorbed into ψ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub a: f64,
    pub sigma: Sigma,
    pub u0: f64,
}

/// Polarity of the asymptotic soliton on the cw background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolitonClass {
    /// Density dip, `q > 0`.
    Dark,
    /// Density hump, `q < 0`.
    Antidark,
    /// `p = 1/2` (zero amplitude) or `p = 2` (singular).
    Degenerate,
}

/// Boundary values of `p` are compared with a relative tolerance so that
/// parameters like `a = 1/√2` land on them despite rounding.
const BOUNDARY_TOL: f64 = 1e-12;

fn is_near(p: f64, boundary: f64) -> bool {
    (p - boundary).abs() <= BOUNDARY_TOL * boundary
}

/// `q = (1 − 2p) / (2 − p)` with `p = a_eff² C²`.
///
/// `a_eff` is passed separately from the model's `a` because the collision
/// initial data use independent values for each soliton.
pub fn q_parameter(a_eff: f64, c: f64) -> Result<f64> {
    let p = a_eff * a_eff * c * c;
    if is_near(p, 2.0) {
        return Err(Error::SingularParameter { p });
    }
    Ok((1.0 - 2.0 * p) / (2.0 - p))
}

impl ModelParams {
    pub fn new(a: f64, sigma: Sigma, u0: f64) -> Result<Self> {
        let params = Self { a, sigma, u0 };
        params.validate()?;
        Ok(params)
    }

    pub fn defocusing(a: f64, u0: f64) -> Result<Self> {
        Self::new(a, Sigma::Defocusing, u0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a >= 0.0) {
            return Err(Error::InvalidArgument(format!("a must be >= 0, got {}", self.a)));
        }
        if !(self.u0.is_finite() && self.u0 > 0.0) {
            return Err(Error::InvalidArgument(format!("u0 must be > 0, got {}", self.u0)));
        }
        Ok(())
    }

    /// Right-going speed of sound `C = 2u₀`.
    pub fn sound_speed(&self) -> f64 {
        2.0 * self.u0
    }

    /// `p = a²C²`.
    pub fn p(&self) -> f64 {
        let c = self.sound_speed();
        self.a * self.a * c * c
    }

    pub fn q(&self) -> Result<f64> {
        q_parameter(self.a, self.sound_speed())
    }

    /// `ω²(k) = k²(k² − 4σu₀²) / (1 + a²k²)²`; negative values are unstable modes.
    pub fn dispersion_omega_squared(&self, k: f64) -> f64 {
        let k2 = k * k;
        let h = 1.0 + self.a * self.a * k2;
        k2 * (k2 - 4.0 * self.sigma.value() * self.u0 * self.u0) / (h * h)
    }

    /// Exponential growth rate of a perturbation with wavenumber `k`; zero for
    /// stable modes.
    pub fn mi_growth_rate(&self, k: f64) -> f64 {
        (-self.dispersion_omega_squared(k)).max(0.0).sqrt()
    }

    /// Unstable band `0 < |k| < 2u₀` for σ = +1, `None` otherwise.
    pub fn mi_band(&self) -> Option<(f64, f64)> {
        match self.sigma {
            Sigma::Focusing => Some((0.0, 2.0 * self.u0)),
            Sigma::Defocusing => None,
        }
    }

    pub fn classify_soliton(&self) -> Result<SolitonClass> {
        if self.sigma == Sigma::Focusing {
            return Err(Error::UnsupportedRegime(
                "dark/antidark solitons exist only for the defocusing equation",
            ));
        }
        let p = self.p();
        if is_near(p, 0.5) || is_near(p, 2.0) {
            return Ok(SolitonClass::Degenerate);
        }
        let q = self.q()?;
        Ok(if q < 0.0 {
            SolitonClass::Antidark
        } else if q > 0.0 {
            SolitonClass::Dark
        } else {
            SolitonClass::Degenerate
        })
    }

    /// Diagonal generator `−i k² / (1 + a²k²)` of the linear part.
    pub fn linear_symbol(&self, k: f64) -> Complex64 {
        let k2 = k * k;
        Complex64::new(0.0, -k2 / (1.0 + self.a * self.a * k2))
    }

    pub fn linear_symbols(&self, grid: &Grid) -> Vec<Complex64> {
        grid.wavenumbers()
            .iter()
            .map(|&k| self.linear_symbol(k))
            .collect()
    }
}

/// Diagnostic `∫ (|ψ|² + a²|ψ_x|²) dx` over the periodic domain.
pub fn q_functional(psi: &Field, a: f64) -> f64 {
    let dpsi = psi.derivative(1);
    let a2 = a * a;
    let sum: f64 = psi
        .values()
        .iter()
        .zip(dpsi.values())
        .map(|(p, d)| p.norm_sqr() + a2 * d.norm_sqr())
        .sum();
    sum * psi.grid().dx()
}

/// Spectral right-hand side `N̂(ψ)` of the rotated CH-NLS equation, with its
/// own transform workspace. One instance must not be shared between
/// concurrent evaluations.
pub struct ChnlsNonlinearity {
    grid: Arc<Grid>,
    /// `2iσu₀² / (1 + a²k²)`, times the dealiasing mask when enabled.
    prefactor: Vec<Complex64>,
    ik: Vec<Complex64>,
    a2: f64,
    psi: Vec<Complex64>,
    psi_x: Vec<Complex64>,
    psi_xx: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl ChnlsNonlinearity {
    pub fn new(grid: Arc<Grid>, params: &ModelParams, dealias: bool) -> Self {
        let n = grid.n_points();
        let a2 = params.a * params.a;
        let coupling = 2.0 * params.sigma.value() * params.u0 * params.u0;
        let mask = if dealias {
            grid.two_thirds_mask()
        } else {
            vec![1.0; n]
        };
        let prefactor = grid
            .wavenumbers()
            .iter()
            .zip(&mask)
            .map(|(&k, &m)| Complex64::new(0.0, coupling * m / (1.0 + a2 * k * k)))
            .collect();
        let ik = grid.derivative_symbol(1);
        let scratch = vec![Complex64::default(); grid.scratch_len()];
        Self {
            prefactor,
            ik,
            a2,
            psi: vec![Complex64::default(); n],
            psi_x: vec![Complex64::default(); n],
            psi_xx: vec![Complex64::default(); n],
            scratch,
            grid,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
}

impl NonlinearTerm for ChnlsNonlinearity {
    fn evaluate(&mut self, spectrum: &[Complex64], out: &mut [Complex64]) {
        let grid = &*self.grid;
        for (((p, px), pxx), (s, ik)) in self
            .psi
            .iter_mut()
            .zip(self.psi_x.iter_mut())
            .zip(self.psi_xx.iter_mut())
            .zip(spectrum.iter().zip(&self.ik))
        {
            *p = *s;
            *px = ik * s;
            // -k² ψ̂; the Nyquist mode of ψ_xx is kept (even order)
            *pxx = *s;
        }
        for (pxx, &k) in self.psi_xx.iter_mut().zip(grid.wavenumbers()) {
            *pxx *= -k * k;
        }
        grid.inverse_with_scratch(&mut self.psi, &mut self.scratch);
        grid.inverse_with_scratch(&mut self.psi_x, &mut self.scratch);
        grid.inverse_with_scratch(&mut self.psi_xx, &mut self.scratch);

        let a2 = self.a2;
        for ((o, p), (px, pxx)) in out
            .iter_mut()
            .zip(&self.psi)
            .zip(self.psi_x.iter().zip(&self.psi_xx))
        {
            let m = p - pxx * a2;
            let local = p.norm_sqr() - a2 * px.norm_sqr() - 1.0;
            *o = m * local;
        }
        grid.forward_with_scratch(out, &mut self.scratch);
        for (o, f) in out.iter_mut().zip(&self.prefactor) {
            *o *= f;
        }
    }
}

/// Physical-space field whose transform is `N̂(ψ)`.
pub fn nonlinear_term(psi: &Field, params: &ModelParams, dealias: bool) -> Field {
    let grid = Arc::clone(psi.grid());
    let mut rhs = ChnlsNonlinearity::new(Arc::clone(&grid), params, dealias);
    let mut out = vec![Complex64::default(); grid.n_points()];
    rhs.evaluate(&psi.spectrum(), &mut out);
    Field::from_spectrum(grid, out).expect("length matches grid")
}

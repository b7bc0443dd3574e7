//! Reduced dynamics of shallow solitons: the standard KdV equation
//! `U_T̂ − 6UU_χ + U_χχχ = 0`, its soliton, the maps between KdV variables
//! and the CH-NLS amplitude perturbation, and a residual check of the
//! intermediate Boussinesq-type equation for the slow phase `Φ(X, T)`.
//!
//! Here `ρ` is the Madelung amplitude, `|ψ| = 1 + ερ₁ + …`, not `|ψ|²`.
//!
//! Slow variables: `X = √ε x`, `T = √ε t`, `χ = X − CT`, `𝒯 = εT`. The KdV
//! time is `T̂ = s (1 − 2a²C²)/(2C) 𝒯` where `s` is the
//! [`AnsatzForm::drift_sign`]; the same sign multiplies the `O(ε)` bracket of
//! the Boussinesq residual.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::etd::{evolve, EtdCoefficients, FieldState, NonlinearTerm};
use crate::grid::{Field, Grid};
use crate::model::{q_parameter, ModelParams};
use crate::soliton::{AnsatzForm, Direction, SolitonSpec};

/// KdV soliton `U = −(β/2) sech²[(√β/2)(χ − βT̂ + χ₀)]`.
pub fn kdv_soliton(beta: f64, chi0: f64, chi: &[f64], t_hat: f64) -> Vec<f64> {
    let half_root = 0.5 * beta.sqrt();
    chi.iter()
        .map(|&c| {
            let s = 1.0 / (half_root * (c - beta * t_hat + chi0)).cosh();
            -0.5 * beta * s * s
        })
        .collect()
}

/// Linear symbol `ik³` of `U_T̂ = −U_χχχ + …`, Nyquist mode zeroed.
pub fn kdv_linear_symbols(grid: &Grid) -> Vec<Complex64> {
    grid.derivative_symbol(3).iter().map(|s| -s).collect()
}

/// Spectral `3 ∂_χ(U²)`.
#[derive(Debug, Clone)]
pub struct KdvNonlinearity {
    grid: Arc<Grid>,
    factor: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl KdvNonlinearity {
    pub fn new(grid: Arc<Grid>) -> Self {
        let factor = grid.derivative_symbol(1).iter().map(|s| 3.0 * s).collect();
        let n = grid.n_points();
        let scratch = vec![Complex64::default(); grid.scratch_len()];
        Self {
            grid,
            factor,
            buf: vec![Complex64::default(); n],
            scratch,
        }
    }
}

impl NonlinearTerm for KdvNonlinearity {
    fn evaluate(&mut self, spectrum: &[Complex64], out: &mut [Complex64]) {
        self.buf.copy_from_slice(spectrum);
        self.grid.inverse_with_scratch(&mut self.buf, &mut self.scratch);
        for v in self.buf.iter_mut() {
            *v = Complex64::new(v.re * v.re, 0.0);
        }
        self.grid.forward_with_scratch(&mut self.buf, &mut self.scratch);
        for ((o, b), f) in out.iter_mut().zip(&self.buf).zip(&self.factor) {
            *o = f * b;
        }
    }
}

/// Real KdV field at reduced time `t_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdvState {
    pub t_hat: f64,
    pub u_values: Vec<f64>,
}

impl KdvState {
    pub fn mass(&self, dchi: f64) -> f64 {
        self.u_values.iter().sum::<f64>() * dchi
    }
}

/// Integrates the KdV equation with ETDRK4, recording every `cadence`.
/// The first entry is `initial` itself.
pub fn kdv_evolve(
    grid: Arc<Grid>,
    initial: &KdvState,
    t_end: f64,
    dt: f64,
    cadence: f64,
) -> Result<Vec<KdvState>> {
    if initial.u_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("KdV initial data is not finite".into()));
    }
    let field = Field::from_real(Arc::clone(&grid), &initial.u_values)?;
    let coeffs = Arc::new(EtdCoefficients::new(&kdv_linear_symbols(&grid), dt)?);
    let mut nl = KdvNonlinearity::new(Arc::clone(&grid));
    let start = FieldState::new(initial.t_hat, field);
    let trajectory = evolve(&start, t_end, coeffs, cadence, &mut nl, &mut []).map_err(|e| e.error)?;
    Ok(trajectory
        .iter()
        .map(|(t_hat, f)| KdvState {
            t_hat,
            u_values: f.values().iter().map(|c| c.re).collect(),
        })
        .collect())
}

/// Scale factors linking physical `(x, t)` to `(χ, T̂)` and `U` to `ρ₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionScales {
    pub epsilon: f64,
    /// Signed sound speed `C`.
    pub c: f64,
    pub q: f64,
    /// Helmholtz length entering `q` and the KdV time.
    pub a: f64,
    pub form: AnsatzForm,
}

impl ReductionScales {
    pub fn new(params: &ModelParams, epsilon: f64, direction: Direction, form: AnsatzForm) -> Result<Self> {
        params.validate()?;
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        let c = direction.sign() * params.sound_speed();
        Ok(Self {
            epsilon,
            c,
            q: q_parameter(params.a, c)?,
            a: params.a,
            form,
        })
    }

    /// Scales of the reduction a soliton was built from (honours `a_eff`).
    pub fn for_soliton(spec: &SolitonSpec, params: &ModelParams) -> Result<Self> {
        spec.validate(params)?;
        let c = spec.signed_speed(params);
        let a = spec.a_eff(params);
        Ok(Self {
            epsilon: spec.epsilon,
            c,
            q: q_parameter(a, c)?,
            a,
            form: spec.form,
        })
    }

    /// Checks `q = (1 − 2a²C²)/(2 − a²C²)`.
    pub fn validate(&self) -> Result<()> {
        let q = q_parameter(self.a, self.c)?;
        if (q - self.q).abs() > 1e-12 * q.abs().max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "q = {} is inconsistent with a = {}, C = {} (expected {q})",
                self.q, self.a, self.c
            )));
        }
        Ok(())
    }

    /// `dT̂/d𝒯`.
    pub fn kdv_time_factor(&self) -> f64 {
        let p = self.a * self.a * self.c * self.c;
        self.form.drift_sign() * (1.0 - 2.0 * p) / (2.0 * self.c)
    }

    /// `χ = √ε (x − Ct)`.
    pub fn chi(&self, x: f64, t: f64) -> f64 {
        self.epsilon.sqrt() * (x - self.c * t)
    }

    /// Inverse of [`ReductionScales::chi`] at time `t`.
    pub fn x_of_chi(&self, chi: f64, t: f64) -> f64 {
        chi / self.epsilon.sqrt() + self.c * t
    }

    /// `T̂` for physical time `t`.
    pub fn t_hat(&self, t: f64) -> f64 {
        self.kdv_time_factor() * self.epsilon.powf(1.5) * t
    }
}

/// `T̂ = s (1 − 2a²C²)/(2C) · ε^{3/2} t`.
pub fn time_rescale(t_physical: f64, scales: &ReductionScales) -> f64 {
    scales.t_hat(t_physical)
}

/// `ρ₁ = (2q/C²) U`.
pub fn kdv_to_density(u: &[f64], scales: &ReductionScales) -> Vec<f64> {
    let factor = 2.0 * scales.q / (scales.c * scales.c);
    u.iter().map(|v| factor * v).collect()
}

/// Amplitude `1 + ερ₁` predicted at physical points `x` and time `t` by a
/// KdV soliton of amplitude `beta` whose core starts at `x = -x0`.
pub fn kdv_soliton_amplitude(beta: f64, x0: f64, scales: &ReductionScales, x: &[f64], t: f64) -> Vec<f64> {
    let chi: Vec<f64> = x.iter().map(|&xi| scales.chi(xi, t)).collect();
    let u = kdv_soliton(beta, scales.epsilon.sqrt() * x0, &chi, scales.t_hat(t));
    kdv_to_density(&u, scales)
        .into_iter()
        .map(|r| 1.0 + scales.epsilon * r)
        .collect()
}

/// Real samples on a uniform space-time lattice, `values[it * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSamples {
    pub dx: f64,
    pub dt: f64,
    pub nx: usize,
    pub nt: usize,
    pub values: Vec<f64>,
}

impl SpaceTimeSamples {
    pub fn new(dx: f64, dt: f64, nx: usize, nt: usize, values: Vec<f64>) -> Result<Self> {
        if !(dx > 0.0 && dt > 0.0 && dx.is_finite() && dt.is_finite()) {
            return Err(Error::InvalidArgument("lattice spacings must be > 0".into()));
        }
        if values.len() != nx * nt {
            return Err(Error::LengthMismatch {
                expected: nx * nt,
                found: values.len(),
            });
        }
        Ok(Self {
            dx,
            dt,
            nx,
            nt,
            values,
        })
    }

    /// Samples `f(X, T)` at `X = x_start + i dx`, `T = t_start + j dt`.
    pub fn from_fn<F>(
        (x_start, dx, nx): (f64, f64, usize),
        (t_start, dt, nt): (f64, f64, usize),
        f: F,
    ) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        let mut values = Vec::with_capacity(nx * nt);
        for j in 0..nt {
            let t = t_start + j as f64 * dt;
            values.extend((0..nx).map(|i| f(x_start + i as f64 * dx, t)));
        }
        Self::new(dx, dt, nx, nt, values)
    }

    fn at(&self, ix: usize, it: usize) -> f64 {
        self.values[it * self.nx + ix]
    }
}

/// Slow phase `Φ(X, T) = −(2q√β/C) tanh[(√β/2)(χ − βT̂ + χ₀)]` of a
/// right- or left-going KdV soliton, with `χ = X − CT`, `T̂` from `𝒯 = εT`.
pub fn soliton_phase(beta: f64, chi0: f64, scales: &ReductionScales, x: f64, t: f64) -> f64 {
    let chi = x - scales.c * t;
    let t_hat = scales.kdv_time_factor() * scales.epsilon * t;
    let root = beta.sqrt();
    -(2.0 * scales.q * root / scales.c) * (0.5 * root * (chi - beta * t_hat + chi0)).tanh()
}

/// Smallest number of lattice points accepted across the soliton width.
pub const MIN_POINTS_PER_WIDTH: f64 = 9.0;

/// Discrete L² norm of
///
/// ```text
/// Φ_TT − C²Φ_XX + sε{2a²Φ_XXTT − 4Φ_XΦ_XT(1 − 3a²u₀²) − 2Φ_TΦ_XX − Φ_XXXX}
/// ```
///
/// over the lattice interior, using second-order centred differences; `s` is
/// the drift sign of `scales.form`. The soliton width is read off the data as
/// the extent where `|Φ_X| ≥ ½ max|Φ_X|`; fewer than
/// [`MIN_POINTS_PER_WIDTH`] points across it is rejected.
pub fn boussinesq_residual(
    phi: &SpaceTimeSamples,
    scales: &ReductionScales,
    params: &ModelParams,
) -> Result<f64> {
    if phi.nx < 5 || phi.nt < 3 {
        return Err(Error::InvalidArgument(format!(
            "residual needs at least 5 x 3 samples, got {} x {}",
            phi.nx, phi.nt
        )));
    }
    check_resolution(phi)?;

    let (hx, ht) = (phi.dx, phi.dt);
    let c2 = scales.c * scales.c;
    let a2 = params.a * params.a;
    let coupling = 1.0 - 3.0 * a2 * params.u0 * params.u0;
    let weight = scales.form.drift_sign() * scales.epsilon;

    let mut sum = 0.0;
    for it in 1..phi.nt - 1 {
        for ix in 2..phi.nx - 2 {
            let f = |dx: isize, dt: isize| phi.at((ix as isize + dx) as usize, (it as isize + dt) as usize);
            let xx = |dt: isize| (f(1, dt) - 2.0 * f(0, dt) + f(-1, dt)) / (hx * hx);
            let x = |dt: isize| (f(1, dt) - f(-1, dt)) / (2.0 * hx);

            let p_tt = (f(0, 1) - 2.0 * f(0, 0) + f(0, -1)) / (ht * ht);
            let p_xx = xx(0);
            let p_xxtt = (xx(1) - 2.0 * xx(0) + xx(-1)) / (ht * ht);
            let p_x = x(0);
            let p_xt = (x(1) - x(-1)) / (2.0 * ht);
            let p_t = (f(0, 1) - f(0, -1)) / (2.0 * ht);
            let p_xxxx =
                (f(2, 0) - 4.0 * f(1, 0) + 6.0 * f(0, 0) - 4.0 * f(-1, 0) + f(-2, 0)) / (hx * hx * hx * hx);

            let bracket = 2.0 * a2 * p_xxtt - 4.0 * p_x * p_xt * coupling - 2.0 * p_t * p_xx - p_xxxx;
            let r = p_tt - c2 * p_xx + weight * bracket;
            sum += r * r;
        }
    }
    Ok((sum * hx * ht).sqrt())
}

fn check_resolution(phi: &SpaceTimeSamples) -> Result<()> {
    let row = &phi.values[..phi.nx];
    let grad: Vec<f64> = row.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let peak = grad.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(());
    }
    let points = grad.iter().filter(|&&g| g >= 0.5 * peak).count() as f64;
    if points < MIN_POINTS_PER_WIDTH {
        return Err(Error::InvalidArgument(format!(
            "lattice too coarse: {points} points across the soliton width, need {MIN_POINTS_PER_WIDTH}"
        )));
    }
    Ok(())
}

//! Asymptotic dark/antidark soliton fields in the rotated frame, the
//! super-Gaussian background envelope used to make them periodic, and the
//! one- and two-soliton initial data built from them.
//!
//! A single soliton is
//!
//! ```text
//! ψ(x, t) = [1 − (εβ/C²) q sech²ξ] · exp[−i (√(εβ)/C) q tanh ξ],
//! ξ = ½√(εβ) (x − v t + x₀),   v = C + εβ(1 − 2a²C²)/(2C),
//! ```
//!
//! with `C = ±2u₀` selecting the direction of travel. That is the
//! [`AnsatzForm::HalfPhase`] form. Matching the phase gradient to the density
//! through the leading-order hydrodynamic balance `Φ_χ = Cρ₁` instead gives a
//! phase coefficient `2√(εβ)q/C` and `v = C − εβ(1 − 2a²C²)/(2C)`; this is
//! [`AnsatzForm::Consistent`], the default. The half-phase form is not a
//! right-going wave: a quarter of its amplitude leaves to the left.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etd::FieldState;
use crate::grid::{Field, Grid};
use crate::model::{q_parameter, ModelParams, Sigma};

/// Direction of travel of a soliton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub enum Direction {
    Right,
    Left,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Right => 1.0,
            Direction::Left => -1.0,
        }
    }
}

impl TryFrom<i32> for Direction {
    type Error = String;

    fn try_from(v: i32) -> std::result::Result<Self, Self::Error> {
        match v {
            1 => Ok(Direction::Right),
            -1 => Ok(Direction::Left),
            other => Err(format!("direction must be +1 or -1, got {other}")),
        }
    }
}

impl From<Direction> for i32 {
    fn from(d: Direction) -> i32 {
        match d {
            Direction::Right => 1,
            Direction::Left => -1,
        }
    }
}

/// Which closed form of the asymptotic soliton to use.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzForm {
    /// Phase `−2(√(εβ)/C) q tanh ξ`, `v = C − εβ(1 − 2a²C²)/(2C)`.
    #[default]
    Consistent,
    /// Phase `−(√(εβ)/C) q tanh ξ`, `v = C + εβ(1 − 2a²C²)/(2C)`.
    HalfPhase,
}

impl AnsatzForm {
    fn phase_factor(self) -> f64 {
        match self {
            AnsatzForm::Consistent => 2.0,
            AnsatzForm::HalfPhase => 1.0,
        }
    }

    /// Sign of the `O(εβ)` velocity correction, and of the reduced KdV time.
    pub fn drift_sign(self) -> f64 {
        match self {
            AnsatzForm::Consistent => -1.0,
            AnsatzForm::HalfPhase => 1.0,
        }
    }
}

/// One asymptotic soliton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolitonSpec {
    /// Formal small parameter ε.
    pub epsilon: f64,
    /// KdV soliton amplitude β.
    pub beta: f64,
    /// Offset entering the phase as `x + x0`; the soliton sits at `x = -x0`.
    pub x0: f64,
    pub direction: Direction,
    /// Helmholtz length used inside `q`; `None` means the model's `a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_eff: Option<f64>,
    #[serde(default)]
    pub form: AnsatzForm,
}

impl SolitonSpec {
    pub fn new(epsilon: f64, beta: f64, x0: f64, direction: Direction) -> Self {
        Self {
            epsilon,
            beta,
            x0,
            direction,
            a_eff: None,
            form: AnsatzForm::default(),
        }
    }

    pub fn with_form(mut self, form: AnsatzForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_a_eff(mut self, a_eff: f64) -> Self {
        self.a_eff = Some(a_eff);
        self
    }

    pub fn a_eff(&self, params: &ModelParams) -> f64 {
        self.a_eff.unwrap_or(params.a)
    }

    /// Signed sound speed `C = ±2u₀`.
    pub fn signed_speed(&self, params: &ModelParams) -> f64 {
        self.direction.sign() * params.sound_speed()
    }

    pub fn q(&self, params: &ModelParams) -> Result<f64> {
        q_parameter(self.a_eff(params), self.signed_speed(params))
    }

    /// Relative density-amplitude parameter `εβq/C²`.
    pub fn amplitude_parameter(&self, params: &ModelParams) -> Result<f64> {
        let c = self.signed_speed(params);
        Ok(self.epsilon * self.beta * self.q(params)? / (c * c))
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if !self.x0.is_finite() {
            return Err(Error::InvalidArgument("x0 must be finite".into()));
        }
        if let Some(a) = self.a_eff {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidArgument(format!("a_eff must be >= 0, got {a}")));
            }
        }
        if params.sigma == Sigma::Focusing {
            return Err(Error::UnsupportedRegime(
                "soliton constructors need the defocusing equation",
            ));
        }
        self.q(params).map(|_| ())
    }

    /// Evaluator for this soliton; validates once so that evaluation is infallible.
    pub fn profile(&self, params: &ModelParams) -> Result<SolitonProfile> {
        self.validate(params)?;
        let c = self.signed_speed(params);
        let q = self.q(params)?;
        let eb = self.epsilon * self.beta;
        let root = eb.sqrt();
        Ok(SolitonProfile {
            depth: eb * q / (c * c),
            phase: self.form.phase_factor() * root * q / c,
            wavenumber: 0.5 * root,
            velocity: predicted_velocity_raw(eb, self.a_eff(params), c, self.form),
            x0: self.x0,
        })
    }
}

fn predicted_velocity_raw(eb: f64, a_eff: f64, c: f64, form: AnsatzForm) -> f64 {
    c + form.drift_sign() * eb * (1.0 - 2.0 * a_eff * a_eff * c * c) / (2.0 * c)
}

/// Precomputed coefficients of one asymptotic soliton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonProfile {
    /// `εβq/C²`: the modulus deviation at the core is `−depth`.
    pub depth: f64,
    /// Phase amplitude (`2√(εβ)q/C` or `√(εβ)q/C`); the phase is `−phase · tanh ξ`.
    pub phase: f64,
    /// `½√(εβ)`.
    pub wavenumber: f64,
    pub velocity: f64,
    pub x0: f64,
}

impl SolitonProfile {
    pub fn xi(&self, x: f64, t: f64) -> f64 {
        self.wavenumber * (x - self.velocity * t + self.x0)
    }

    pub fn eval(&self, x: f64, t: f64) -> Complex64 {
        let xi = self.xi(x, t);
        let sech = 1.0 / xi.cosh();
        let modulus = 1.0 - self.depth * sech * sech;
        Complex64::from_polar(modulus, -self.phase * xi.tanh())
    }

    /// Position of the core at time `t`.
    pub fn center(&self, t: f64) -> f64 {
        self.velocity * t - self.x0
    }
}

/// Samples the asymptotic soliton at the points `x` and time `t`.
pub fn asymptotic_psi(spec: &SolitonSpec, params: &ModelParams, x: &[f64], t: f64) -> Result<Vec<Complex64>> {
    let profile = spec.profile(params)?;
    Ok(x.iter().map(|&xi| profile.eval(xi, t)).collect())
}

/// `v = C ∓ εβ(1 − 2a²C²)/(2C)`, the sign depending on `spec.form`.
pub fn predicted_velocity(spec: &SolitonSpec, params: &ModelParams) -> f64 {
    predicted_velocity_raw(
        spec.epsilon * spec.beta,
        spec.a_eff(params),
        spec.signed_speed(params),
        spec.form,
    )
}

/// Super-Gaussian `exp[−(x/L*)^γ]` that brings the background to zero near
/// the domain edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundEnvelope {
    pub l_star: f64,
    pub gamma: u32,
}

impl Default for BackgroundEnvelope {
    fn default() -> Self {
        Self {
            l_star: 1500.0,
            gamma: 34,
        }
    }
}

impl BackgroundEnvelope {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.l_star > 0.0 && self.l_star < grid.half_length()) {
            return Err(Error::InvalidArgument(format!(
                "envelope half-width {} must lie in (0, {})",
                self.l_star,
                grid.half_length()
            )));
        }
        if self.gamma == 0 || self.gamma % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "envelope exponent must be even and positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        (-(x / self.l_star).powi(self.gamma as i32)).exp()
    }
}

pub fn envelope(env: &BackgroundEnvelope, x: &[f64]) -> Vec<f64> {
    x.iter().map(|&xi| env.value(xi)).collect()
}

/// Enveloped single soliton at `t = 0`.
pub fn single_soliton_ic(
    spec: &SolitonSpec,
    params: &ModelParams,
    grid: Arc<Grid>,
    env: &BackgroundEnvelope,
) -> Result<FieldState> {
    env.validate(&grid)?;
    let profile = spec.profile(params)?;
    let field = Field::from_fn(grid, |x| profile.eval(x, 0.0) * env.value(x));
    Ok(FieldState::new(0.0, field))
}

/// Enveloped product of a right-going and a left-going soliton at `t = 0`.
pub fn two_soliton_ic(
    right: &SolitonSpec,
    left: &SolitonSpec,
    params: &ModelParams,
    grid: Arc<Grid>,
    env: &BackgroundEnvelope,
) -> Result<FieldState> {
    if right.direction != Direction::Right || left.direction != Direction::Left {
        return Err(Error::InvalidArgument(
            "two-soliton data need one right-going and one left-going soliton".into(),
        ));
    }
    env.validate(&grid)?;
    let first = right.profile(params)?;
    let second = left.profile(params)?;
    let field = Field::from_fn(grid, |x| first.eval(x, 0.0) * second.eval(x, 0.0) * env.value(x));
    Ok(FieldState::new(0.0, field))
}

/// Boost wavenumber after snapping to the periodic lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedBoost {
    pub requested: f64,
    pub applied: f64,
}

/// Multiplies `state` by `exp(iνx)`, with `ν` rounded to the nearest multiple
/// of `π/L` so that the boosted field stays periodic.
pub fn galilean_boost(state: &FieldState, nu: f64) -> (FieldState, AppliedBoost) {
    let grid = state.grid();
    let unit = grid.wavenumber_unit();
    let applied = (nu / unit).round() * unit;
    let mut field = state.field.clone();
    if applied != 0.0 {
        for (j, v) in field.values_mut().iter_mut().enumerate() {
            let x = grid.node(j);
            *v *= Complex64::new(0.0, applied * x).exp();
        }
    }
    (
        FieldState::new(state.t, field),
        AppliedBoost {
            requested: nu,
            applied,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{q_functional, SolitonClass};

    fn params(a: f64) -> ModelParams {
        ModelParams::defocusing(a, 1.0).unwrap()
    }

    #[test]
    fn antidark_hump_height() {
        let spec = SolitonSpec::new(1.0, 0.1, 0.0, Direction::Right);
        let p = params(0.5);
        assert!((spec.amplitude_parameter(&p).unwrap() + 0.025).abs() < 1e-15);
        let psi = asymptotic_psi(&spec, &p, &[0.0], 0.0).unwrap();
        assert!((psi[0].norm() - 1.025).abs() < 1e-14);
    }

    #[test]
    fn zero_amplitude_is_background() {
        let a = 1.0 / 8.0f64.sqrt();
        let p = params(a);
        let spec = SolitonSpec::new(0.3, 0.2, 5.0, Direction::Right);
        let x: Vec<f64> = (-50..50).map(|j| j as f64).collect();
        for t in [0.0, 3.0] {
            for v in asymptotic_psi(&spec, &p, &x, t).unwrap() {
                assert!((v - 1.0).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn far_field_limits() {
        let p = params(0.8);
        let spec = SolitonSpec::new(0.04, 0.1, 0.0, Direction::Right);
        let prof = spec.profile(&p).unwrap();
        let psi = asymptotic_psi(&spec, &p, &[-5000.0, 5000.0], 0.0).unwrap();
        assert!((psi[0].norm() - 1.0).abs() < 1e-14);
        assert!((psi[1].norm() - 1.0).abs() < 1e-14);
        assert!((psi[0].arg() - prof.phase).abs() < 1e-12);
        assert!((psi[1].arg() + prof.phase).abs() < 1e-12);
    }

    #[test]
    fn half_phase_velocities() {
        let spec = SolitonSpec::new(0.04, 0.1, 0.0, Direction::Right).with_form(AnsatzForm::HalfPhase);
        assert!((predicted_velocity(&spec, &params(0.5)) - 1.999).abs() < 1e-14);
        assert!((predicted_velocity(&spec, &params(0.0)) - 2.001).abs() < 1e-14);
        let tiny = SolitonSpec::new(1e-9, 0.1, 0.0, Direction::Left);
        assert!((predicted_velocity(&tiny, &params(0.5)) + 2.0).abs() < 1e-9);
    }

    #[test]
    fn consistent_velocities() {
        let spec = SolitonSpec::new(0.04, 0.1, 0.0, Direction::Right);
        assert!((predicted_velocity(&spec, &params(0.5)) - 2.001).abs() < 1e-14);
        // a = 0: shallow NLS dark solitons are subsonic, v = 2√(1 − εβ/4) ≈ 2 − εβ/4
        assert!((predicted_velocity(&spec, &params(0.0)) - 1.999).abs() < 1e-14);
        let left = SolitonSpec::new(0.04, 0.1, 0.0, Direction::Left);
        assert!((predicted_velocity(&left, &params(0.0)) + 1.999).abs() < 1e-14);
    }

    /// At `a = 0` the exact dark soliton `iA + B tanh(B(x − 2At))`, `A² + B² = 1`,
    /// has a phase jump `2 arctan(B/A)`; its shallow limit fixes the phase
    /// coefficient of the consistent form.
    #[test]
    fn consistent_phase_matches_nls_dark_soliton() {
        let p = params(0.0);
        let eps = 1e-4;
        let spec = SolitonSpec::new(eps, 0.1, 0.0, Direction::Right);
        let prof = spec.profile(&p).unwrap();
        let b = prof.wavenumber;
        let a = (1.0 - b * b).sqrt();
        let exact_jump = 2.0 * (b / a).atan();
        let jump = 2.0 * prof.phase;
        assert!(
            (jump - exact_jump).abs() / exact_jump < 1e-4,
            "{jump} vs {exact_jump}"
        );
        let half_phase = spec.with_form(AnsatzForm::HalfPhase).profile(&p).unwrap();
        assert!((2.0 * half_phase.phase / exact_jump - 0.5).abs() < 1e-4);
    }

    #[test]
    fn phase_jump_across_soliton() {
        let p = params(0.8);
        for form in [AnsatzForm::HalfPhase, AnsatzForm::Consistent] {
            let spec = SolitonSpec::new(0.04, 0.1, 0.0, Direction::Right).with_form(form);
            let psi = asymptotic_psi(&spec, &p, &[-4000.0, 4000.0], 0.0).unwrap();
            let jump = psi[1].arg() - psi[0].arg();
            let c = 2.0;
            let q = spec.q(&p).unwrap();
            let expected = -2.0 * form.phase_factor() * (0.004f64).sqrt() * q / c;
            assert!((jump - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn travelling_wave() {
        let p = params(0.65);
        let spec = SolitonSpec::new(0.1, 0.1, 30.0, Direction::Left);
        let v = predicted_velocity(&spec, &p);
        let x: Vec<f64> = (-200..200).map(|j| j as f64 * 0.7).collect();
        for delta in [0.3, 1.7, -4.2, 11.0] {
            let shifted: Vec<f64> = x.iter().map(|xi| xi - v * delta).collect();
            let now = asymptotic_psi(&spec, &p, &x, 5.0).unwrap();
            let before = asymptotic_psi(&spec, &p, &shifted, 5.0 - delta).unwrap();
            for (a, b) in now.iter().zip(&before) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn envelope_values() {
        let env = BackgroundEnvelope::default();
        assert_eq!(env.value(0.0), 1.0);
        assert!((env.value(1500.0) - (-1.0f64).exp()).abs() < 1e-15);
        let expected = (-(0.9f64.powi(34))).exp();
        assert!((env.value(1350.0) - expected).abs() < 1e-14);
        assert!((env.value(1350.0) - 0.9726).abs() < 1e-4);
    }

    #[test]
    fn envelope_validation() {
        let grid = Grid::new(100.0, 64).unwrap();
        assert!(BackgroundEnvelope {
            l_star: 150.0,
            gamma: 34
        }
        .validate(&grid)
        .is_err());
        assert!(BackgroundEnvelope {
            l_star: 50.0,
            gamma: 33
        }
        .validate(&grid)
        .is_err());
        assert!(BackgroundEnvelope {
            l_star: 50.0,
            gamma: 34
        }
        .validate(&grid)
        .is_ok());
    }

    #[test]
    fn focusing_rejected() {
        let p = ModelParams::new(0.5, Sigma::Focusing, 1.0).unwrap();
        let spec = SolitonSpec::new(0.04, 0.1, 0.0, Direction::Right);
        assert!(matches!(
            asymptotic_psi(&spec, &p, &[0.0], 0.0),
            Err(Error::UnsupportedRegime(_))
        ));
        let singular = params(1.0 / 2.0f64.sqrt());
        assert!(matches!(
            asymptotic_psi(&spec, &singular, &[0.0], 0.0),
            Err(Error::SingularParameter { .. })
        ));
    }

    #[test]
    fn polarity_follows_classification() {
        for (a, u0) in [(0.5, 1.0), (0.8, 1.0), (0.0, 1.0), (0.3, 1.5), (0.6, 0.9)] {
            let p = ModelParams::defocusing(a, u0).unwrap();
            let spec = SolitonSpec::new(0.05, 0.1, 0.0, Direction::Right);
            let x: Vec<f64> = (-400..=400).map(|j| j as f64 * 0.25).collect();
            let density: Vec<f64> = asymptotic_psi(&spec, &p, &x, 0.0)
                .unwrap()
                .iter()
                .map(|c| c.norm_sqr())
                .collect();
            let max = density.iter().cloned().fold(f64::MIN, f64::max);
            let min = density.iter().cloned().fold(f64::MAX, f64::min);
            match p.classify_soliton().unwrap() {
                SolitonClass::Antidark => assert!(max - 1.0 > 1.0 - min),
                SolitonClass::Dark => assert!(1.0 - min > max - 1.0),
                SolitonClass::Degenerate => unreachable!(),
            }
        }
    }

    #[test]
    fn single_ic_is_product_with_envelope() {
        let grid = Arc::new(Grid::new(2500.0, 1 << 12).unwrap());
        let p = params(0.5);
        let spec = SolitonSpec::new(0.04, 0.1, 100.0, Direction::Right);
        let env = BackgroundEnvelope::default();
        let state = single_soliton_ic(&spec, &p, Arc::clone(&grid), &env).unwrap();
        let x = grid.nodes();
        let psi = asymptotic_psi(&spec, &p, &x, 0.0).unwrap();
        for ((v, s), &xj) in state.field.values().iter().zip(&psi).zip(&x) {
            assert_eq!(*v, s * env.value(xj));
        }
    }

    #[test]
    fn two_soliton_with_flat_partner_reduces_to_single() {
        let grid = Arc::new(Grid::new(1000.0, 1 << 11).unwrap());
        let p = params(1.0 / 8.0f64.sqrt());
        let env = BackgroundEnvelope {
            l_star: 600.0,
            gamma: 34,
        };
        let right = SolitonSpec::new(0.1, 0.1, 200.0, Direction::Right).with_a_eff(0.75);
        let left = SolitonSpec::new(0.1, 0.1, -200.0, Direction::Left);
        assert!(left.q(&p).unwrap().abs() < 1e-14);
        let pair = two_soliton_ic(&right, &left, &p, Arc::clone(&grid), &env).unwrap();
        let single = single_soliton_ic(&right, &p, grid, &env).unwrap();
        assert!(pair.field.max_abs_diff(&single.field).unwrap() < 1e-14);
    }

    #[test]
    fn two_soliton_requires_opposite_directions() {
        let grid = Arc::new(Grid::new(1000.0, 1 << 10).unwrap());
        let p = params(0.75);
        let env = BackgroundEnvelope {
            l_star: 600.0,
            gamma: 34,
        };
        let s = SolitonSpec::new(0.1, 0.1, 200.0, Direction::Right);
        assert!(two_soliton_ic(&s, &s, &p, grid, &env).is_err());
    }

    #[test]
    fn boost_snaps_to_lattice() {
        let grid = Arc::new(Grid::new(2500.0, 1 << 12).unwrap());
        let state = FieldState::new(0.0, Field::constant(Arc::clone(&grid), 1.0.into()));
        let (same, b0) = galilean_boost(&state, 0.0);
        assert_eq!(b0.applied, 0.0);
        assert_eq!(same.field.values(), state.field.values());

        let (boosted, b) = galilean_boost(&state, -0.7);
        let unit = grid.wavenumber_unit();
        assert!((b.applied / unit - (b.applied / unit).round()).abs() < 1e-9);
        assert!((b.applied + 0.7).abs() <= unit / 2.0);
        // periodic: first node and one past the last node agree
        let first = boosted.field.values()[0];
        let wrap = Complex64::new(0.0, b.applied * grid.half_length()).exp();
        assert!((first - wrap).norm() < 1e-9);
    }

    #[test]
    fn boost_raises_q_functional_by_plane_wave_energy() {
        let grid = Arc::new(Grid::new(100.0, 1 << 10).unwrap());
        let state = FieldState::new(0.0, Field::constant(Arc::clone(&grid), 1.0.into()));
        let a = 0.5;
        let (boosted, b) = galilean_boost(&state, 0.3);
        for v in boosted.field.values() {
            assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
        }
        let before = q_functional(&state.field, a);
        let after = q_functional(&boosted.field, a);
        let expected = b.applied * b.applied * a * a * 2.0 * grid.half_length();
        assert!((after - before - expected).abs() < 1e-9);
    }
}

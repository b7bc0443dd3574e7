//! Fourth-order exponential time differencing Runge-Kutta (ETDRK4) for
//! `v̂_t = λ v̂ + N̂(v̂)` with a diagonal linear part `λ`.
//!
//! The φ-function weights are evaluated by averaging over a circle of radius
//! one around each `hλ` in the complex plane, which removes the cancellation
//! that the closed forms suffer for small `|hλ|`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

/// Default number of contour nodes.
pub const DEFAULT_CONTOUR_POINTS: usize = 32;
/// Smallest accepted contour node count.
pub const MIN_CONTOUR_POINTS: usize = 16;

/// Spectral nonlinear part of a semilinear evolution equation.
pub trait NonlinearTerm {
    /// Writes `N̂(v̂)` into `out`. Both slices are in FFT order.
    fn evaluate(&mut self, spectrum: &[Complex64], out: &mut [Complex64]);
}

/// The zero nonlinearity; ETDRK4 then integrates the linear flow exactly.
#[derive(Debug, Default, Clone, Copy)]
pub struct Linear;

impl NonlinearTerm for Linear {
    fn evaluate(&mut self, _spectrum: &[Complex64], out: &mut [Complex64]) {
        out.fill(Complex64::default());
    }
}

impl<F> NonlinearTerm for F
where
    F: FnMut(&[Complex64], &mut [Complex64]),
{
    fn evaluate(&mut self, spectrum: &[Complex64], out: &mut [Complex64]) {
        self(spectrum, out)
    }
}

/// Per-mode ETDRK4 coefficients for a fixed step `dt`.
///
/// With `z = hλ`, the update reads
/// `v̂ₙ₊₁ = e_full v̂ₙ + w1 N̂ₙ + w2 (N̂_a + N̂_b) + w3 N̂_c`; at `λ = 0`
/// the weights reduce to the classical RK4 values `h/6, h/3, h/6`.
#[derive(Debug, Clone)]
pub struct EtdCoefficients {
    pub dt: f64,
    /// `exp(hλ)`.
    pub e_full: Vec<Complex64>,
    /// `exp(hλ/2)`.
    pub e_half: Vec<Complex64>,
    /// `h·(exp(hλ/2) − 1)/(hλ)`, the half-step stage weight.
    pub half_weight: Vec<Complex64>,
    pub w1: Vec<Complex64>,
    pub w2: Vec<Complex64>,
    pub w3: Vec<Complex64>,
}

impl EtdCoefficients {
    pub fn new(symbol: &[Complex64], dt: f64) -> Result<Self> {
        Self::with_contour(symbol, dt, DEFAULT_CONTOUR_POINTS)
    }

    pub fn with_contour(symbol: &[Complex64], dt: f64, contour_points: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
        }
        if contour_points < MIN_CONTOUR_POINTS {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_CONTOUR_POINTS} contour points, got {contour_points}"
            )));
        }

        // Full circle: the CH-NLS and KdV symbols are imaginary, so the
        // half-circle shortcut for real symbols does not apply.
        let roots: Vec<Complex64> = (1..=contour_points)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * (j as f64 - 0.5) / contour_points as f64))
            .collect();

        let n = symbol.len();
        let mut coeffs = Self {
            dt,
            e_full: Vec::with_capacity(n),
            e_half: Vec::with_capacity(n),
            half_weight: Vec::with_capacity(n),
            w1: Vec::with_capacity(n),
            w2: Vec::with_capacity(n),
            w3: Vec::with_capacity(n),
        };
        let m = contour_points as f64;
        for &lambda in symbol {
            let z = lambda * dt;
            coeffs.e_full.push(z.exp());
            coeffs.e_half.push((z * 0.5).exp());

            let mut q = Complex64::default();
            let mut f1 = Complex64::default();
            let mut f2 = Complex64::default();
            let mut f3 = Complex64::default();
            for &r in &roots {
                let lr = z + r;
                let e = lr.exp();
                let lr2 = lr * lr;
                let lr3 = lr2 * lr;
                q += ((lr * 0.5).exp() - 1.0) / lr;
                f1 += (-4.0 - lr + e * (4.0 - 3.0 * lr + lr2)) / lr3;
                f2 += (2.0 + lr + e * (lr - 2.0)) / lr3;
                f3 += (-4.0 - 3.0 * lr - lr2 + e * (4.0 - lr)) / lr3;
            }
            coeffs.half_weight.push(q * (dt / m));
            coeffs.w1.push(f1 * (dt / m));
            coeffs.w2.push(f2 * (2.0 * dt / m));
            coeffs.w3.push(f3 * (dt / m));
        }
        Ok(coeffs)
    }

    pub fn len(&self) -> usize {
        self.e_full.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_full.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        [
            &self.e_full,
            &self.e_half,
            &self.half_weight,
            &self.w1,
            &self.w2,
            &self.w3,
        ]
        .iter()
        .all(|v| v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    }
}

/// ETDRK4 stepper with preallocated stage buffers. Advances spectra in place.
#[derive(Debug, Clone)]
pub struct Etdrk4 {
    coeffs: Arc<EtdCoefficients>,
    n_v: Vec<Complex64>,
    n_a: Vec<Complex64>,
    n_b: Vec<Complex64>,
    n_c: Vec<Complex64>,
    stage: Vec<Complex64>,
    stage_a: Vec<Complex64>,
}

impl Etdrk4 {
    pub fn new(coeffs: Arc<EtdCoefficients>) -> Self {
        let n = coeffs.len();
        let zeros = vec![Complex64::default(); n];
        Self {
            coeffs,
            n_v: zeros.clone(),
            n_a: zeros.clone(),
            n_b: zeros.clone(),
            n_c: zeros.clone(),
            stage: zeros.clone(),
            stage_a: zeros,
        }
    }

    pub fn coefficients(&self) -> &EtdCoefficients {
        &self.coeffs
    }

    pub fn dt(&self) -> f64 {
        self.coeffs.dt
    }

    /// One ETDRK4 step of `spectrum`. Fails if the result is not finite;
    /// `t` is only used to label that error.
    #[allow(clippy::needless_range_loop)]
    pub fn step<N: NonlinearTerm + ?Sized>(
        &mut self,
        spectrum: &mut [Complex64],
        nonlinear: &mut N,
        t: f64,
    ) -> Result<()> {
        let c = &*self.coeffs;
        debug_assert_eq!(spectrum.len(), c.len());

        nonlinear.evaluate(spectrum, &mut self.n_v);
        for j in 0..spectrum.len() {
            self.stage_a[j] = c.e_half[j] * spectrum[j] + c.half_weight[j] * self.n_v[j];
        }
        nonlinear.evaluate(&self.stage_a, &mut self.n_a);
        for j in 0..spectrum.len() {
            self.stage[j] = c.e_half[j] * spectrum[j] + c.half_weight[j] * self.n_a[j];
        }
        nonlinear.evaluate(&self.stage, &mut self.n_b);
        for j in 0..spectrum.len() {
            self.stage[j] =
                c.e_half[j] * self.stage_a[j] + c.half_weight[j] * (2.0 * self.n_b[j] - self.n_v[j]);
        }
        nonlinear.evaluate(&self.stage, &mut self.n_c);

        let mut finite = true;
        for j in 0..spectrum.len() {
            let v = c.e_full[j] * spectrum[j]
                + c.w1[j] * self.n_v[j]
                + c.w2[j] * (self.n_a[j] + self.n_b[j])
                + c.w3[j] * self.n_c[j];
            finite &= v.re.is_finite() && v.im.is_finite();
            spectrum[j] = v;
        }
        if finite {
            Ok(())
        } else {
            Err(Error::Divergence { time: t + c.dt })
        }
    }
}

/// A field at a given time.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub t: f64,
    pub field: Field,
}

impl FieldState {
    pub fn new(t: f64, field: Field) -> Self {
        Self { t, field }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.field.grid()
    }
}

/// Recorded snapshots of an evolution.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Field>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, field: Field) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.snapshots.push(field);
    }

    pub fn last(&self) -> Option<(f64, &Field)> {
        self.times.last().copied().zip(self.snapshots.last())
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &Field)> {
        self.times.iter().copied().zip(&self.snapshots)
    }
}

/// Callback invoked at every recorded snapshot.
pub trait Observer {
    fn observe(&mut self, state: &FieldState);
}

impl<F: FnMut(&FieldState)> Observer for F {
    fn observe(&mut self, state: &FieldState) {
        self(state)
    }
}

/// Failed evolution; the snapshots recorded before the failure are kept.
#[derive(Debug, Clone)]
pub struct EvolveError {
    pub error: Error,
    pub partial: Trajectory,
}

impl std::fmt::Display for EvolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} ({} snapshots recorded before failure)",
            self.error,
            self.partial.len()
        )
    }
}

impl std::error::Error for EvolveError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Step count per snapshot, checking that `cadence` is an integer multiple
/// of `dt` to within `1e-9`.
pub fn steps_per_snapshot(cadence: f64, dt: f64) -> Result<usize> {
    if !(cadence.is_finite() && cadence > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cadence must be > 0, got {cadence}"
        )));
    }
    let ratio = cadence / dt;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "cadence {cadence} is not an integer multiple of dt {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Integrates `initial` to `t_end`, recording a snapshot (and calling every
/// observer) at `initial.t` and then every `cadence` time units.
///
/// `t_end` is rounded to a whole number of snapshots.
pub fn evolve<N: NonlinearTerm + ?Sized>(
    initial: &FieldState,
    t_end: f64,
    coeffs: Arc<EtdCoefficients>,
    cadence: f64,
    nonlinear: &mut N,
    observers: &mut [&mut dyn Observer],
) -> std::result::Result<Trajectory, EvolveError> {
    let fail = |error| EvolveError {
        error,
        partial: Trajectory::default(),
    };
    let dt = coeffs.dt;
    if t_end.is_nan() || t_end < initial.t {
        return Err(fail(Error::InvalidArgument(format!(
            "t_end {t_end} precedes the initial time {}",
            initial.t
        ))));
    }
    if coeffs.len() != initial.field.len() {
        return Err(fail(Error::LengthMismatch {
            expected: initial.field.len(),
            found: coeffs.len(),
        }));
    }
    let per_snapshot = steps_per_snapshot(cadence, dt).map_err(fail)?;
    let n_snapshots = ((t_end - initial.t) / cadence + 1e-9).floor() as usize;

    let grid = Arc::clone(initial.grid());
    let mut trajectory = Trajectory::default();
    for obs in observers.iter_mut() {
        obs.observe(initial);
    }
    trajectory.push(initial.t, initial.field.clone());

    let mut stepper = Etdrk4::new(coeffs);
    let mut spectrum = initial.field.spectrum();
    let mut steps_taken: u64 = 0;
    for s in 1..=n_snapshots {
        for _ in 0..per_snapshot {
            let t = initial.t + steps_taken as f64 * dt;
            if let Err(error) = stepper.step(&mut spectrum, nonlinear, t) {
                return Err(EvolveError {
                    error,
                    partial: trajectory,
                });
            }
            steps_taken += 1;
        }
        let t = initial.t + s as f64 * cadence;
        let field =
            Field::from_spectrum(Arc::clone(&grid), spectrum.clone()).expect("spectrum length matches grid");
        let state = FieldState::new(t, field);
        for obs in observers.iter_mut() {
            obs.observe(&state);
        }
        trajectory.push(t, state.field);
    }
    Ok(trajectory)
}

/// Advances `state` by `n_steps` without recording anything.
pub fn advance<N: NonlinearTerm + ?Sized>(
    state: &FieldState,
    n_steps: usize,
    coeffs: Arc<EtdCoefficients>,
    nonlinear: &mut N,
) -> Result<FieldState> {
    let dt = coeffs.dt;
    let mut stepper = Etdrk4::new(coeffs);
    let mut spectrum = state.field.spectrum();
    for i in 0..n_steps {
        stepper.step(&mut spectrum, nonlinear, state.t + i as f64 * dt)?;
    }
    let field = Field::from_spectrum(Arc::clone(state.grid()), spectrum)?;
    Ok(FieldState::new(state.t + n_steps as f64 * dt, field))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rk4_weights_at_zero() {
        let co = EtdCoefficients::new(&[c(0.0, 0.0)], 0.1).unwrap();
        assert!((co.e_full[0] - 1.0).norm() < 1e-15);
        assert!((co.e_half[0] - 1.0).norm() < 1e-15);
        assert!((co.half_weight[0] - 0.05).norm() < 1e-15);
        assert!((co.w1[0] - 0.1 / 6.0).norm() < 1e-15);
        assert!((co.w2[0] - 0.1 / 3.0).norm() < 1e-15);
        assert!((co.w3[0] - 0.1 / 6.0).norm() < 1e-15);
    }

    #[test]
    fn scalar_exponential() {
        let co = EtdCoefficients::new(&[c(-1.0, 0.0)], 0.1).unwrap();
        assert!((co.e_full[0].re - (-0.1f64).exp()).abs() < 1e-15);
        assert!((co.e_full[0].re - 0.904837).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(EtdCoefficients::new(&[c(0.0, 0.0)], 0.0).is_err());
        assert!(EtdCoefficients::with_contour(&[c(0.0, 0.0)], 0.1, 8).is_err());
        assert!(steps_per_snapshot(1.0, 0.3).is_err());
        assert_eq!(steps_per_snapshot(1.0, 0.01).unwrap(), 100);
        assert_eq!(steps_per_snapshot(0.5, 0.1).unwrap(), 5);
    }

    #[test]
    fn linear_decay_is_exact() {
        let co = Arc::new(EtdCoefficients::new(&[c(-1.0, 0.0)], 0.1).unwrap());
        let mut stepper = Etdrk4::new(co);
        let mut y = [c(1.0, 0.0)];
        for i in 0..10 {
            stepper.step(&mut y, &mut Linear, i as f64 * 0.1).unwrap();
        }
        assert!((y[0].re - (-1.0f64).exp()).abs() < 1e-12);
    }

    /// y' = -y + y², y(0) = 1/2 has the closed form y = 1/(1 + eᵗ).
    fn logistic_error(dt: f64) -> f64 {
        let steps = (1.0 / dt).round() as usize;
        let co = Arc::new(EtdCoefficients::new(&[c(-1.0, 0.0)], dt).unwrap());
        let mut stepper = Etdrk4::new(co);
        let mut y = [c(0.5, 0.0)];
        let mut square = |s: &[Complex64], out: &mut [Complex64]| out[0] = s[0] * s[0];
        for i in 0..steps {
            stepper.step(&mut y, &mut square, i as f64 * dt).unwrap();
        }
        (y[0].re - 1.0 / (1.0 + 1.0f64.exp())).abs()
    }

    #[test]
    fn logistic_fourth_order() {
        let errors: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&dt| logistic_error(dt)).collect();
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((ratio - 16.0).abs() <= 1.6, "ratio {ratio}, errors {errors:?}");
        }
    }

    #[test]
    fn divergence_reported_with_time() {
        let co = Arc::new(EtdCoefficients::new(&[c(0.0, 0.0)], 0.5).unwrap());
        let mut stepper = Etdrk4::new(co);
        let mut y = [c(1.0, 0.0)];
        let mut blowup = |s: &[Complex64], out: &mut [Complex64]| out[0] = s[0].powu(8) * 1e30;
        let mut t = 0.0;
        let err = loop {
            match stepper.step(&mut y, &mut blowup, t) {
                Ok(()) => t += 0.5,
                Err(e) => break e,
            }
            assert!(t < 100.0);
        };
        assert!(matches!(err, Error::Divergence { time } if time > 0.0));
    }
}

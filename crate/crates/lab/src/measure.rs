//! Measurements on recorded trajectories: space-time L² errors, extremum
//! tracking and straight-line fits.

use chnls_core::etd::Trajectory;
use chnls_core::{Complex64, Error, Grid, Result};
use serde::{Deserialize, Serialize};

/// Space-time rectangle `[x0, x1] × [t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    pub x: [f64; 2],
    pub t: [f64; 2],
}

impl Default for Window {
    fn default() -> Self {
        Self {
            x: [-300.0, 300.0],
            t: [0.0, 100.0],
        }
    }
}

impl Window {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] < r[1];
        if !ok(self.x) || !ok(self.t) {
            return Err(Error::InvalidArgument(format!(
                "window {:?} x {:?} is not a proper rectangle",
                self.x, self.t
            )));
        }
        Ok(())
    }

    /// Grid indices with `x0 ≤ x < x1`.
    pub fn x_indices(&self, grid: &Grid) -> std::ops::Range<usize> {
        let first = ((self.x[0] + grid.half_length()) / grid.dx() - 1e-9)
            .ceil()
            .max(0.0) as usize;
        let end = ((self.x[1] + grid.half_length()) / grid.dx() - 1e-9)
            .ceil()
            .max(0.0) as usize;
        first.min(grid.n_points())..end.min(grid.n_points())
    }
}

/// `sqrt(Σ_t Σ_x |ψ − ψ_ref|² dx dt)` over `window`.
///
/// The x sum runs over grid nodes in `[x0, x1)`; the time sum is the
/// trapezoidal rule over the snapshots in `[t0, t1]`, so a constant error
/// `δ` over a window of area `A` gives exactly `|δ|√A`.
pub fn l2_spacetime_error<F>(traj: &Trajectory, reference: F, window: &Window) -> Result<f64>
where
    F: Fn(f64, f64) -> Complex64,
{
    window.validate()?;
    let Some(first) = traj.snapshots.first() else {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    };
    let grid = first.grid();
    let l = grid.half_length();
    if window.x[0] < -l || window.x[1] > l {
        return Err(Error::InvalidArgument(format!(
            "window x range {:?} exceeds the domain [-{l}, {l}]",
            window.x
        )));
    }
    let tol = 1e-9 * window.t[1].abs().max(1.0);
    let (t_first, t_last) = (traj.times[0], traj.times[traj.len() - 1]);
    if window.t[0] < t_first - tol || window.t[1] > t_last + tol {
        return Err(Error::InvalidArgument(format!(
            "window t range {:?} exceeds the trajectory [{t_first}, {t_last}]",
            window.t
        )));
    }
    let selected: Vec<usize> = (0..traj.len())
        .filter(|&i| traj.times[i] >= window.t[0] - tol && traj.times[i] <= window.t[1] + tol)
        .collect();
    if selected.len() < 2 {
        return Err(Error::InvalidArgument(
            "window holds fewer than two snapshots".into(),
        ));
    }
    let cadence = traj.times[selected[1]] - traj.times[selected[0]];
    let range = window.x_indices(grid);
    let mut total = 0.0;
    for (n, &i) in selected.iter().enumerate() {
        let t = traj.times[i];
        let values = traj.snapshots[i].values();
        let row: f64 = range
            .clone()
            .map(|j| (values[j] - reference(grid.node(j), t)).norm_sqr())
            .sum();
        let weight = if n == 0 || n + 1 == selected.len() {
            0.5
        } else {
            1.0
        };
        total += weight * row;
    }
    Ok((total * grid.dx() * cadence).sqrt())
}

/// Spatial L² norm of `ψ − ψ_ref` over `[x0, x1)` at one time.
pub fn l2_spatial_error<F>(grid: &Grid, values: &[Complex64], reference: F, x: [f64; 2]) -> f64
where
    F: Fn(f64) -> Complex64,
{
    let window = Window { x, t: [0.0, 1.0] };
    let sum: f64 = window
        .x_indices(grid)
        .map(|j| (values[j] - reference(grid.node(j))).norm_sqr())
        .sum();
    (sum * grid.dx()).sqrt()
}

/// Whether a tracked structure is a density hump or a dip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Hump,
    Dip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSample {
    pub t: f64,
    pub position: f64,
    pub density: f64,
}

/// Vertex of the parabola through three equally spaced samples, as
/// (offset in units of the spacing, value).
pub fn quadratic_vertex(left: f64, centre: f64, right: f64) -> (f64, f64) {
    let curvature = left - 2.0 * centre + right;
    if curvature == 0.0 {
        return (0.0, centre);
    }
    let offset = 0.5 * (left - right) / curvature;
    (offset, centre - 0.25 * (left - right) * offset)
}

/// Samples used for the running velocity estimate of a [`PeakTracker`].
const VELOCITY_FIT_SAMPLES: usize = 20;

/// Follows one density extremum from snapshot to snapshot.
///
/// Each search is restricted to `±half_width` around a ballistic prediction
/// from the last free sample, moving at a velocity refitted from the recent
/// free samples (the initial `velocity` until enough exist). Samples taken
/// with `free = false` are recorded but move neither the anchor nor the
/// velocity, so a tracker coasts through an overlap with another structure.
/// The structure counts as lost the first time its deviation from the unit
/// background drops below `threshold`.
#[derive(Debug, Clone)]
pub struct PeakTracker {
    polarity: Polarity,
    velocity: f64,
    half_width: f64,
    threshold: f64,
    anchor: (f64, f64),
    anchored: bool,
    free: Vec<PeakSample>,
    samples: Vec<PeakSample>,
    lost_at: Option<f64>,
}

impl PeakTracker {
    pub fn new(polarity: Polarity, start: f64, velocity: f64, half_width: f64, threshold: f64) -> Self {
        Self {
            polarity,
            velocity,
            half_width,
            threshold,
            anchor: (0.0, start),
            anchored: false,
            free: Vec::new(),
            samples: Vec::new(),
            lost_at: None,
        }
    }

    pub fn samples(&self) -> &[PeakSample] {
        &self.samples
    }

    pub fn lost_at(&self) -> Option<f64> {
        self.lost_at
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    /// Centre of the search window at time `t`.
    pub fn predict(&self, t: f64) -> f64 {
        if self.anchored {
            self.anchor.1 + self.velocity * (t - self.anchor.0)
        } else {
            self.anchor.1
        }
    }

    pub fn observe(&mut self, grid: &Grid, t: f64, density: &[f64]) -> Option<PeakSample> {
        self.observe_with(grid, t, density, true)
    }

    pub fn observe_with(&mut self, grid: &Grid, t: f64, density: &[f64], free: bool) -> Option<PeakSample> {
        let centre = self.predict(t);
        let window = Window {
            x: [centre - self.half_width, centre + self.half_width],
            t: [0.0, 1.0],
        };
        let range = window.x_indices(grid);
        if range.len() < 3 {
            return None;
        }
        let sign = match self.polarity {
            Polarity::Hump => 1.0,
            Polarity::Dip => -1.0,
        };
        let best = range
            .clone()
            .max_by(|&i, &j| (sign * density[i]).total_cmp(&(sign * density[j])))?;
        let (offset, value) = if best > 0 && best + 1 < density.len() {
            quadratic_vertex(density[best - 1], density[best], density[best + 1])
        } else {
            (0.0, density[best])
        };
        let sample = PeakSample {
            t,
            position: grid.node(best) + offset * grid.dx(),
            density: value,
        };
        if (value - 1.0).abs() < self.threshold && self.lost_at.is_none() {
            self.lost_at = Some(t);
        }
        if free || !self.anchored {
            self.anchor = (t, sample.position);
            self.anchored = true;
            self.free.push(sample);
            let recent = &self.free[self.free.len().saturating_sub(VELOCITY_FIT_SAMPLES)..];
            if recent.len() >= VELOCITY_FIT_SAMPLES / 4 {
                let ts: Vec<f64> = recent.iter().map(|s| s.t).collect();
                let xs: Vec<f64> = recent.iter().map(|s| s.position).collect();
                if let Some(fit) = linear_fit(&ts, &xs) {
                    self.velocity = fit.slope;
                }
            }
        }
        self.samples.push(sample);
        Some(sample)
    }
}

/// Least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len().min(y.len());
    if n < 2 {
        return None;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..n {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Speed fitted to the tracked positions with `t` in `[t0, t1]`.
pub fn fitted_speed(samples: &[PeakSample], t0: f64, t1: f64) -> Option<f64> {
    let (t, x): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .map(|s| (s.t, s.position))
        .unzip();
    linear_fit(&t, &x).map(|f| f.slope)
}

/// Mean of `density − 1` over the samples with `t` in `[t0, t1]`.
pub fn mean_deviation(samples: &[PeakSample], t0: f64, t1: f64) -> Option<f64> {
    let devs: Vec<f64> = samples
        .iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .map(|s| s.density - 1.0)
        .collect();
    (!devs.is_empty()).then(|| devs.iter().sum::<f64>() / devs.len() as f64)
}

/// Local extrema of `density − 1` on `[x0, x1)` whose size is at least
/// `threshold`, as `(x, deviation)` pairs.
pub fn density_extrema(grid: &Grid, density: &[f64], x: [f64; 2], threshold: f64) -> Vec<(f64, f64)> {
    let window = Window { x, t: [0.0, 1.0] };
    let range = window.x_indices(grid);
    let lo = range.start.max(1);
    let hi = range.end.min(density.len() - 1);
    (lo..hi)
        .filter_map(|j| {
            let d = density[j] - 1.0;
            let (l, r) = (density[j - 1] - 1.0, density[j + 1] - 1.0);
            let is_max = d > l && d >= r;
            let is_min = d < l && d <= r;
            ((is_max || is_min) && d.abs() >= threshold).then(|| (grid.node(j), d))
        })
        .collect()
}

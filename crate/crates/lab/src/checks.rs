//! Measurements that compare whole solver runs: temporal self-convergence
//! and the gap between CH-NLS and its KdV reduction.

use std::sync::Arc;

use chnls_core::etd::{advance, evolve, EtdCoefficients, FieldState};
use chnls_core::kdv::{kdv_evolve, kdv_soliton, KdvState, ReductionScales};
use chnls_core::model::ChnlsNonlinearity;
use chnls_core::soliton::{single_soliton_ic, SolitonSpec};
use chnls_core::{Field, Grid};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Experiment, GridSpec, RunConfig};
use crate::harness::HarnessError;

fn single_soliton(config: &RunConfig) -> Result<&SolitonSpec, HarnessError> {
    match &config.experiment {
        Experiment::SingleSoliton { soliton, .. } => Ok(soliton),
        _ => Err(ConfigError::Invalid {
            key: "experiment.type".into(),
            message: "expected SingleSoliton".into(),
        }
        .into()),
    }
}

/// Enveloped initial field of a single-soliton config.
pub fn initial_state(config: &RunConfig) -> Result<FieldState, HarnessError> {
    config.validate()?;
    let spec = single_soliton(config)?;
    let env = config.envelope.ok_or_else(|| ConfigError::Invalid {
        key: "envelope".into(),
        message: "missing".into(),
    })?;
    let grid = Arc::new(config.grid.build()?);
    Ok(single_soliton_ic(spec, &config.model, grid, &env)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfConvergence {
    pub dts: Vec<f64>,
    /// Max-norm difference between the fields of consecutive step sizes.
    pub differences: Vec<f64>,
    /// `log₂` of consecutive difference ratios; meaningful for halving steps.
    pub orders: Vec<f64>,
}

/// Integrates the single-soliton config to `t_end` once per step size and
/// compares the final fields.
pub fn self_convergence(
    config: &RunConfig,
    dts: &[f64],
    t_end: f64,
) -> Result<SelfConvergence, HarnessError> {
    let start = initial_state(config)?;
    let grid = Arc::clone(start.grid());
    let symbols = config.model.linear_symbols(&grid);
    let mut finals: Vec<Field> = Vec::with_capacity(dts.len());
    for &dt in dts {
        let steps = (t_end / dt).round() as usize;
        if (steps as f64 * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
            return Err(ConfigError::Invalid {
                key: "dt".into(),
                message: format!("{t_end} is not a whole number of steps of {dt}"),
            }
            .into());
        }
        let coeffs = Arc::new(EtdCoefficients::new(&symbols, dt)?);
        let mut nl = ChnlsNonlinearity::new(Arc::clone(&grid), &config.model, config.dealias);
        finals.push(advance(&start, steps, coeffs, &mut nl)?.field);
    }
    let differences: Vec<f64> = finals
        .windows(2)
        .map(|w| w[0].max_abs_diff(&w[1]))
        .collect::<chnls_core::Result<_>>()?;
    let orders = differences.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(SelfConvergence {
        dts: dts.to_vec(),
        differences,
        orders,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionGap {
    pub epsilon: f64,
    /// Largest `| |ψ|² − (1 + ερ₁)² |` over the window and all snapshots.
    pub max_density_gap: f64,
    /// `max_density_gap / ε²`.
    pub scaled_gap: f64,
    pub t_hat_end: f64,
}

/// Linear interpolation of periodic samples `u` on `grid` at `x`.
fn interpolate(grid: &Grid, u: &[f64], x: f64) -> f64 {
    let n = grid.n_points();
    let s = (x + grid.half_length()) / grid.dx();
    let i = s.floor();
    let frac = s - i;
    let j = (i as i64).rem_euclid(n as i64) as usize;
    u[j] * (1.0 - frac) + u[(j + 1) % n] * frac
}

/// Runs the single-soliton config and, alongside it, the KdV equation on
/// `kdv_grid` from the matching KdV soliton; compares densities over
/// `x_window` at every snapshot.
pub fn reduction_gap(
    config: &RunConfig,
    kdv_grid: GridSpec,
    x_window: [f64; 2],
) -> Result<ReductionGap, HarnessError> {
    let start = initial_state(config)?;
    let spec = single_soliton(config)?;
    let scales = ReductionScales::for_soliton(spec, &config.model)?;
    let t_hat_cadence = scales.t_hat(config.cadence);
    if t_hat_cadence <= 0.0 {
        return Err(ConfigError::Invalid {
            key: "experiment.soliton".into(),
            message: "the KdV time runs backwards for this soliton".into(),
        }
        .into());
    }

    let chi_grid = Arc::new(kdv_grid.build()?);
    let kdv_initial = KdvState {
        t_hat: 0.0,
        u_values: kdv_soliton(spec.beta, scales.epsilon.sqrt() * spec.x0, &chi_grid.nodes(), 0.0),
    };
    let n_snapshots = (config.t_end / config.cadence + 1e-9).floor();
    let kdv = kdv_evolve(
        Arc::clone(&chi_grid),
        &kdv_initial,
        n_snapshots * t_hat_cadence,
        t_hat_cadence,
        t_hat_cadence,
    )?;

    let grid = Arc::clone(start.grid());
    let coeffs = Arc::new(EtdCoefficients::new(
        &config.model.linear_symbols(&grid),
        config.dt,
    )?);
    let mut nl = ChnlsNonlinearity::new(Arc::clone(&grid), &config.model, config.dealias);
    let rho_factor = 2.0 * scales.q / (scales.c * scales.c);
    let lo = grid.nodes().iter().position(|&x| x >= x_window[0]).unwrap_or(0);
    let hi = grid.nodes().iter().rposition(|&x| x <= x_window[1]).unwrap_or(0);
    let mut gap: f64 = 0.0;
    let mut snapshot = 0usize;
    let mut observer = |state: &FieldState| {
        let u = &kdv[snapshot.min(kdv.len() - 1)].u_values;
        snapshot += 1;
        for (j, v) in state.field.values().iter().enumerate().take(hi + 1).skip(lo) {
            let x = grid.node(j);
            let amp = 1.0 + scales.epsilon * rho_factor * interpolate(&chi_grid, u, scales.chi(x, state.t));
            gap = gap.max((v.norm_sqr() - amp * amp).abs());
        }
    };
    evolve(
        &start,
        config.t_end,
        coeffs,
        config.cadence,
        &mut nl,
        &mut [&mut observer as &mut dyn chnls_core::etd::Observer],
    )
    .map_err(|e| e.error)?;
    Ok(ReductionGap {
        epsilon: scales.epsilon,
        max_density_gap: gap,
        scaled_gap: gap / (scales.epsilon * scales.epsilon),
        t_hat_end: kdv.last().map(|s| s.t_hat).unwrap_or(0.0),
    })
}

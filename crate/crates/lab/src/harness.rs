//! Experiment runners. Each one validates its config, evolves the field,
//! measures, and leaves a complete run directory behind.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chnls_core::etd::{evolve, EtdCoefficients, EvolveError, FieldState, Observer, Trajectory};
use chnls_core::kdv::{kdv_evolve, kdv_soliton, KdvState};
use chnls_core::model::{q_functional, q_parameter, ChnlsNonlinearity, ModelParams, SolitonClass};
use chnls_core::soliton::{
    galilean_boost, predicted_velocity, single_soliton_ic, two_soliton_ic, AppliedBoost, BackgroundEnvelope,
    SolitonProfile, SolitonSpec,
};
use chnls_core::{Complex64, Field, Grid};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Experiment, RunConfig};
use crate::measure::{
    density_extrema, fitted_speed, l2_spacetime_error, l2_spatial_error, linear_fit, mean_deviation, LineFit,
    PeakSample, PeakTracker, Polarity, Window,
};
use crate::output::{
    series_csv, snapshot_csv, snapshot_name, OutputWriter, RunManifest, RunStatus, SeriesRow, SERIES_FILE,
};

pub const ERROR_SCAN_FILE: &str = "errorscan.csv";
pub const KDV_SERIES_FILE: &str = "kdv_series.csv";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("solver rejected the setup: {0}")]
    Solver(#[from] chnls_core::Error),
    #[error("run diverged at t = {time}; partial outputs kept in {}", dir.display())]
    Diverged {
        time: f64,
        dir: PathBuf,
        manifest: Box<RunManifest>,
    },
    #[error("I/O error in {}: {source}", dir.display())]
    Io { dir: PathBuf, source: std::io::Error },
}

/// Quantities computed from the config alone.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    /// `C = 2u₀`.
    pub c: f64,
    /// `p = a²C²`.
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<f64>,
    pub predicted_velocity: Vec<f64>,
    pub soliton_classes: Vec<SolitonClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mi_growth_rate: Option<f64>,
}

impl Derived {
    pub fn from_config(config: &RunConfig) -> Self {
        let m = &config.model;
        let c = m.sound_speed();
        let q_of = |s: &SolitonSpec| s.q(m).ok();
        let mut d = Derived {
            c,
            p: m.p(),
            q: q_parameter(m.a, c).ok(),
            soliton_classes: config.soliton_classes(),
            ..Default::default()
        };
        match &config.experiment {
            Experiment::SingleSoliton { soliton, .. } | Experiment::ErrorScan { soliton, .. } => {
                d.q1 = q_of(soliton);
                d.predicted_velocity = vec![predicted_velocity(soliton, m)];
            }
            Experiment::Collision { solitons, .. } => {
                d.q1 = q_of(&solitons[0]);
                d.q2 = q_of(&solitons[1]);
                d.predicted_velocity = solitons.iter().map(|s| predicted_velocity(s, m)).collect();
            }
            Experiment::MiTest { k, .. } => d.mi_growth_rate = Some(m.mi_growth_rate(*k)),
            Experiment::KdvBenchmark { .. } => {}
        }
        d
    }
}

/// Experiment-specific results stored in the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Summary {
    #[default]
    None,
    SingleSoliton(SingleSummary),
    ErrorScan(ErrorScanSummary),
    Collision(CollisionSummary),
    MiTest(MiSummary),
    KdvBenchmark(KdvSummary),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub polarity: Option<Polarity>,
    pub predicted_velocity: f64,
    /// Speed fitted over the measurement window, if it holds two samples.
    pub measured_velocity: Option<f64>,
    pub initial_deviation: Option<f64>,
    pub final_deviation: Option<f64>,
    pub lost_at: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SingleSummary {
    pub track: TrackSummary,
    /// Time interval of the speed fit.
    pub speed_fit_window: [f64; 2],
    /// `|final − initial| / |initial|` of the tracked density deviation.
    pub peak_drift: Option<f64>,
    /// Space-time L² error against the asymptotic soliton over the error window.
    pub l2_spacetime_error: Option<f64>,
    /// Largest `| |ψ|² − 1 |` seen inside the error window.
    pub max_deviation_in_window: f64,
    /// `(t, count)` of density extrema above 10% of the initial deviation.
    pub extrema_counts: Vec<(f64, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorScanRow {
    pub epsilon: f64,
    pub l2_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub epsilon: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorScanSummary {
    pub rows: Vec<ErrorScanRow>,
    pub failures: Vec<ScanFailure>,
    /// Log-log slope of error against ε when at least three rows exist.
    pub loglog_slope: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionTrack {
    pub track: TrackSummary,
    pub pre_deviation: Option<f64>,
    pub post_deviation: Option<f64>,
    /// `|post − pre| / |pre|`.
    pub relative_change: Option<f64>,
    pub pre_speed: Option<f64>,
    pub post_speed: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionSummary {
    /// Meeting time estimated from the tracker velocities.
    pub t_meet: Option<f64>,
    pub pre_window: Option<[f64; 2]>,
    pub post_window: Option<[f64; 2]>,
    pub solitons: Vec<CollisionTrack>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MiSummary {
    pub predicted_rate: f64,
    pub measured_rate: f64,
    pub fit_window: Option<[f64; 2]>,
    pub initial_mode_amplitude: f64,
    /// Largest `|A(t) − A(0)|` of the seeded mode.
    pub max_mode_change: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KdvSummary {
    /// Max-norm error against the exact soliton at the last snapshot.
    pub final_max_error: f64,
    pub worst_max_error: f64,
    pub initial_mass: f64,
    pub max_mass_drift: f64,
}

/// Result of a successful run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

/// Validates `config` and runs its experiment.
pub fn run(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    config.validate()?;
    match config.experiment {
        Experiment::SingleSoliton { .. } => run_single_soliton(config),
        Experiment::ErrorScan { .. } => run_error_scan(config),
        Experiment::Collision { .. } => run_collision(config),
        Experiment::MiTest { .. } => run_mi_test(config),
        Experiment::KdvBenchmark { .. } => run_kdv_benchmark(config),
    }
}

struct Setup {
    grid: Arc<Grid>,
    coeffs: Arc<EtdCoefficients>,
    nonlinear: ChnlsNonlinearity,
}

fn setup(config: &RunConfig) -> Result<Setup, HarnessError> {
    let grid = Arc::new(config.grid.build()?);
    let coeffs = Arc::new(EtdCoefficients::new(
        &config.model.linear_symbols(&grid),
        config.dt,
    )?);
    let nonlinear = ChnlsNonlinearity::new(Arc::clone(&grid), &config.model, config.dealias);
    Ok(Setup {
        grid,
        coeffs,
        nonlinear,
    })
}

fn envelope(config: &RunConfig) -> Result<BackgroundEnvelope, HarnessError> {
    config.envelope.ok_or_else(|| {
        ConfigError::Invalid {
            key: "envelope".into(),
            message: "missing".into(),
        }
        .into()
    })
}

fn io_error(dir: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        dir: dir.to_path_buf(),
        source,
    }
}

/// Streams snapshot files while the solver runs and keeps the first I/O error.
struct SnapshotSink<'w> {
    writer: &'w mut OutputWriter,
    enabled: bool,
    window: Option<[f64; 2]>,
    error: Option<std::io::Error>,
}

impl SnapshotSink<'_> {
    fn write(&mut self, dir: &str, grid: &Grid, t: f64, values: &[Complex64]) {
        if !self.enabled || self.error.is_some() {
            return;
        }
        let text = snapshot_csv(grid, values, self.window);
        if let Err(e) = self.writer.write_file(&snapshot_name(dir, t), text.as_bytes()) {
            self.error = Some(e);
        }
    }
}

/// Finishes a run: writes the series, sets the status and rewrites the manifest.
/// Divergence keeps the partial files; I/O failures remove them.
fn finish(
    mut writer: OutputWriter,
    mut manifest: RunManifest,
    extra: Vec<(&str, String)>,
    sink_error: Option<std::io::Error>,
    evolve_error: Option<chnls_core::Error>,
) -> Result<RunOutcome, HarnessError> {
    let dir = writer.dir().to_path_buf();
    let mut io = sink_error;
    if io.is_none() {
        for (name, text) in extra {
            if let Err(e) = writer.write_file(name, text.as_bytes()) {
                io = Some(e);
                break;
            }
        }
    }
    if let Some(source) = io {
        writer.abort();
        return Err(HarnessError::Io { dir, source });
    }
    let diverged = match evolve_error {
        Some(chnls_core::Error::Divergence { time }) => Some(time),
        Some(other) => {
            writer.abort();
            return Err(other.into());
        }
        None => None,
    };
    manifest.status = if diverged.is_some() {
        RunStatus::Diverged
    } else {
        RunStatus::Completed
    };
    if let Some(time) = diverged {
        manifest.message = Some(format!("non-finite field at t = {time}"));
    }
    let manifest_path = writer.finalize(&mut manifest).map_err(io_error(&dir))?;
    match diverged {
        Some(time) => Err(HarnessError::Diverged {
            time,
            dir,
            manifest: Box::new(manifest),
        }),
        None => Ok(RunOutcome {
            manifest,
            manifest_path,
        }),
    }
}

fn split_evolve(result: Result<Trajectory, EvolveError>) -> (Trajectory, Option<chnls_core::Error>) {
    match result {
        Ok(t) => (t, None),
        Err(e) => (e.partial, Some(e.error)),
    }
}

fn polarity(class: SolitonClass) -> Option<Polarity> {
    match class {
        SolitonClass::Antidark => Some(Polarity::Hump),
        SolitonClass::Dark => Some(Polarity::Dip),
        SolitonClass::Degenerate => None,
    }
}

fn class_of(spec: &SolitonSpec, model: &ModelParams) -> SolitonClass {
    let mut p = *model;
    p.a = spec.a_eff(model);
    p.classify_soliton().unwrap_or(SolitonClass::Degenerate)
}

/// Width `2/√(εβ)` of a soliton, where `|ξ| = 1`.
fn soliton_width(spec: &SolitonSpec) -> f64 {
    2.0 / (spec.epsilon * spec.beta).sqrt()
}

/// Density deviation `(1 − εβq/C²)² − 1` at the core.
fn core_deviation(profile: &SolitonProfile) -> f64 {
    (1.0 - profile.depth).powi(2) - 1.0
}

fn tracker_for(
    spec: &SolitonSpec,
    model: &ModelParams,
    profile: &SolitonProfile,
    velocity: f64,
    grid: &Grid,
) -> Option<PeakTracker> {
    let pol = polarity(class_of(spec, model))?;
    let half_width = soliton_width(spec).max(4.0 * grid.dx());
    let threshold = 0.25 * core_deviation(profile).abs();
    Some(PeakTracker::new(
        pol,
        -profile.x0,
        velocity,
        half_width,
        threshold,
    ))
}

fn density(field: &Field) -> Vec<f64> {
    field.density()
}

/// Speed-fit interval: `[20, 80]` for runs reaching `t = 100`, otherwise the
/// middle 60% of the run.
pub fn speed_fit_window(t_end: f64) -> [f64; 2] {
    if t_end >= 100.0 {
        [20.0, 80.0]
    } else {
        [0.2 * t_end, 0.8 * t_end]
    }
}

pub fn run_single_soliton(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let Experiment::SingleSoliton {
        soliton: spec,
        error_window,
    } = &config.experiment
    else {
        return Err(ConfigError::Invalid {
            key: "experiment.type".into(),
            message: "expected SingleSoliton".into(),
        }
        .into());
    };
    let model = &config.model;
    let env = envelope(config)?;
    let Setup {
        grid,
        coeffs,
        mut nonlinear,
    } = setup(config)?;
    let profile = spec.profile(model)?;
    let initial = single_soliton_ic(spec, model, Arc::clone(&grid), &env)?;

    let mut manifest = RunManifest::new(config.clone(), Derived::from_config(config));
    let mut writer =
        OutputWriter::create(&config.output_dir, &manifest).map_err(io_error(&config.output_dir))?;

    let mut tracker = tracker_for(spec, model, &profile, profile.velocity, &grid);
    let threshold = 0.1 * core_deviation(&profile).abs();
    let extrema_x = [-0.5 * env.l_star, 0.5 * env.l_star];
    let window_range = Window {
        x: *error_window,
        t: [0.0, 1.0],
    }
    .x_indices(&grid);
    let mut rows = Vec::new();
    let mut extrema_counts = Vec::new();
    let mut max_dev: f64 = 0.0;
    let mut sink = SnapshotSink {
        writer: &mut writer,
        enabled: config.output.snapshots,
        window: config.output.snapshot_window,
        error: None,
    };
    let mut observer = |state: &FieldState| {
        let t = state.t;
        let values = state.field.values();
        let rho = density(&state.field);
        let peak = tracker.as_mut().and_then(|tr| tr.observe(&grid, t, &rho));
        let reference = |x: f64| profile.eval(x, t);
        rows.push(SeriesRow {
            t,
            peaks: [peak.map(|p| (p.position, p.density)), None],
            q_functional: Some(q_functional(&state.field, model.a)),
            l2_vs_reference: Some(l2_spatial_error(&grid, values, reference, *error_window)),
        });
        for j in window_range.clone() {
            max_dev = max_dev.max((rho[j] - 1.0).abs());
        }
        if threshold > 0.0 {
            extrema_counts.push((t, density_extrema(&grid, &rho, extrema_x, threshold).len()));
        }
        sink.write("snapshots", &grid, t, values);
        let exact: Vec<Complex64> = grid.nodes().iter().map(|&x| reference(x)).collect();
        sink.write("reference", &grid, t, &exact);
    };
    let result = evolve(
        &initial,
        config.t_end,
        coeffs,
        config.cadence,
        &mut nonlinear,
        &mut [&mut observer as &mut dyn Observer],
    );
    let sink_error = sink.error.take();
    let (trajectory, evolve_error) = split_evolve(result);

    let fit = speed_fit_window(config.t_end);
    let samples: &[PeakSample] = tracker.as_ref().map(|t| t.samples()).unwrap_or(&[]);
    let initial_dev = samples.first().map(|s| s.density - 1.0);
    let final_dev = samples.last().map(|s| s.density - 1.0);
    let t_last = trajectory.times.last().copied().unwrap_or(0.0);
    let l2 = l2_spacetime_error(
        &trajectory,
        |x, t| profile.eval(x, t),
        &Window {
            x: *error_window,
            t: [0.0, t_last],
        },
    )
    .ok();
    manifest.summary = Summary::SingleSoliton(SingleSummary {
        track: TrackSummary {
            polarity: tracker.as_ref().map(|_| polarity(class_of(spec, model)).unwrap()),
            predicted_velocity: profile.velocity,
            measured_velocity: fitted_speed(samples, fit[0], fit[1]),
            initial_deviation: initial_dev,
            final_deviation: final_dev,
            lost_at: tracker.as_ref().and_then(|t| t.lost_at()),
        },
        speed_fit_window: fit,
        peak_drift: initial_dev.zip(final_dev).map(|(a, b)| ((b - a) / a).abs()),
        l2_spacetime_error: l2,
        max_deviation_in_window: max_dev,
        extrema_counts,
    });
    finish(
        writer,
        manifest,
        vec![(SERIES_FILE, series_csv(&rows))],
        sink_error,
        evolve_error,
    )
}

/// Evolves the enveloped soliton for `spec` and returns its space-time L²
/// error against the asymptotic form over `window`.
pub fn soliton_l2_error(
    config: &RunConfig,
    spec: &SolitonSpec,
    window: &Window,
) -> Result<f64, chnls_core::Error> {
    let env = config
        .envelope
        .ok_or_else(|| chnls_core::Error::InvalidArgument("missing envelope".into()))?;
    let grid = Arc::new(config.grid.build()?);
    let coeffs = Arc::new(EtdCoefficients::new(
        &config.model.linear_symbols(&grid),
        config.dt,
    )?);
    let mut nonlinear = ChnlsNonlinearity::new(Arc::clone(&grid), &config.model, config.dealias);
    let profile = spec.profile(&config.model)?;
    let initial = single_soliton_ic(spec, &config.model, grid, &env)?;
    let trajectory = evolve(
        &initial,
        window.t[1],
        coeffs,
        config.cadence,
        &mut nonlinear,
        &mut [],
    )
    .map_err(|e| e.error)?;
    l2_spacetime_error(&trajectory, |x, t| profile.eval(x, t), window)
}

pub fn run_error_scan(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let Experiment::ErrorScan {
        soliton,
        epsilons,
        window,
    } = &config.experiment
    else {
        return Err(ConfigError::Invalid {
            key: "experiment.type".into(),
            message: "expected ErrorScan".into(),
        }
        .into());
    };
    let mut manifest = RunManifest::new(config.clone(), Derived::from_config(config));
    let writer = OutputWriter::create(&config.output_dir, &manifest).map_err(io_error(&config.output_dir))?;

    let mut summary = ErrorScanSummary::default();
    for &epsilon in epsilons {
        let spec = SolitonSpec { epsilon, ..*soliton };
        match soliton_l2_error(config, &spec, window) {
            Ok(l2_error) => summary.rows.push(ErrorScanRow { epsilon, l2_error }),
            Err(e) => summary.failures.push(ScanFailure {
                epsilon,
                message: e.to_string(),
            }),
        }
    }
    if summary.rows.len() >= 3 {
        let (x, y): (Vec<f64>, Vec<f64>) = summary
            .rows
            .iter()
            .filter(|r| r.l2_error > 0.0)
            .map(|r| (r.epsilon.ln(), r.l2_error.ln()))
            .unzip();
        summary.loglog_slope = linear_fit(&x, &y).map(|f| f.slope);
    }
    let mut table = String::from("epsilon,l2_error\n");
    for r in &summary.rows {
        table.push_str(&format!("{},{}\n", r.epsilon, r.l2_error));
    }
    manifest.summary = Summary::ErrorScan(summary);
    finish(writer, manifest, vec![(ERROR_SCAN_FILE, table)], None, None)
}

pub fn run_collision(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let Experiment::Collision { solitons, boost } = &config.experiment else {
        return Err(ConfigError::Invalid {
            key: "experiment.type".into(),
            message: "expected Collision".into(),
        }
        .into());
    };
    let model = &config.model;
    let env = envelope(config)?;
    let Setup {
        grid,
        coeffs,
        mut nonlinear,
    } = setup(config)?;
    let profiles = [solitons[0].profile(model)?, solitons[1].profile(model)?];
    let mut initial = two_soliton_ic(&solitons[0], &solitons[1], model, Arc::clone(&grid), &env)?;
    let mut applied: Option<AppliedBoost> = None;
    if let Some(nu) = boost {
        let (boosted, record) = galilean_boost(&initial, *nu);
        initial = boosted;
        applied = Some(record);
    }
    // A boost exp(iνx) shifts NLS velocities by 2ν; the trackers start from
    // that guess and refit their velocity as they go.
    let shift = 2.0 * applied.map(|b| b.applied).unwrap_or(0.0);
    let velocities = [profiles[0].velocity + shift, profiles[1].velocity + shift];

    let mut manifest = RunManifest::new(config.clone(), Derived::from_config(config));
    manifest.applied_boost = applied;
    let mut writer =
        OutputWriter::create(&config.output_dir, &manifest).map_err(io_error(&config.output_dir))?;

    let mut trackers: Vec<Option<PeakTracker>> = (0..2)
        .map(|i| tracker_for(&solitons[i], model, &profiles[i], velocities[i], &grid))
        .collect();
    let mut rows = Vec::new();
    let mut first_overlap: Option<f64> = None;
    let mut sink = SnapshotSink {
        writer: &mut writer,
        enabled: config.output.snapshots,
        window: config.output.snapshot_window,
        error: None,
    };
    let mut observer = |state: &FieldState| {
        let rho = density(&state.field);
        // Both trackers coast while their search windows overlap.
        let free = match (&trackers[0], &trackers[1]) {
            (Some(a), Some(b)) => {
                let apart = (a.predict(state.t) - b.predict(state.t)).abs() > a.half_width() + b.half_width();
                if !apart && first_overlap.is_none() {
                    first_overlap = Some(state.t);
                }
                apart
            }
            _ => true,
        };
        let mut peaks = [None, None];
        for (slot, tracker) in peaks.iter_mut().zip(trackers.iter_mut()) {
            *slot = tracker
                .as_mut()
                .and_then(|tr| tr.observe_with(&grid, state.t, &rho, free))
                .map(|p| (p.position, p.density));
        }
        rows.push(SeriesRow {
            t: state.t,
            peaks,
            q_functional: Some(q_functional(&state.field, model.a)),
            l2_vs_reference: None,
        });
        sink.write("snapshots", &grid, state.t, state.field.values());
    };
    let result = evolve(
        &initial,
        config.t_end,
        coeffs,
        config.cadence,
        &mut nonlinear,
        &mut [&mut observer as &mut dyn Observer],
    );
    let sink_error = sink.error.take();
    let (_, evolve_error) = split_evolve(result);

    // Meeting time from straight-line fits to the approach phase.
    let approach_end = first_overlap.unwrap_or(config.t_end);
    let lines: Vec<Option<LineFit>> = trackers
        .iter()
        .map(|tr| {
            let samples = tr.as_ref()?.samples();
            let (ts, xs): (Vec<f64>, Vec<f64>) = samples
                .iter()
                .filter(|s| s.t <= approach_end)
                .map(|s| (s.t, s.position))
                .unzip();
            linear_fit(&ts, &xs)
        })
        .collect();
    let t_meet = match (lines[0], lines[1]) {
        (Some(l), Some(r)) if l.slope > r.slope => Some((r.intercept - l.intercept) / (l.slope - r.slope)),
        _ => None,
    }
    .filter(|t| *t > 0.0);
    let pre = t_meet.map(|tm| [0.0, 0.8 * tm]);
    let post = t_meet.map(|tm| [1.2 * tm, config.t_end]).filter(|w| w[0] < w[1]);
    let whole = [0.0, config.t_end];
    let tracks = (0..2)
        .map(|i| {
            let tracker = trackers[i].as_ref();
            let samples: &[PeakSample] = tracker.map(|t| t.samples()).unwrap_or(&[]);
            let pre_dev = pre.and_then(|w| mean_deviation(samples, w[0], w[1]));
            let post_dev = post.and_then(|w| mean_deviation(samples, w[0], w[1]));
            let speed_window = pre.unwrap_or(whole);
            CollisionTrack {
                track: TrackSummary {
                    polarity: polarity(class_of(&solitons[i], model)),
                    predicted_velocity: profiles[i].velocity,
                    measured_velocity: fitted_speed(samples, speed_window[0], speed_window[1]),
                    initial_deviation: samples.first().map(|s| s.density - 1.0),
                    final_deviation: samples.last().map(|s| s.density - 1.0),
                    lost_at: tracker.and_then(|t| t.lost_at()),
                },
                pre_deviation: pre_dev,
                post_deviation: post_dev,
                relative_change: pre_dev.zip(post_dev).map(|(a, b)| ((b - a) / a).abs()),
                pre_speed: pre.and_then(|w| fitted_speed(samples, w[0], w[1])),
                post_speed: post.and_then(|w| fitted_speed(samples, w[0], w[1])),
            }
        })
        .collect();
    manifest.summary = Summary::Collision(CollisionSummary {
        t_meet,
        pre_window: pre,
        post_window: post,
        solitons: tracks,
    });
    finish(
        writer,
        manifest,
        vec![(SERIES_FILE, series_csv(&rows))],
        sink_error,
        evolve_error,
    )
}

/// Amplitude of the `cos(kx)` component: `(|ψ̂_m| + |ψ̂_{−m}|) / N`.
fn mode_amplitude(spectrum: &[Complex64], m: usize) -> f64 {
    let n = spectrum.len();
    (spectrum[m].norm() + spectrum[n - m].norm()) / n as f64
}

/// Upper end of the exponential fit: beyond this the seeded mode is no
/// longer small.
const MI_SATURATION: f64 = 1e-3;

pub fn run_mi_test(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let Experiment::MiTest { k, amplitude } = &config.experiment else {
        return Err(ConfigError::Invalid {
            key: "experiment.type".into(),
            message: "expected MiTest".into(),
        }
        .into());
    };
    let model = &config.model;
    let Setup {
        grid,
        coeffs,
        mut nonlinear,
    } = setup(config)?;
    let m = (k / grid.wavenumber_unit()).round() as usize;
    let field = Field::from_fn(Arc::clone(&grid), |x| {
        Complex64::new(1.0 + amplitude * (k * x).cos(), 0.0)
    });
    let initial = FieldState::new(0.0, field);

    let mut manifest = RunManifest::new(config.clone(), Derived::from_config(config));
    let mut writer =
        OutputWriter::create(&config.output_dir, &manifest).map_err(io_error(&config.output_dir))?;

    let mut modes: Vec<(f64, f64)> = Vec::new();
    let mut rows = Vec::new();
    let mut sink = SnapshotSink {
        writer: &mut writer,
        enabled: config.output.snapshots,
        window: config.output.snapshot_window,
        error: None,
    };
    let mut observer = |state: &FieldState| {
        modes.push((state.t, mode_amplitude(&state.field.spectrum(), m)));
        rows.push(SeriesRow {
            t: state.t,
            q_functional: Some(q_functional(&state.field, model.a)),
            ..Default::default()
        });
        sink.write("snapshots", &grid, state.t, state.field.values());
    };
    let result = evolve(
        &initial,
        config.t_end,
        coeffs,
        config.cadence,
        &mut nonlinear,
        &mut [&mut observer as &mut dyn Observer],
    );
    let sink_error = sink.error.take();
    let (_, evolve_error) = split_evolve(result);

    let a0 = modes.first().map(|m| m.1).unwrap_or(0.0);
    let summary = fit_growth(&modes, a0, model.mi_growth_rate(*k));
    let mut table = String::from("t,mode_amplitude\n");
    for (t, a) in &modes {
        table.push_str(&format!("{t},{a}\n"));
    }
    manifest.summary = Summary::MiTest(summary);
    finish(
        writer,
        manifest,
        vec![(SERIES_FILE, series_csv(&rows)), ("mode.csv", table)],
        sink_error,
        evolve_error,
    )
}

/// Fits `ln A` against `t` on the samples where `A` has grown by at least
/// `e²` over `a0` but is still below [`MI_SATURATION`], stopping at the first
/// sample beyond saturation.
pub fn fit_growth(modes: &[(f64, f64)], a0: f64, predicted: f64) -> MiSummary {
    let max_change = modes.iter().map(|(_, a)| (a - a0).abs()).fold(0.0, f64::max);
    let lower = a0 * std::f64::consts::E.powi(2);
    let window: Vec<(f64, f64)> = modes
        .iter()
        .take_while(|(_, a)| *a <= MI_SATURATION)
        .filter(|(_, a)| *a >= lower)
        .copied()
        .collect();
    let mut summary = MiSummary {
        predicted_rate: predicted,
        measured_rate: 0.0,
        fit_window: None,
        initial_mode_amplitude: a0,
        max_mode_change: max_change,
        diagnostic: None,
    };
    if window.len() < 5 {
        summary.diagnostic = Some(format!(
            "no exponential growth window: {} samples between {lower:.3e} and {MI_SATURATION:e}",
            window.len()
        ));
        return summary;
    }
    let (t, ln_a): (Vec<f64>, Vec<f64>) = window.iter().map(|(t, a)| (*t, a.ln())).unzip();
    if let Some(fit) = linear_fit(&t, &ln_a) {
        summary.measured_rate = fit.slope;
        summary.fit_window = Some([t[0], t[t.len() - 1]]);
    }
    summary
}

pub fn run_kdv_benchmark(config: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let Experiment::KdvBenchmark { beta, chi0 } = &config.experiment else {
        return Err(ConfigError::Invalid {
            key: "experiment.type".into(),
            message: "expected KdvBenchmark".into(),
        }
        .into());
    };
    let grid = Arc::new(config.grid.build()?);
    let chi = grid.nodes();
    let dchi = grid.dx();
    let initial = KdvState {
        t_hat: 0.0,
        u_values: kdv_soliton(*beta, *chi0, &chi, 0.0),
    };
    let mut manifest = RunManifest::new(config.clone(), Derived::from_config(config));
    let mut writer =
        OutputWriter::create(&config.output_dir, &manifest).map_err(io_error(&config.output_dir))?;

    let (states, evolve_error) = match kdv_evolve(
        Arc::clone(&grid),
        &initial,
        config.t_end,
        config.dt,
        config.cadence,
    ) {
        Ok(s) => (s, None),
        Err(e) => (vec![initial.clone()], Some(e)),
    };
    let mass0 = initial.mass(dchi);
    let mut summary = KdvSummary {
        initial_mass: mass0,
        ..Default::default()
    };
    let mut table = String::from("t_hat,max_error,mass\n");
    let mut io = None;
    for s in &states {
        let exact = kdv_soliton(*beta, *chi0, &chi, s.t_hat);
        let err = s
            .u_values
            .iter()
            .zip(&exact)
            .map(|(u, e)| (u - e).abs())
            .fold(0.0, f64::max);
        let mass = s.mass(dchi);
        summary.final_max_error = err;
        summary.worst_max_error = summary.worst_max_error.max(err);
        summary.max_mass_drift = summary.max_mass_drift.max((mass - mass0).abs());
        table.push_str(&format!("{},{},{}\n", s.t_hat, err, mass));
        if config.output.snapshots && io.is_none() {
            let mut text = String::from("chi,u,u_exact\n");
            for ((x, u), e) in chi.iter().zip(&s.u_values).zip(&exact) {
                if config
                    .output
                    .snapshot_window
                    .is_some_and(|w| *x < w[0] || *x > w[1])
                {
                    continue;
                }
                text.push_str(&format!("{x},{u},{e}\n"));
            }
            io = writer
                .write_file(&snapshot_name("snapshots", s.t_hat), text.as_bytes())
                .err();
        }
    }
    manifest.summary = Summary::KdvBenchmark(summary);
    finish(writer, manifest, vec![(KDV_SERIES_FILE, table)], io, evolve_error)
}

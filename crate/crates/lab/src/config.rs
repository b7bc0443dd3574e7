//! Run configuration documents: parsing, validation and dotted overrides.

use std::path::{Path, PathBuf};

use chnls_core::etd::steps_per_snapshot;
use chnls_core::model::{ModelParams, SolitonClass};
use chnls_core::soliton::{BackgroundEnvelope, Direction, SolitonSpec};
use chnls_core::Grid;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::measure::Window;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("bad override `{0}`: expected key=value")]
    OverrideSyntax(String),
    #[error("override key `{0}` matches nothing in the config")]
    UnknownKey(String),
}

fn invalid(key: &str, message: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.to_string(),
    }
}

/// Periodic domain `[−half_length, half_length)` with `n_points` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_length: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn build(&self) -> chnls_core::Result<Grid> {
        Grid::new(self.half_length, self.n_points)
    }
}

/// What a run computes, with its own parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum Experiment {
    /// One soliton compared against its asymptotic form.
    SingleSoliton {
        soliton: SolitonSpec,
        /// x range of the per-snapshot reference error.
        #[serde(default = "default_error_window")]
        error_window: [f64; 2],
    },
    /// The single-soliton run repeated for each ε, reporting the space-time L² error.
    ErrorScan {
        soliton: SolitonSpec,
        epsilons: Vec<f64>,
        #[serde(default)]
        window: Window,
    },
    /// Head-on collision of a right-going and a left-going soliton.
    Collision {
        solitons: [SolitonSpec; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        boost: Option<f64>,
    },
    /// Growth of a seeded Fourier mode on the cw background.
    MiTest { k: f64, amplitude: f64 },
    /// Transport of the KdV soliton; grid, dt and t_end are read in KdV units.
    KdvBenchmark { beta: f64, chi0: f64 },
}

fn default_error_window() -> [f64; 2] {
    [-300.0, 300.0]
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::SingleSoliton { .. } => "SingleSoliton",
            Experiment::ErrorScan { .. } => "ErrorScan",
            Experiment::Collision { .. } => "Collision",
            Experiment::MiTest { .. } => "MiTest",
            Experiment::KdvBenchmark { .. } => "KdvBenchmark",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    /// Write `snapshots/t_<time>.csv` files.
    #[serde(default = "yes")]
    pub snapshots: bool,
    /// Restrict snapshot rows to this x range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_window: Option<[f64; 2]>,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            snapshots: true,
            snapshot_window: None,
        }
    }
}

fn yes() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub model: ModelParams,
    pub dt: f64,
    pub t_end: f64,
    pub cadence: f64,
    /// Super-Gaussian background; required for soliton experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<BackgroundEnvelope>,
    /// Apply the 2/3 rule to the nonlinear term.
    #[serde(default = "yes")]
    pub dealias: bool,
    pub experiment: Experiment,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub output: OutputOptions,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` overrides in order, then re-parses.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self, ConfigError> {
        let mut doc = serde_json::to_value(self)?;
        for item in overrides {
            apply_override(&mut doc, item.as_ref())?;
        }
        Ok(serde_json::from_value(doc)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let grid = self.grid.build().map_err(|e| invalid("grid", e))?;
        self.model.validate().map_err(|e| invalid("model", e))?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        steps_per_snapshot(self.cadence, self.dt).map_err(|e| invalid("cadence", e))?;
        if !(self.t_end.is_finite() && self.t_end >= self.cadence) {
            return Err(invalid(
                "t_end",
                format!(
                    "must be at least the cadence {}, got {}",
                    self.cadence, self.t_end
                ),
            ));
        }
        if let Some(w) = self.output.snapshot_window {
            if w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less) {
                return Err(invalid(
                    "output.snapshot_window",
                    "lower bound must be below upper",
                ));
            }
        }
        let needs_envelope = matches!(
            self.experiment,
            Experiment::SingleSoliton { .. } | Experiment::ErrorScan { .. } | Experiment::Collision { .. }
        );
        match (&self.envelope, needs_envelope) {
            (Some(env), _) => env.validate(&grid).map_err(|e| invalid("envelope", e))?,
            (None, true) => {
                return Err(invalid(
                    "envelope",
                    "soliton experiments need a background envelope",
                ))
            }
            (None, false) => {}
        }
        self.validate_experiment(&grid)
    }

    fn validate_experiment(&self, grid: &Grid) -> Result<(), ConfigError> {
        let soliton = |key: &str, spec: &SolitonSpec| spec.validate(&self.model).map_err(|e| invalid(key, e));
        match &self.experiment {
            Experiment::SingleSoliton {
                soliton: spec,
                error_window,
            } => {
                soliton("experiment.soliton", spec)?;
                check_x_range("experiment.error_window", *error_window, grid)
            }
            Experiment::ErrorScan {
                soliton: spec,
                epsilons,
                window,
            } => {
                soliton("experiment.soliton", spec)?;
                if epsilons.is_empty() {
                    return Err(invalid("experiment.epsilons", "empty list"));
                }
                if epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                    return Err(invalid("experiment.epsilons", "values must be > 0"));
                }
                if epsilons.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid(
                        "experiment.epsilons",
                        "values must be strictly ascending",
                    ));
                }
                window.validate().map_err(|e| invalid("experiment.window", e))?;
                check_x_range("experiment.window.x", window.x, grid)?;
                if window.t[0] < 0.0 || window.t[1] > self.t_end + 1e-9 {
                    return Err(invalid(
                        "experiment.window.t",
                        format!("must lie within [0, t_end = {}]", self.t_end),
                    ));
                }
                Ok(())
            }
            Experiment::Collision { solitons, boost } => {
                soliton("experiment.solitons[0]", &solitons[0])?;
                soliton("experiment.solitons[1]", &solitons[1])?;
                if solitons[0].direction != Direction::Right || solitons[1].direction != Direction::Left {
                    return Err(invalid(
                        "experiment.solitons",
                        "expected a right-going soliton followed by a left-going one",
                    ));
                }
                if boost.is_some_and(|nu| !nu.is_finite()) {
                    return Err(invalid("experiment.boost", "must be finite"));
                }
                Ok(())
            }
            Experiment::MiTest { k, amplitude } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(invalid("experiment.k", format!("must be > 0, got {k}")));
                }
                let m = k / grid.wavenumber_unit();
                if (m - m.round()).abs() > 1e-9 * m.max(1.0) {
                    return Err(invalid(
                        "experiment.k",
                        format!("{k} is not a multiple of pi/L = {}", grid.wavenumber_unit()),
                    ));
                }
                if m.round() as usize >= grid.nyquist_index() {
                    return Err(invalid("experiment.k", "mode is not resolved by the grid"));
                }
                if !(*amplitude > 0.0 && *amplitude <= 1e-6) {
                    return Err(invalid(
                        "experiment.amplitude",
                        format!("must lie in (0, 1e-6], got {amplitude}"),
                    ));
                }
                Ok(())
            }
            Experiment::KdvBenchmark { beta, chi0 } => {
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(invalid("experiment.beta", format!("must be > 0, got {beta}")));
                }
                if !chi0.is_finite() {
                    return Err(invalid("experiment.chi0", "must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Classes of the solitons in this run, in config order.
    pub fn soliton_classes(&self) -> Vec<SolitonClass> {
        let class = |spec: &SolitonSpec| {
            let mut p = self.model;
            p.a = spec.a_eff(&self.model);
            p.classify_soliton().unwrap_or(SolitonClass::Degenerate)
        };
        match &self.experiment {
            Experiment::SingleSoliton { soliton, .. } | Experiment::ErrorScan { soliton, .. } => {
                vec![class(soliton)]
            }
            Experiment::Collision { solitons, .. } => solitons.iter().map(class).collect(),
            _ => Vec::new(),
        }
    }
}

fn check_x_range(key: &str, x: [f64; 2], grid: &Grid) -> Result<(), ConfigError> {
    let l = grid.half_length();
    if !(x[0] < x[1] && x[0] >= -l && x[1] <= l) {
        return Err(invalid(
            key,
            format!("{x:?} must be an interval inside [-{l}, {l}]"),
        ));
    }
    Ok(())
}

/// Sets one value in a JSON document.
///
/// `key` is either a dotted path (`grid.n_points`, `experiment.solitons.1.x0`)
/// or a bare field name, which then sets every field of that name at any
/// depth (`epsilon=0.08` changes each soliton's ε). The value is parsed as
/// JSON and falls back to a string.
pub fn apply_override(doc: &mut Value, item: &str) -> Result<(), ConfigError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| ConfigError::OverrideSyntax(item.to_string()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::OverrideSyntax(item.to_string()));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));

    if key.contains('.') || doc.get(key).is_some() {
        let mut node = doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let last = i + 1 == parts.len();
            node = match node {
                Value::Object(map) => {
                    if last {
                        map.insert(part.to_string(), value);
                        return Ok(());
                    }
                    map.entry(part.to_string())
                        .or_insert_with(|| Value::Object(Default::default()))
                }
                Value::Array(items) => {
                    let idx: usize = part
                        .parse()
                        .map_err(|_| ConfigError::UnknownKey(key.to_string()))?;
                    let slot = items
                        .get_mut(idx)
                        .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
                    if last {
                        *slot = value;
                        return Ok(());
                    }
                    slot
                }
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            };
        }
        unreachable!("loop returns on the last path segment")
    }

    if set_everywhere(doc, key, &value) == 0 {
        return Err(ConfigError::UnknownKey(key.to_string()));
    }
    Ok(())
}

fn set_everywhere(node: &mut Value, key: &str, value: &Value) -> usize {
    match node {
        Value::Object(map) => {
            let mut n = 0;
            for (k, v) in map.iter_mut() {
                if k == key {
                    *v = value.clone();
                    n += 1;
                } else {
                    n += set_everywhere(v, key, value);
                }
            }
            n
        }
        Value::Array(items) => items.iter_mut().map(|v| set_everywhere(v, key, value)).sum(),
        _ => 0,
    }
}

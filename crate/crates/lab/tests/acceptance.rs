//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test -p chnls-lab --test acceptance -- 2 4`. Other words select
//! criteria whose name contains them; `--list` prints the criteria. Flags
//! from the libtest harness are ignored. Values that are only
//! fixed by a first measurement live in `tests/baselines.json`; a missing
//! entry is frozen from the current run and reported as such.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use chnls_core::kdv::{boussinesq_residual, soliton_phase, ReductionScales, SpaceTimeSamples};
use chnls_core::model::{ModelParams, SolitonClass};
use chnls_core::soliton::{AnsatzForm, Direction};
use chnls_lab::checks::{reduction_gap, self_convergence};
use chnls_lab::config::{Experiment, GridSpec};
use chnls_lab::harness::{CollisionSummary, SingleSummary};
use chnls_lab::{presets, run, RunConfig, Summary};

const BASELINE_TOLERANCE: f64 = 0.01;

fn baselines_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/baselines.json")
}

#[derive(Default)]
struct Baselines {
    values: BTreeMap<String, f64>,
    frozen_now: Vec<String>,
}

impl Baselines {
    fn load() -> Self {
        let values = std::fs::read_to_string(baselines_path())
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default();
        Self {
            values,
            frozen_now: Vec::new(),
        }
    }

    /// Frozen value for `key`, freezing `measured` if there is none.
    fn get_or_freeze(&mut self, key: &str, measured: f64) -> f64 {
        *self.values.entry(key.to_string()).or_insert_with(|| {
            self.frozen_now.push(key.to_string());
            measured
        })
    }

    fn save(&self) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(&self.values).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(baselines_path(), text)
    }
}

/// Outcome of one criterion: every clause with its verdict.
#[derive(Default)]
struct Report {
    clauses: Vec<(bool, String)>,
}

impl Report {
    fn check(&mut self, ok: bool, text: impl Into<String>) {
        self.clauses.push((ok, text.into()));
    }

    fn passed(&self) -> bool {
        !self.clauses.is_empty() && self.clauses.iter().all(|c| c.0)
    }
}

struct Ctx {
    dir: tempfile::TempDir,
    baselines: Baselines,
}

impl Ctx {
    fn preset(&self, name: &str, overrides: &[&str]) -> RunConfig {
        let mut config = presets::find(name)
            .unwrap_or_else(|| panic!("missing preset {name}"))
            .config
            .with_overrides(overrides)
            .unwrap();
        config.output_dir = self
            .dir
            .path()
            .join(format!("{name}-{}", overrides.join("_").replace(['/', '"'], "")));
        config
    }
}

type Criterion = fn(&mut Ctx, &mut Report) -> Result<(), String>;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let list = args.iter().any(|a| a == "--list");
    let only: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let words: Vec<&str> = args
        .iter()
        .map(String::as_str)
        .filter(|a| !a.starts_with('-') && a.parse::<u32>().is_err())
        .collect();
    let criteria: [(u32, &str, Criterion); 9] = [
        (1, "q-classification", classification),
        (2, "dispersion and MI growth", modulational_instability),
        (3, "integrator order", integrator_order),
        (4, "KdV exactness", kdv_exactness),
        (5, "soliton kinematics", kinematics),
        (6, "error-scan shape", error_scan),
        (7, "reduction consistency", reduction),
        (8, "collisions", collisions),
        (9, "large-eps phenomenology", large_epsilon),
    ];
    let mut ctx = Ctx {
        dir: tempfile::tempdir().expect("temporary directory"),
        baselines: Baselines::load(),
    };
    let mut failed = 0;
    let selected = |id: u32, name: &str| {
        (only.is_empty() && words.is_empty()) || only.contains(&id) || words.iter().any(|w| name.contains(w))
    };
    if list {
        for (id, name, _) in criteria.iter().filter(|c| selected(c.0, c.1)) {
            println!("criterion {id} ({name}): test");
        }
        return ExitCode::SUCCESS;
    }
    for (id, name, criterion) in criteria {
        if !selected(id, name) {
            continue;
        }
        let started = Instant::now();
        let mut report = Report::default();
        if let Err(e) = criterion(&mut ctx, &mut report) {
            report.check(false, format!("error: {e}"));
        }
        let verdict = if report.passed() { "PASS" } else { "FAIL" };
        if !report.passed() {
            failed += 1;
        }
        let details: Vec<String> = report
            .clauses
            .iter()
            .map(|(ok, text)| {
                if *ok {
                    text.clone()
                } else {
                    format!("[failed] {text}")
                }
            })
            .collect();
        println!(
            "{verdict} criterion {id} ({name}): {} [{:.1} s]",
            details.join("; "),
            started.elapsed().as_secs_f64()
        );
        let _ = std::io::stdout().flush();
    }
    if !ctx.baselines.frozen_now.is_empty() {
        println!("froze new baselines: {}", ctx.baselines.frozen_now.join(", "));
        if let Err(e) = ctx.baselines.save() {
            println!("could not write {}: {e}", baselines_path().display());
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn classification(_: &mut Ctx, r: &mut Report) -> Result<(), String> {
    let half = ModelParams::defocusing(0.5, 1.0).map_err(err)?;
    let q = half.q().map_err(err)?;
    let class = half.classify_soliton().map_err(err)?;
    r.check(
        q == -1.0 && class == SolitonClass::Antidark,
        format!("a=0.5: q={q}, {class:?}"),
    );
    let dark = ModelParams::defocusing(0.8, 1.0).map_err(err)?;
    let q = dark.q().map_err(err)?;
    let class = dark.classify_soliton().map_err(err)?;
    r.check(
        (q - 7.3571).abs() <= 1e-4 && class == SolitonClass::Dark,
        format!("a=0.8: q={q:.6}, {class:?}"),
    );
    Ok(())
}

fn mi_summary(config: &RunConfig) -> Result<chnls_lab::harness::MiSummary, String> {
    match run(config).map_err(err)?.manifest.summary {
        Summary::MiTest(s) => Ok(s),
        other => Err(format!("unexpected summary {other:?}")),
    }
}

fn modulational_instability(ctx: &mut Ctx, r: &mut Report) -> Result<(), String> {
    let started = Instant::now();
    let focusing = mi_summary(&ctx.preset("mi-demo", &[]))?;
    let oracle = 1.3856;
    let rel = (focusing.measured_rate - oracle).abs() / oracle;
    r.check(
        rel < 0.05,
        format!(
            "rate {:.4} vs {oracle} ({:.2}%)",
            focusing.measured_rate,
            100.0 * rel
        ),
    );
    let stable = mi_summary(&ctx.preset("mi-demo", &["sigma=-1", "t_end=50"]))?;
    r.check(
        stable.max_mode_change < 1e-6,
        format!("sigma=-1 mode change {:.2e}", stable.max_mode_change),
    );
    let secs = started.elapsed().as_secs_f64();
    r.check(secs < 60.0, format!("runtime {secs:.1} s"));
    Ok(())
}

fn integrator_order(ctx: &mut Ctx, r: &mut Report) -> Result<(), String> {
    let config = ctx.preset("fig1b", &[]);
    let conv = self_convergence(&config, &[0.04, 0.02, 0.01], 10.0).map_err(err)?;
    let order = conv.orders[0];
    r.check(
        order >= 3.8,
        format!(
            "order {order:.3} (differences {:.3e}, {:.3e})",
            conv.differences[0], conv.differences[1]
        ),
    );
    Ok(())
}

fn kdv_exactness(ctx: &mut Ctx, r: &mut Report) -> Result<(), String> {
    let outcome = run(&ctx.preset("kdv-benchmark", &[])).map_err(err)?;
    let Summary::KdvBenchmark(s) = outcome.manifest.summary else {
        return Err("unexpected summary".into());
    };
    r.check(
        s.worst_max_error < 1e-6,
        format!("max error {:.2e}", s.worst_max_error),
    );
    r.check(
        s.max_mass_drift < 1e-10,
        format!("mass drift {:.2e}", s.max_mass_drift),
    );
    Ok(())
}

fn single_summary(config: &RunConfig) -> Result<SingleSummary, String> {
    match run(config).map_err(err)?.manifest.summary {
        Summary::SingleSoliton(s) => Ok(s),
        other => Err(format!("unexpected summary {other:?}")),
    }
}

fn kinematics(ctx: &mut Ctx, r: &mut Report) -> Result<(), String> {
    let s = single_summary(&ctx.preset("fig1b", &["output.snapshots=false"]))?;
    let v = s.track.measured_velocity.ok_or("no speed measured")?;
    let rel = (v - 1.999).abs() / 1.999;
    r.check(rel < 0.01, format!("speed {v:.5} vs 1.999 ({:.3}%)", 100.0 * rel));
    r.check(s.track.lost_at.is_none(), "survives to t=100");
    let drift = s.peak_drift.ok_or("no peak drift")?;
    r.check(drift < 0.02, format!("peak drift {:.3}%", 100.0 * drift));
    Ok(())
}

fn error_scan(ctx: &mut Ctx, r: &mut Report) -> Result<(), String> {
    let outcome = run(&ctx.preset("errorscan-fig1a", &[])).map_err(err)?;
    let Summary::ErrorScan(s) = outcome.manifest.summary else {
        return Err("unexpected summary".into());
    };
    for f in &s.failures {
        r.check(false, format!("eps {} failed: {}", f.epsilon, f.message));
    }
    let error_at = |eps: f64| {
        s.rows
            .iter()
            .find(|row| row.epsilon == eps)
            .map(|row| row.l2_error)
    };
    let middle: Vec<f64> = [0.01, 0.02, 0.04, 0.08]
        .iter()
        .filter_map(|&e| error_at(e))
        .collect();
    let increasing = middle.len() == 4 && middle.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = middle.iter().map(|e| format!("{e:.3e}")).collect();
    r.check(
        increasing,
        format!("increasing on 0.01..0.08: [{}]", shown.join(", ")),
    );
    let tiny = error_at(0.001).ok_or("no row for eps=1e-3")?;
    r.check(
        tiny < 1e-6,
        format!("eps=1e-3 error {tiny:.3e} (< 1e-6 required)"),
    );
    let mut off = Vec::new();
    for row in &s.rows {
        let key = format!("errorscan.l2_error.{}", row.epsilon);
        let frozen = ctx.baselines.get_or_freeze(&key, row.l2_error);
        if ((row.l2_error - frozen) / frozen).abs() > BASELINE_TOLERANCE {
            off.push(format!(
                "eps {}: {:.4e} vs {:.4e}",
                row.epsilon, row.l2_error, frozen
            ));
        }
    }
    r.check(
        off.is_empty(),
        if off.is_empty() {
            format!("{} rows within 1% of baselines", s.rows.len())
        } else {
            format!("baseline mismatch: {}", off.join(", "))
        },
    );
    Ok(())
}

/// Phase samples on `X ∈ [−40, 40]`, `T ∈ [0, 0.1]` at Courant number one.
fn phase_lattice(s: &ReductionScales, hx: f64, beta: f64) -> Result<SpaceTimeSamples, String> {
    let nx = (80.0 / hx).round() as usize;
    let ht = hx / s.c.abs();
    let nt = (0.1 / ht).round() as usize + 1;
    SpaceTimeSamples::from_fn((-40.0, hx, nx), (0.0, ht, nt), |x, t| {
        soliton_phase(beta, 0.0, s, x, t)
    })
    .map_err(err)
}

fn reduction(ctx: &mut Ctx, r: &mut Report) -> Result<(), String> {
    let config = ctx.preset("fig1b", &["epsilon=0.01", "output.snapshots=false"]);
    let kdv_grid = GridSpec {
        half_length: 200.0,
        n_points: 8192,
    };
    let gap = reduction_gap(&config, kdv_grid, [-300.0, 300.0]).map_err(err)?;
    let k = ctx.baselines.get_or_freeze("reduction.k", gap.scaled_gap);
    let bound = k * gap.epsilon * gap.epsilon * (1.0 + BASELINE_TOLERANCE);
    r.check(
        gap.max_density_gap <= bound,
        format!(
            "density gap {:.3e} = {:.3e} eps^2 (K = {k:.3e})",
            gap.max_density_gap, gap.scaled_gap
        ),
    );

    let params = ModelParams::defocusing(0.5, 1.0).map_err(err)?;
    let residuals: Vec<f64> = [0.01, 0.02, 0.04]
        .iter()
        .map(|&eps| {
            let s =
                ReductionScales::new(&params, eps, Direction::Right, AnsatzForm::Consistent).map_err(err)?;
            boussinesq_residual(&phase_lattice(&s, 0.025, 0.1)?, &s, &params).map_err(err)
        })
        .collect::<Result<_, _>>()?;
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[1] / w[0]).collect();
    let ok = ratios.iter().all(|q| (q - 4.0).abs() <= 0.5);
    let shown: Vec<String> = ratios.iter().map(|q| format!("{q:.3}")).collect();
    r.check(ok, format!("Boussinesq residual ratios [{}]", shown.join(", ")));
    Ok(())
}

fn collision_summary(config: &RunConfig) -> Result<CollisionSummary, String> {
    match run(config).map_err(err)?.manifest.summary {
        Summary::Collision(s) => Ok(s),
        other => Err(format!("unexpected summary {other:?}")),
    }
}

fn collisions(ctx: &mut Ctx, r: &mut Report) -> Result<(), String> {
    for name in ["fig4a", "fig4b"] {
        let s = collision_summary(&ctx.preset(name, &["output.snapshots=false"]))?;
        let changes: Vec<Option<f64>> = s.solitons.iter().map(|c| c.relative_change).collect();
        let ok = changes.iter().all(|c| c.is_some_and(|c| c < 0.05));
        let shown: Vec<String> = changes
            .iter()
            .map(|c| {
                c.map(|c| format!("{:.2}%", 100.0 * c))
                    .unwrap_or_else(|| "none".into())
            })
            .collect();
        r.check(ok, format!("{name} post/pre change [{}]", shown.join(", ")));
    }
    let s = collision_summary(&ctx.preset("fig4e", &["output.snapshots=false"]))?;
    let speeds: Vec<f64> = s.solitons.iter().filter_map(|c| c.pre_speed).collect();
    if speeds.len() == 2 {
        let (a, b) = (speeds[0].abs(), speeds[1].abs());
        let diff = (a - b).abs() / a.max(b);
        r.check(
            diff > 0.2,
            format!(
                "fig4e speeds {:.3}, {:.3} ({:.1}% apart)",
                speeds[0],
                speeds[1],
                100.0 * diff
            ),
        );
    } else {
        r.check(false, "fig4e speeds not measured");
    }
    let persist = s
        .solitons
        .iter()
        .all(|c| c.post_deviation.is_some_and(|d| d.abs() > 0.0));
    let distinct = match (s.solitons[0].post_speed, s.solitons[1].post_speed) {
        (Some(a), Some(b)) => a * b < 0.0,
        _ => false,
    };
    r.check(
        persist && distinct,
        "fig4e both solitons persist after the collision",
    );
    Ok(())
}

fn large_epsilon(ctx: &mut Ctx, r: &mut Report) -> Result<(), String> {
    let split = single_summary(&ctx.preset("fig3b", &["t_end=50", "output.snapshots=false"]))?;
    let late: Vec<usize> = split
        .extrema_counts
        .iter()
        .filter(|(t, _)| *t >= 40.0)
        .map(|c| c.1)
        .collect();
    r.check(
        !late.is_empty() && late.iter().all(|&n| n >= 2),
        format!("fig3b extrema over t in [40, 50]: {late:?}"),
    );

    let config = ctx.preset("fig3a", &["t_end=50", "output.snapshots=false"]);
    let Experiment::SingleSoliton { soliton, .. } = &config.experiment else {
        return Err("fig3a is not a single soliton".into());
    };
    let amp = soliton.amplitude_parameter(&config.model).map_err(err)?;
    r.check(
        (amp.abs() - 0.025).abs() < 1e-12,
        format!("fig3a |eps beta q / C^2| = {}", amp.abs()),
    );
    let single = single_summary(&config)?;
    let max = single.extrema_counts.iter().map(|c| c.1).max().unwrap_or(0);
    let at_end = single.extrema_counts.last().map(|c| c.1).unwrap_or(0);
    r.check(
        max == 1 && at_end == 1 && single.track.lost_at.is_none(),
        format!("fig3a single hump (most extrema seen {max})"),
    );
    Ok(())
}

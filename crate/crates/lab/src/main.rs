use std::path::PathBuf;
use std::process::ExitCode;

use chnls_core::model::{ModelParams, Sigma, SolitonClass};
use chnls_core::soliton::{predicted_velocity, AnsatzForm, Direction, SolitonSpec};
use chnls_lab::config::ConfigError;
use chnls_lab::harness::HarnessError;
use chnls_lab::{presets, run, RunConfig, Summary};
use clap::{ArgMatches, CommandFactory, FromArgMatches, Parser, Subcommand};

const EXIT_USAGE: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

/// Pseudospectral CH-NLS experiments: solitons, collisions, error scans.
#[derive(Debug, Parser)]
#[command(name = "chnls", version)]
struct Cli {
    /// Directory for run outputs (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Time step (overrides the config).
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Number of grid points (overrides the config).
    #[arg(long, global = true, value_name = "N")]
    grid_n: Option<usize>,
    /// Only print the manifest path.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment from a config file or a preset.
    Run {
        /// JSON config file.
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Built-in preset (see list-presets).
        #[arg(long)]
        preset: Option<String>,
        /// Override a config value; KEY is a dotted path or a bare field name.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Print the effective config and exit.
        #[arg(long)]
        dump_config: bool,
    },
    /// Print analytic quantities for a parameter set.
    Info {
        #[arg(long)]
        a: f64,
        #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
        sigma: i32,
        #[arg(long, default_value_t = 1.0)]
        u0: f64,
        #[arg(long, requires = "beta")]
        epsilon: Option<f64>,
        #[arg(long, requires = "epsilon")]
        beta: Option<f64>,
    },
    /// List the built-in presets.
    ListPresets {
        /// One tab-separated line per preset.
        #[arg(long)]
        machine: bool,
    },
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let sub = matches.subcommand().map(|(_, m)| m);
    match &cli.command {
        Command::Run {
            config,
            preset,
            set,
            dump_config,
        } => {
            let overrides = ordered_overrides(&cli, set, sub);
            cmd_run(
                config.as_ref(),
                preset.as_deref(),
                &overrides,
                *dump_config,
                cli.quiet,
            )
        }
        Command::Info {
            a,
            sigma,
            u0,
            epsilon,
            beta,
        } => cmd_info(*a, *sigma, *u0, epsilon.zip(*beta)),
        Command::ListPresets { machine } => {
            cmd_list_presets(*machine);
            ExitCode::SUCCESS
        }
    }
}

/// `--set` values and the global shortcuts, in command-line order so that
/// the last flag wins.
fn ordered_overrides(cli: &Cli, set: &[String], sub: Option<&ArgMatches>) -> Vec<String> {
    let mut items: Vec<(usize, String)> = Vec::new();
    let index = |id: &str| sub.and_then(|m| m.index_of(id)).unwrap_or(0);
    if let Some(dt) = cli.dt {
        items.push((index("dt"), format!("dt={dt}")));
    }
    if let Some(n) = cli.grid_n {
        items.push((index("grid_n"), format!("grid.n_points={n}")));
    }
    if let Some(dir) = &cli.output_dir {
        let json = serde_json::to_string(&dir.to_string_lossy()).expect("string serializes");
        items.push((index("output_dir"), format!("output_dir={json}")));
    }
    let set_indices: Vec<usize> = sub
        .and_then(|m| m.indices_of("set"))
        .map(|i| i.collect())
        .unwrap_or_default();
    for (n, item) in set.iter().enumerate() {
        items.push((set_indices.get(n).copied().unwrap_or(usize::MAX), item.clone()));
    }
    items.sort_by_key(|(i, _)| *i);
    items.into_iter().map(|(_, s)| s).collect()
}

fn cmd_run(
    path: Option<&PathBuf>,
    preset: Option<&str>,
    overrides: &[String],
    dump: bool,
    quiet: bool,
) -> ExitCode {
    let base = match (path, preset) {
        (Some(p), _) => RunConfig::load(p),
        (None, Some(name)) => presets::find(name)
            .map(|p| p.config)
            .ok_or_else(|| ConfigError::Invalid {
                key: "preset".into(),
                message: format!("unknown preset `{name}` (see list-presets)"),
            }),
        (None, None) => unreachable!("clap requires a config or a preset"),
    };
    let config = match base.and_then(|c| c.with_overrides(overrides)) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    if let Err(e) = config.validate() {
        return config_failure(e);
    }
    if dump {
        println!("{}", config.to_json_pretty());
        return ExitCode::SUCCESS;
    }
    match run(&config) {
        Ok(outcome) => {
            if !quiet {
                print_summary(&outcome.manifest.summary);
            }
            println!("{}", outcome.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                HarnessError::Config(_) | HarnessError::Solver(_) => EXIT_USAGE,
                HarnessError::Diverged { .. } => EXIT_DIVERGED,
                HarnessError::Io { .. } => EXIT_IO,
            })
        }
    }
}

fn config_failure(e: ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(match e {
        ConfigError::Read { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    })
}

fn print_summary(summary: &Summary) {
    match summary {
        Summary::SingleSoliton(s) => {
            let t = &s.track;
            println!("predicted velocity  {}", num(t.predicted_velocity));
            if let Some(v) = t.measured_velocity {
                println!("measured velocity   {}", num(v));
            }
            if let Some(d) = s.peak_drift {
                println!("peak drift          {}", num(d));
            }
            if let Some(e) = s.l2_spacetime_error {
                println!("L2 error            {e:.6e}");
            }
        }
        Summary::ErrorScan(s) => {
            for r in &s.rows {
                println!("eps {:<8} L2 {:.6e}", r.epsilon, r.l2_error);
            }
            for f in &s.failures {
                println!("eps {:<8} failed: {}", f.epsilon, f.message);
            }
            if let Some(slope) = s.loglog_slope {
                println!("log-log slope {}", num(slope));
            }
        }
        Summary::Collision(s) => {
            for (i, c) in s.solitons.iter().enumerate() {
                let show = |v: Option<f64>| v.map(num).unwrap_or_else(|| "-".into());
                println!(
                    "soliton {}: pre {} post {} change {} speed {}/{}",
                    i + 1,
                    show(c.pre_deviation),
                    show(c.post_deviation),
                    show(c.relative_change),
                    show(c.pre_speed),
                    show(c.post_speed),
                );
            }
        }
        Summary::MiTest(s) => {
            println!(
                "growth rate {} (predicted {})",
                num(s.measured_rate),
                num(s.predicted_rate)
            );
            if let Some(d) = &s.diagnostic {
                println!("{d}");
            }
        }
        Summary::KdvBenchmark(s) => {
            println!(
                "max error {:.3e}, mass drift {:.3e}",
                s.final_max_error, s.max_mass_drift
            );
        }
        Summary::None => {}
    }
}

/// Up to six decimals, trailing zeros removed.
fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn cmd_info(a: f64, sigma: i32, u0: f64, soliton: Option<(f64, f64)>) -> ExitCode {
    let params = match Sigma::try_from(sigma)
        .map_err(|e| e.to_string())
        .and_then(|s| ModelParams::new(a, s, u0).map_err(|e| e.to_string()))
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let p = params.p();
    let class = params.classify_soliton();
    let q = params.q().ok();
    let class_text = match class {
        Ok(SolitonClass::Degenerate) if q.is_none() => {
            "Degenerate (p = 2: q is singular, no small-amplitude soliton)".to_string()
        }
        Ok(SolitonClass::Degenerate) => "Degenerate (p = 1/2: q = 0, zero amplitude)".to_string(),
        Ok(c) => format!("{c:?}"),
        Err(_) => "none (dark/antidark solitons need sigma = -1)".to_string(),
    };
    let q_text = q.map(num).unwrap_or_else(|| "undefined".into());
    println!("p={}, q={}, class={}", num(p), q_text, class_text);
    println!("C = {}", num(params.sound_speed()));
    match params.mi_band() {
        Some((lo, hi)) => println!("MI band: {} < k < {}", num(lo), num(hi)),
        None => println!("MI band: none (modulationally stable)"),
    }
    if let Some((epsilon, beta)) = soliton {
        if params.sigma == Sigma::Focusing {
            println!("no dark/antidark soliton for the focusing equation");
        } else if q.is_some() {
            let spec = SolitonSpec::new(epsilon, beta, 0.0, Direction::Right);
            let half_phase = spec.with_form(AnsatzForm::HalfPhase);
            if let Ok(amp) = spec.amplitude_parameter(&params) {
                println!("amplitude eps*beta*q/C^2 = {}", num(amp));
            }
            println!("predicted velocity = {}", num(predicted_velocity(&spec, &params)));
            println!(
                "predicted velocity (half-phase form) = {}",
                num(predicted_velocity(&half_phase, &params))
            );
        }
    }
    ExitCode::SUCCESS
}

fn cmd_list_presets(machine: bool) {
    let all = presets::all();
    if machine {
        for p in &all {
            println!("{}\t{}\t{}", p.name, p.figure, p.description);
        }
        return;
    }
    let width = all.iter().map(|p| p.name.len()).max().unwrap_or(0);
    let fig_width = all.iter().map(|p| p.figure.len()).max().unwrap_or(0);
    for p in &all {
        println!("{:<width$}  {:<fig_width$}  {}", p.name, p.figure, p.description);
    }
}

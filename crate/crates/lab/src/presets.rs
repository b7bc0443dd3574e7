//! Built-in run configurations, one per reproduced figure panel.

use std::path::PathBuf;

use chnls_core::model::{ModelParams, Sigma};
use chnls_core::soliton::{BackgroundEnvelope, Direction, SolitonSpec};

use crate::config::{Experiment, GridSpec, OutputOptions, RunConfig};
use crate::measure::Window;

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub figure: &'static str,
    pub description: &'static str,
    pub config: RunConfig,
}

const BETA: f64 = 0.1;

fn base(name: &str, a: f64, experiment: Experiment) -> RunConfig {
    RunConfig {
        grid: GridSpec {
            half_length: 2500.0,
            n_points: 1 << 14,
        },
        model: ModelParams {
            a,
            sigma: Sigma::Defocusing,
            u0: 1.0,
        },
        dt: 0.01,
        t_end: 100.0,
        cadence: 1.0,
        envelope: Some(BackgroundEnvelope::default()),
        dealias: true,
        experiment,
        output_dir: PathBuf::from("runs").join(name),
        output: OutputOptions {
            snapshots: true,
            snapshot_window: Some([-400.0, 400.0]),
        },
    }
}

/// Soliton starting at `x = −100`, as in the single-soliton figures.
fn single(name: &str, a: f64, epsilon: f64) -> RunConfig {
    let soliton = SolitonSpec::new(epsilon, BETA, 100.0, Direction::Right);
    base(
        name,
        a,
        Experiment::SingleSoliton {
            soliton,
            error_window: [-300.0, 300.0],
        },
    )
}

/// Right-going soliton at `x = −start_right`, left-going one at `x = start_left`.
fn collision(
    name: &str,
    a: f64,
    a_eff: [f64; 2],
    epsilon: f64,
    positions: [f64; 2],
    boost: Option<f64>,
) -> RunConfig {
    let right = SolitonSpec::new(epsilon, BETA, -positions[0], Direction::Right).with_a_eff(a_eff[0]);
    let left = SolitonSpec::new(epsilon, BETA, -positions[1], Direction::Left).with_a_eff(a_eff[1]);
    let mut config = base(
        name,
        a,
        Experiment::Collision {
            solitons: [right, left],
            boost,
        },
    );
    config.t_end = COLLISION_T_END;
    config
}

pub fn all() -> Vec<Preset> {
    let mut errorscan = base(
        "errorscan-fig1a",
        0.5,
        Experiment::ErrorScan {
            soliton: SolitonSpec::new(0.04, BETA, 100.0, Direction::Right),
            epsilons: vec![0.001, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 1.0],
            window: Window::default(),
        },
    );
    errorscan.output.snapshots = false;

    let mut mi = base(
        "mi-demo",
        0.5,
        Experiment::MiTest {
            k: 1.0,
            amplitude: 1e-8,
        },
    );
    mi.model.sigma = Sigma::Focusing;
    mi.grid = GridSpec {
        half_length: 8.0 * std::f64::consts::PI,
        n_points: 128,
    };
    mi.envelope = None;
    mi.t_end = 15.0;
    mi.cadence = 0.1;
    mi.output.snapshot_window = None;

    let mut kdv = base(
        "kdv-benchmark",
        0.5,
        Experiment::KdvBenchmark {
            beta: BETA,
            chi0: 0.0,
        },
    );
    kdv.grid = GridSpec {
        half_length: 200.0,
        n_points: 1024,
    };
    kdv.envelope = None;
    kdv.t_end = 50.0;
    kdv.output.snapshot_window = None;

    let mut fig4e = collision("fig4e", 0.62, [0.62, 0.62], 0.1, [-250.0, 290.0], Some(-0.7));
    fig4e.t_end = FIG4E_T_END;

    vec![
        Preset {
            name: "fig1b",
            figure: "Fig. 1(b)",
            description: "antidark soliton, a=0.5, eps=0.04",
            config: single("fig1b", 0.5, 0.04),
        },
        Preset {
            name: "fig2",
            figure: "Fig. 2",
            description: "dark soliton, a=0.8, eps=0.04",
            config: single("fig2", 0.8, 0.04),
        },
        Preset {
            name: "fig3a",
            figure: "Fig. 3(a)",
            description: "antidark soliton at large amplitude, a=0.5, eps=1",
            config: single("fig3a", 0.5, 1.0),
        },
        Preset {
            name: "fig3b",
            figure: "Fig. 3(b)",
            description: "dark soliton at large amplitude, a=0.8, eps=1",
            config: single("fig3b", 0.8, 1.0),
        },
        Preset {
            name: "fig4a",
            figure: "Fig. 4(a)",
            description: "dark-dark head-on collision, a=0.75, eps=0.1",
            config: collision("fig4a", 0.75, [0.75, 0.75], 0.1, [-200.0, 200.0], None),
        },
        Preset {
            name: "fig4b",
            figure: "Fig. 4(b)",
            description: "antidark-antidark head-on collision, a=0.65, eps=0.1",
            config: collision("fig4b", 0.65, [0.65, 0.65], 0.1, [-200.0, 200.0], None),
        },
        Preset {
            name: "fig4c",
            figure: "Fig. 4(c)",
            description: "antidark-antidark collision, a=0.62, eps=1",
            config: collision("fig4c", 0.62, [0.62, 0.62], 1.0, [-200.0, 200.0], None),
        },
        Preset {
            name: "fig4d",
            figure: "Fig. 4(d)",
            description: "antidark (a1=0.67) meets dark (a2=0.75), a=0.75, eps=0.1",
            config: collision("fig4d", 0.75, [0.67, 0.75], 0.1, [-200.0, 200.0], None),
        },
        Preset {
            name: "fig4e",
            figure: "Fig. 4(e)",
            description: "boosted collision with unequal speeds, a=0.62, eps=0.1, nu=-0.7",
            config: fig4e,
        },
        Preset {
            name: "errorscan-fig1a",
            figure: "Fig. 1(a)",
            description: "space-time L2 error against eps, a=0.5",
            config: errorscan,
        },
        Preset {
            name: "mi-demo",
            figure: "MI growth rate",
            description: "focusing cw background, seeded mode k=1, a=0.5",
            config: mi,
        },
        Preset {
            name: "kdv-benchmark",
            figure: "KdV soliton",
            description: "KdV soliton transport, beta=0.1, L=200",
            config: kdv,
        },
    ]
}

/// The pairs at ±200 meet near t = 100; twice that leaves a clean
/// post-collision window.
const COLLISION_T_END: f64 = 200.0;

/// The boosted pair meets near t = 170.
const FIG4E_T_END: f64 = 300.0;

pub fn find(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}

use std::sync::Arc;

use chnls_core::etd::{advance, EtdCoefficients};
use chnls_core::model::{ChnlsNonlinearity, ModelParams};
use chnls_core::soliton::{single_soliton_ic, BackgroundEnvelope, Direction, SolitonSpec};
use chnls_core::{Complex64, Grid};

/// Value at the node mirrored through `x = 0`: node `j` maps to `N − j`.
fn mirrored(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    (0..n).map(|j| values[(n - j) % n]).collect()
}

#[test]
fn left_going_soliton_is_the_mirror_image() {
    let grid = Arc::new(Grid::new(400.0, 4096).unwrap());
    let params = ModelParams::defocusing(0.5, 1.0).unwrap();
    let env = BackgroundEnvelope {
        l_star: 300.0,
        gamma: 34,
    };
    let right = SolitonSpec::new(0.04, 0.1, 50.0, Direction::Right);
    let left = SolitonSpec::new(0.04, 0.1, -50.0, Direction::Left);
    let r0 = single_soliton_ic(&right, &params, Arc::clone(&grid), &env).unwrap();
    let l0 = single_soliton_ic(&left, &params, Arc::clone(&grid), &env).unwrap();

    let max_diff =
        |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(max_diff(&mirrored(r0.field.values()), l0.field.values()) < 1e-12);

    let coeffs = Arc::new(EtdCoefficients::new(&params.linear_symbols(&grid), 0.01).unwrap());
    let mut nl = ChnlsNonlinearity::new(Arc::clone(&grid), &params, true);
    let r1 = advance(&r0, 1000, Arc::clone(&coeffs), &mut nl).unwrap();
    let l1 = advance(&l0, 1000, coeffs, &mut nl).unwrap();
    let diff = max_diff(&mirrored(r1.field.values()), l1.field.values());
    assert!(diff < 1e-8, "mirror mismatch {diff:e}");
}

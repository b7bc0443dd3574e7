use std::sync::Arc;

use chnls_core::{Complex64, Field, Grid};
use proptest::prelude::*;

const N: usize = 64;

fn grid() -> Arc<Grid> {
    Arc::new(Grid::new(10.0, N).unwrap())
}

/// Band-limited field from a few Fourier coefficients, so derivatives are
/// exact up to roundoff.
fn field(coeffs: &[(f64, f64)]) -> Field {
    let g = grid();
    let mut spectrum = vec![Complex64::default(); N];
    for (m, &(re, im)) in coeffs.iter().enumerate() {
        spectrum[m] = Complex64::new(re, im) * N as f64;
        if m > 0 {
            spectrum[N - m] = Complex64::new(im, -re) * N as f64;
        }
    }
    Field::from_spectrum(g, spectrum).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..12)
}

fn norm2(f: &Field) -> f64 {
    f.inner(f).unwrap().re
}

proptest! {
    #[test]
    fn derivative_is_linear(a in coeffs(), b in coeffs(), s in -3.0..3.0f64, order in 1u32..4) {
        let (fa, fb) = (field(&a), field(&b));
        let combo = Field::from_fn(grid(), |_| Complex64::default());
        let mut combo = combo;
        for (c, (x, y)) in combo.values_mut().iter_mut().zip(fa.values().iter().zip(fb.values())) {
            *c = x * s + y;
        }
        let lhs = combo.derivative(order);
        let (da, db) = (fa.derivative(order), fb.derivative(order));
        let scale = 1.0 + da.values().iter().chain(db.values()).map(|v| v.norm()).fold(0.0, f64::max);
        for ((l, x), y) in lhs.values().iter().zip(da.values()).zip(db.values()) {
            prop_assert!((l - (x * s + y)).norm() < 1e-10 * scale * (1.0 + s.abs()));
        }
    }

    #[test]
    fn helmholtz_is_positive(c in coeffs(), a in 0.0..2.0f64) {
        let f = field(&c);
        let applied = f.helmholtz_apply(a);
        let quadratic = f.inner(&applied).unwrap();
        prop_assert!(quadratic.re >= norm2(&f) * (1.0 - 1e-12));
        prop_assert!(quadratic.im.abs() < 1e-9 * quadratic.re.max(1.0));
    }

    #[test]
    fn helmholtz_round_trip(c in coeffs(), a in 0.0..2.0f64) {
        let f = field(&c);
        let back = f.helmholtz_apply(a).helmholtz_invert(a);
        prop_assert!(back.max_abs_diff(&f).unwrap() < 1e-11);
    }

    #[test]
    fn parseval(c in coeffs()) {
        let f = field(&c);
        let spectral: f64 = f.spectrum().iter().map(|v| v.norm_sqr()).sum::<f64>() / N as f64;
        let physical: f64 = f.values().iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((spectral - physical).abs() < 1e-10 * physical.max(1.0));
        prop_assert!((f.energy() - physical * f.grid().dx()).abs() < 1e-10 * physical.max(1.0));
    }
}

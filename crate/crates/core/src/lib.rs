//! Pseudospectral solver and asymptotic soliton toolkit for the defocusing
//! Camassa-Holm nonlinear Schrödinger (CH-NLS) equation on a periodic domain.

pub mod error;
pub mod etd;
pub mod grid;
pub mod kdv;
pub mod model;
pub mod soliton;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use num_complex::Complex64;

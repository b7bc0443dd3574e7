use thiserror::Error;

/// Errors raised by the solver core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {found} samples but the grid has {expected} points")]
    LengthMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(&'static str),

    /// `p = a^2 C^2 = 2` makes the soliton amplitude parameter singular.
    #[error("singular parameter: p = a^2 C^2 = {p} (q is undefined at p = 2)")]
    SingularParameter { p: f64 },

    #[error("non-finite values produced at t = {time}")]
    Divergence { time: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;

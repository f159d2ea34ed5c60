use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("ensemble must contain at least one oscillator")]
    Empty,

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("capacity matrix is not symmetric at ({i}, {j}): {a_ij} != {a_ji}")]
    AsymmetricCapacity { i: usize, j: usize, a_ij: f64, a_ji: f64 },

    #[error("operation requires the {required} model variant")]
    WrongVariant { required: &'static str },

    #[error("integration produced a non-finite state at step {step} (t = {time})")]
    Diverged { step: usize, time: f64 },

    #[error("insufficient margin: {0}")]
    InsufficientMargin(String),

    #[error("exact W2 needs equal atom counts no larger than {cap} (got {left} and {right}); enable the sliced estimator")]
    ExactW2Unavailable { cap: usize, left: usize, right: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

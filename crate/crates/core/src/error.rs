use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("arity {n} out of range {min}..={max}")]
    Arity { n: u32, min: u32, max: u32 },

    #[error("arity mismatch: {left} vs {right} variables")]
    ArityMismatch { left: u32, right: u32 },

    #[error("invalid truth table: {0}")]
    Table(String),

    #[error("function index out of range for {n} variables")]
    IndexOutOfRange { n: u32 },

    #[error("{what} is limited to n <= {max} (got n = {n}); {hint}")]
    TooLarge {
        what: &'static str,
        n: u32,
        max: u32,
        hint: &'static str,
    },

    #[error("order {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("could not reach rank {wanted} after {draws} draws (reached {reached})")]
    RankNotReached {
        wanted: usize,
        reached: usize,
        draws: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("model file {path}: {msg}")]
    Model { path: PathBuf, msg: String },

    #[error("target check failed for record {index}: stored {stored:?}, recomputed {expected:?}")]
    TargetMismatch {
        index: usize,
        stored: Vec<i64>,
        expected: Vec<i64>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

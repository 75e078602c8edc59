use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the dispersion and wavefield-processing toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("compliance matrix is singular or not positive definite: {0}")]
    SingularCompliance(String),

    #[error("invalid laminate: {0}")]
    InvalidLaminate(String),

    #[error("Christoffel eigen-solve failed at f = {f_hz} Hz, k = {k_radpm} rad/m: {reason}")]
    EigenSolve {
        f_hz: f64,
        k_radpm: f64,
        reason: String,
    },

    #[error("empty excitation comb: no frequency fits in [{f_min}, {f_max}] Hz")]
    EmptyComb { f_min: f64, f_max: f64 },

    #[error("excitation run index {index} out of range (spec has {n_runs} runs)")]
    RunIndex { index: usize, n_runs: usize },

    #[error("tone at {f_hz} Hz lies outside the support of every branch")]
    BandCoverage { f_hz: f64 },

    #[error("invalid wavefield: {0}")]
    InvalidWavefield(String),

    #[error("{grid} grid value {value} violates the Nyquist limit {limit}")]
    Nyquist {
        grid: &'static str,
        value: f64,
        limit: f64,
    },

    #[error("mode {mode} has {got} points, at least {need} are required for fitting")]
    InsufficientPoints {
        mode: String,
        got: usize,
        need: usize,
    },

    #[error("no overlap between reference and test supports for mode {0}")]
    EmptyOverlap(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error in {source_name} at {location}: {message}")]
    Parse {
        source_name: String,
        location: String,
        message: String,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

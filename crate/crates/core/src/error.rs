use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step index must be at least 1")]
    ZeroStep,

    #[error("estimate requested before any sample was processed")]
    NoSamples,

    #[error("density is not log-concave (max second difference {max_second_difference:e})")]
    NotLogConcave { max_second_difference: f64 },

    #[error("posterior mass vanished on the grid; the message sequence drove it off [{lo}, {hi}]")]
    GridExhausted { lo: f64, hi: f64 },

    #[error("threshold {tau} leaves one-sided mass {mass:e} below the split tolerance")]
    DegenerateSplit { tau: f64, mass: f64 },

    #[error("bisection bracket [{lo}, {hi}] does not change sign")]
    BracketFailure { lo: f64, hi: f64 },

    #[error(
        "prior Fisher information is undefined: the prior density does not vanish at the \
         endpoints of its support, which the van Trees bound requires ({family})"
    )]
    UndefinedPriorInformation { family: String },

    #[error("intervals must be sorted, disjoint and non-empty: {0}")]
    BadIntervals(String),

    #[error("config line {line}: key `{key}`: {reason}")]
    Config { line: usize, key: String, reason: String },

    #[error("trial {index} failed: {source}")]
    Trial {
        index: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed CSV at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

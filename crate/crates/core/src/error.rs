use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("argument {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("resonance: forcing frequency {omega} rad/s makes (omega^2 I + H^2) singular (condition estimate {condition:.3e})")]
    Resonance { omega: f64, condition: f64 },

    #[error("state diverged (non-finite) at step {step}")]
    Divergence { step: usize },

    #[error("no crack: zero flexibility, merge the interface nodes instead")]
    NoCrack,

    #[error("no reflection detected: {0}")]
    NoReflection(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

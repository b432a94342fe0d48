use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("malformed {kind} data: {detail}")]
    Format { kind: &'static str, detail: String },
    #[error("unsupported {kind}: {detail}")]
    Unsupported { kind: &'static str, detail: String },
    #[error("corrupt tensor payload: {0}")]
    Corruption(String),
    #[error("signal too short: {len} samples, need at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("T60 of {t60} s is not achievable in a room of volume {volume:.3} m^3 (absorption {alpha:.3} >= 1)")]
    InfeasibleT60 { t60: f64, volume: f64, alpha: f64 },
    #[error("signal has zero power: {0}")]
    ZeroPower(&'static str),
    #[error("noise too short: {noise} samples for a {needed}-sample mixture")]
    NoiseLength { noise: usize, needed: usize },
    #[error("could not place {what} after {attempts} attempts")]
    Placement { what: &'static str, attempts: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

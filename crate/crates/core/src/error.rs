use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bad shape: {0}")]
    BadShape(String),

    #[error("row {row} has norm below 1e-12")]
    ZeroRow { row: usize },

    #[error("row {row} is not a unit vector (norm {norm})")]
    NotUnit { row: usize, norm: f64 },

    #[error("matrix is not orthogonal (max |QᵀQ - I| = {0:e})")]
    NotOrthogonal(f64),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("tail {tail} is not supported by method {method}")]
    BadTail { method: String, tail: String },

    #[error("calibration unavailable: {0}")]
    CalibrationUnavailable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parameter outside the modeled regime: {0}")]
    InRegime(String),

    #[error("overflow: {0}")]
    Overflow(String),

    #[error("parse error at line {line}, field `{field}`: {msg}")]
    Parse {
        line: usize,
        field: String,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

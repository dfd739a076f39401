use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("query (x={x}, y={y}) lies outside the field domain")]
    OutOfDomain { x: f64, y: i64 },

    #[error("invalid height field: {0}")]
    InvalidField(String),

    #[error("profile is not admissible: {0}")]
    NotAdmissible(String),

    #[error("profile does not fit the torus: {0}")]
    TorusMismatch(String),

    #[error("creation horizon {horizon} is shorter than the requested end time {t_end}")]
    HorizonTooShort { horizon: f64, t_end: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature did not converge on [{a}, {b}] (error estimate {err:e})")]
    Quadrature { a: f64, b: f64, err: f64 },

    #[error("config validation failed:\n{}", .0.join("\n"))]
    Config(Vec<String>),

    #[error("replica {replica}: {source}")]
    Replica {
        replica: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

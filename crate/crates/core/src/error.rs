use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("insufficient samples: need {needed}, have {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("keystream request of {requested_blocks} blocks from counter {counter_base:#010x} exhausts the 32-bit counter space")]
    CounterExhausted {
        counter_base: u32,
        requested_blocks: u64,
    },

    #[error("tag capacity mismatch: map holds {capacity_bits} bits, payload has {payload_bits}")]
    CapacityMismatch {
        capacity_bits: usize,
        payload_bits: usize,
    },

    #[error("missing key material: {0}")]
    MissingKey(&'static str),

    #[error("measurement unavailable: {0}")]
    MeasurementUnavailable(String),

    #[error("position ({x:.1}, {y:.1}) lies outside the topology extent")]
    OutsideExtent { x: f64, y: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

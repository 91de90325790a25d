use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate signal: max equals min ({0})")]
    DegenerateSignal(f64),

    #[error("signal length {len} is not divisible by window length {lambda}")]
    NonDivisibleLength { len: usize, lambda: usize },

    #[error("SNR undefined: reference window is all zeros")]
    UndefinedReference,

    #[error("unknown wavelet code {0}")]
    UnknownWavelet(usize),

    #[error("invalid decomposition level {level} (max {max} for this length/filter)")]
    InvalidLevel { level: usize, max: usize },

    #[error("cutoff {cutoff_hz} Hz violates Nyquist limit {nyquist_hz} Hz")]
    NyquistViolation { cutoff_hz: f64, nyquist_hz: f64 },

    #[error("elliptic design infeasible: {0}")]
    DesignInfeasible(String),

    #[error("invalid selectivity {0}: must be > 1")]
    InvalidSelectivity(f64),

    #[error("every window was rejected; dataset is empty")]
    EmptyDataset,

    #[error("insufficient data: need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("training labels contain a single class")]
    DegenerateLabels,

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    Metadata { path: PathBuf, msg: String },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("label verification failed for {0} window(s)")]
    LabelVerification(usize),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    /// Tags the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

use thiserror::Error;

pub type Result<T> = std::result::Result<T, WinError>;

#[derive(Debug, Error)]
pub enum WinError {
    /// Invalid subject or dataset contents.
    #[error("validation error: {0}")]
    Validation(String),

    /// Invalid analysis or scenario configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("censoring quantile undefined in {group} group: estimated censoring survival never falls to {alpha_q}")]
    QuantileUndefined { group: String, alpha_q: f64 },

    #[error("common censoring cannot be induced for subject {subject}: censoring time missing for endpoint {endpoint}")]
    CensoringUnavailable { subject: String, endpoint: usize },

    #[error("degenerate censoring weight {weight:e} for term {term} (weighted {group} subject {subject}, paired with subject {partner})")]
    DegenerateWeight {
        term: usize,
        group: String,
        subject: usize,
        partner: usize,
        weight: f64,
    },

    #[error("win ratio undefined: estimated control win probability is zero")]
    UndefinedRatio,

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("nonpositive variance {value:e} for {statistic}")]
    NonPositiveVariance { statistic: String, value: f64 },

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl WinError {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        WinError::Validation(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        WinError::Config(msg.into())
    }
}

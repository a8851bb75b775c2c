use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("rule number {value} out of range for {state_count}-state rules (must be < {bound})")]
    RuleOutOfRange {
        value: u64,
        state_count: usize,
        bound: u64,
    },

    #[error("rule space for k={state_count} does not fit in 64 bits")]
    Capacity { state_count: usize },

    #[error("invalid rule: {0}")]
    InvalidRule(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("series of length {len} is too short (need at least {needed})")]
    TooShort { len: usize, needed: usize },

    #[error("series has zero variance; skewness and kurtosis are undefined")]
    ZeroVariance,

    #[error("elementary CA rule {0} out of range 0..=255")]
    EcaRuleOutOfRange(u32),

    #[error("cannot parse {what}: {input:?}")]
    Parse { what: &'static str, input: String },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: no valid rows")]
    NoValidRows { path: PathBuf },

    #[error("{path}:{line}: non-numeric value {text:?}")]
    NonNumeric {
        path: PathBuf,
        line: usize,
        text: String,
    },
}

impl LabError {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        LabError::Precondition(msg.into())
    }

    /// Stable machine-readable kind, used in CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::RuleOutOfRange { .. } => "rule_out_of_range",
            LabError::Capacity { .. } => "capacity",
            LabError::InvalidRule(_) => "invalid_rule",
            LabError::Precondition(_) => "precondition",
            LabError::TooShort { .. } => "too_short",
            LabError::ZeroVariance => "zero_variance",
            LabError::EcaRuleOutOfRange(_) => "eca_rule_out_of_range",
            LabError::Parse { .. } => "parse",
            LabError::Io { .. } => "io",
            LabError::NoValidRows { .. } => "no_valid_rows",
            LabError::NonNumeric { .. } => "non_numeric",
        }
    }

    /// Process exit code. 2 is reserved for usage errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Io { .. } => 3,
            LabError::NoValidRows { .. } => 4,
            LabError::NonNumeric { .. } => 5,
            LabError::Parse { .. } => 6,
            LabError::RuleOutOfRange { .. }
            | LabError::Capacity { .. }
            | LabError::InvalidRule(_)
            | LabError::EcaRuleOutOfRange(_) => 7,
            LabError::Precondition(_) | LabError::TooShort { .. } | LabError::ZeroVariance => 8,
        }
    }
}

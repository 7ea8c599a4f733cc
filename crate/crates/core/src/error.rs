use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShmError {
    #[error("value {value} is outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("invalid level set: {0}")]
    InvalidLevels(String),

    #[error("invalid harmonic specification: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected} samples, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("sample {index} (value {value}) is not within half a level gap of any admissible level")]
    Extraction { index: usize, value: f64 },

    #[error("staircase property violated between levels {index} and {}", index + 1)]
    Staircase { index: usize },

    #[error("exhaustive search over {assignments} assignments exceeds the budget of {budget}")]
    Budget { assignments: u128, budget: u128 },
}

pub type Result<T> = std::result::Result<T, ShmError>;

use thiserror::Error;

/// A configuration field failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid config field `{field}`: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// Argument outside the domain of a model function.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{what} = {value} outside domain [{lo}, {hi}]")]
pub struct DomainError {
    pub what: &'static str,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Errors raised by the PHY transforms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("correlated pilot signal has zero norm; cannot normalize the downlink response")]
    DegenerateObservation,
}

/// Errors while reading a cached resolution table.
#[derive(Debug, Error)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("table is incomplete: {0}")]
    Incomplete(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its allowed range or violates a cross-field constraint.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    /// The requested grid would exceed the configured memory budget.
    #[error("resource limit: {message}")]
    Resource { message: String },

    /// A model was evaluated outside its domain.
    #[error("domain error in {quantity}: {message}")]
    Domain { quantity: String, message: String },

    /// An intermediate term of a formula became non-finite or negative under a root.
    #[error("non-finite term `{term}` (value {value})")]
    NonFinite { term: String, value: f64 },

    /// Arrays or axes that must agree do not.
    #[error("axis mismatch: {0}")]
    AxisMismatch(String),

    /// Operation cannot be performed on the supplied combination of inputs.
    #[error("incompatible inputs: {0}")]
    Incompatible(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn domain(quantity: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Domain {
            quantity: quantity.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

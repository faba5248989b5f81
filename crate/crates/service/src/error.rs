use serde::{Deserialize, Serialize};

/// Failure of a request, command or job.
#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Engine(#[from] percept_core::Error),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Capacity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Internal(String),
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

/// Machine-readable error, as printed by the CLI and returned by the service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ServiceError {
    pub fn body(&self) -> ErrorBody {
        use percept_core::Error as E;
        let (kind, field) = match self {
            ServiceError::Schema(_) => ("schema", None),
            ServiceError::Engine(e) => match e {
                E::Validation { field, .. } => ("validation", Some(field.clone())),
                E::Resource { .. } => ("resource", None),
                E::Domain { quantity, .. } => ("domain", Some(quantity.clone())),
                E::NonFinite { .. } => ("numerical", None),
                E::Incompatible(_) => ("incompatible", None),
                E::AxisMismatch(_) => ("internal", None),
            },
            ServiceError::NotFound(_) => ("not_found", None),
            ServiceError::Conflict(_) => ("conflict", None),
            ServiceError::Capacity(_) => ("capacity", None),
            ServiceError::Io(_) => ("io", None),
            ServiceError::Internal(_) => ("internal", None),
        };
        let message = match self {
            ServiceError::Engine(E::Validation { message, .. }) => message.clone(),
            other => other.to_string(),
        };
        ErrorBody {
            kind: kind.into(),
            message,
            field,
        }
    }

    /// Process exit code of the CLI.
    pub fn exit_code(&self) -> i32 {
        use percept_core::Error as E;
        match self {
            ServiceError::Schema(_) => 2,
            ServiceError::Engine(E::Resource { .. }) => 4,
            ServiceError::Engine(E::AxisMismatch(_)) => 1,
            ServiceError::Engine(_) => 3,
            _ => 1,
        }
    }

    pub fn http_status(&self) -> u16 {
        use percept_core::Error as E;
        match self {
            ServiceError::Schema(_) => 400,
            ServiceError::NotFound(_) => 404,
            ServiceError::Conflict(_) => 409,
            ServiceError::Engine(E::AxisMismatch(_)) => 500,
            ServiceError::Engine(_) => 422,
            ServiceError::Capacity(_) => 503,
            ServiceError::Io(_) | ServiceError::Internal(_) => 500,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_kind() {
        let schema = ServiceError::Schema("bad".into());
        assert_eq!((schema.exit_code(), schema.http_status()), (2, 400));
        let v = ServiceError::from(percept_core::Error::validation("display.dpi", "must be positive"));
        assert_eq!((v.exit_code(), v.http_status()), (3, 422));
        assert_eq!(v.body().field.as_deref(), Some("display.dpi"));
        assert_eq!(v.body().message, "must be positive");
        let r = ServiceError::from(percept_core::Error::Resource { message: "big".into() });
        assert_eq!(r.exit_code(), 4);
        assert_eq!(ServiceError::Capacity("full".into()).http_status(), 503);
    }
}

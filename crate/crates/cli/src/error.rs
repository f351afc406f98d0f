use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario field `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] lipdiff_core::Error),
    #[error("could not serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

/// The error object printed on exit code 1.
#[derive(Debug, Serialize)]
pub struct ErrorObject {
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl CliError {
    pub fn to_object(&self) -> ErrorObject {
        let (kind, line, column, field) = match self {
            CliError::Parse { line, column, .. } => ("parse-error".to_string(), Some(*line), Some(*column), None),
            CliError::Validation { field, .. } => ("validation-error".to_string(), None, None, Some(field.clone())),
            CliError::Io { .. } => ("io-error".to_string(), None, None, None),
            CliError::Core(e) => (e.kind().to_string(), None, None, None),
            CliError::Json(_) => ("serialization-error".to_string(), None, None, None),
        };
        ErrorObject { kind, message: self.to_string(), line, column, field }
    }
}

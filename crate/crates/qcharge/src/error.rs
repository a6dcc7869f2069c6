use std::path::PathBuf;

use serde::Serialize;

/// Runner failures. Each one serializes to a single JSON object on stderr.
#[derive(Debug, thiserror::Error, Serialize)]
#[serde(tag = "error", rename_all = "kebab-case")]
pub enum RunError {
    #[error("config is not valid JSON: {message}")]
    Parse { message: String },
    #[error("missing required fields: {}", fields.join(", "))]
    MissingFields { fields: Vec<String> },
    #[error("unknown experiment kind {value:?}")]
    UnknownExperiment { value: String, known: Vec<&'static str> },
    #[error("invalid value at {field}: {message}")]
    InvalidField { field: String, message: String },
    #[error("bad override {arg:?}: {message}")]
    Override { arg: String, message: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{context}: {message}")]
    Model { context: String, message: String },
    #[error("malformed artifact {path}: {message}")]
    Artifact { path: PathBuf, message: String },
}

impl RunError {
    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        RunError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn field(field: impl Into<String>, message: impl std::fmt::Display) -> Self {
        RunError::InvalidField {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn model(context: impl Into<String>, err: impl std::fmt::Display) -> Self {
        RunError::Model {
            context: context.into(),
            message: err.to_string(),
        }
    }

    pub fn artifact(path: impl Into<PathBuf>, message: impl std::fmt::Display) -> Self {
        RunError::Artifact {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// `{"error": kind, ..., "message": display}` as one line.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).unwrap_or_default();
        if let Some(map) = v.as_object_mut() {
            map.insert("message".into(), self.to_string().into());
        }
        v.to_string()
    }
}

pub type Result<T> = std::result::Result<T, RunError>;

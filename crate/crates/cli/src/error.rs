//! Typed errors of the configuration and artifact layer.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Malformed config line.
    ParseError { line: usize, message: String },
    /// A key not known to its section (strict mode).
    UnknownKey { line: usize, key: String },
    /// A required key is absent.
    MissingRequired(&'static str),
    /// A CSV artifact does not match the schema of the requested plot kind.
    SchemaMismatch { expected: &'static str, found: String },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::ParseError { line, message } => {
                write!(f, "config parse error at line {line}: {message}")
            }
            CliError::UnknownKey { line, key } => {
                write!(f, "unknown key `{key}` at line {line}")
            }
            CliError::MissingRequired(key) => write!(f, "missing required key `{key}`"),
            CliError::SchemaMismatch { expected, found } => {
                write!(f, "artifact schema mismatch: expected {expected}, found {found}")
            }
        }
    }
}

impl std::error::Error for CliError {}

use std::fmt;
use std::path::PathBuf;

use crate::profile::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing input: {file}")]
    MissingInput { file: String },

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row that could not be parsed or whose value breaks a field rule.
    #[error("{file}:{line}: column `{column}`: {message}")]
    Malformed {
        file: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{file}: duplicate key {key}")]
    DuplicateKey { file: String, key: String },

    #[error("profile store failed validation:\n{}", ViolationList(.0))]
    Integrity(Vec<Violation>),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("undefined cost efficiency: verifier price is zero")]
    UndefinedCostEfficiency,

    #[error("no power data for {0}")]
    NoPowerData(String),

    #[error("objective infeasible: {0}")]
    Infeasible(String),

    #[error("invalid acceptance curve: {0}")]
    InvalidCurve(String),

    #[error("mismatched parameter sets: {0}")]
    Mismatched(String),
}

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {v}")?;
        }
        Ok(())
    }
}

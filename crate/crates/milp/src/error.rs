use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MilpError {
    #[error("variable v{0} is not declared in this model")]
    UnknownVar(usize),
    #[error("invalid bounds [{lo}, {hi}] for variable '{label}'")]
    InvalidBounds { label: String, lo: f64, hi: f64 },
    #[error("non-finite data in {0}")]
    NonFinite(String),
    #[error("simplex exceeded its iteration guard ({0} pivots); likely cycling or numerical breakdown")]
    CyclingGuard(usize),
    #[error("model has {found} binaries; the builtin solver is configured for at most {limit}")]
    TooManyBinaries { found: usize, limit: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("solution file does not assign variable(s): {0}")]
    MissingValues(String),
    #[error("imported point violates constraint {index} ('{label}') by {amount:.3e}")]
    InfeasibleImport {
        index: usize,
        label: String,
        amount: f64,
    },
    #[error("imported point violates bound or integrality of '{label}' (value {value})")]
    BoundImport { label: String, value: f64 },
}

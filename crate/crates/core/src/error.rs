use std::path::PathBuf;

use dap_milp::MilpError;
use thiserror::Error;

use crate::types::Unit;

#[derive(Debug, Error)]
pub enum DapError {
    #[error("time grid of {steps} steps x {dt} h does not cover one day")]
    InvalidGrid { steps: usize, dt: f64 },
    #[error("{what}: expected {expected} values, found {found}")]
    LengthMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{what}: expected unit {expected}, found {found}")]
    UnitMismatch {
        what: String,
        expected: Unit,
        found: Unit,
    },
    #[error("{device}: {msg}")]
    InvalidParams { device: String, msg: String },
    #[error(transparent)]
    Solver(#[from] MilpError),
    #[error("LU plan infeasible: {diagnostic}")]
    Infeasible { diagnostic: String },
    #[error("LU plan unbounded")]
    Unbounded,
    #[error("branch-and-bound hit the node limit ({nodes} nodes) without an incumbent")]
    NodeLimit { nodes: usize },
    #[error("DR request {value} at step {step} outside the declared band [{lo}, {hi}]")]
    OutOfBand {
        step: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("plans use different time grids")]
    MixedGrids,
    #[error("external solver: {0}")]
    External(String),
    #[error("{path}: {msg}")]
    Scenario { path: PathBuf, msg: String },
    #[error("LU {index}: {source}")]
    Lu {
        index: usize,
        #[source]
        source: Box<DapError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DapError {
    pub(crate) fn params(device: impl Into<String>, msg: impl Into<String>) -> Self {
        DapError::InvalidParams {
            device: device.into(),
            msg: msg.into(),
        }
    }
}

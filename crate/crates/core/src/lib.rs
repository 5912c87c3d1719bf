//! Decentralized day-ahead planning for demand-response aggregators.
//!
//! Each load unit (LU) solves its own MILP for an energy plan plus
//! guaranteed positive and negative reserves ([`lu_dap`]); the aggregator
//! pools the reserves and splits DR requests proportionally
//! ([`aggregator`]); [`intraday`] replays the day under forecast errors.

pub mod aggregator;
pub mod audit;
pub mod devices;
pub mod error;
pub mod intraday;
pub mod lu_dap;
pub mod pipeline;
pub mod scenario;
pub mod types;

pub use error::DapError;

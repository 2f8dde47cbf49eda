//! Config-driven pipeline: partition a feeder into microgrids, rank them by
//! percolation threshold, run cooperative energy sharing in one of them and
//! compare grid dependence with and without sharing.

pub mod config;
pub mod pipeline;
pub mod report;

pub use config::RunConfig;
pub use pipeline::{run, Command, RunSummary};

/// A problem with the configuration or its referenced inputs, as opposed
/// to a failure while processing data.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ValidationError(pub String);

/// Process exit code for a failed run: 1 for validation errors, 2 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<ValidationError>()) {
        1
    } else {
        2
    }
}

//! Library side of the `omegaz` command: configuration parsing and the
//! dispatch from an [`ExperimentConfig`] to an output artifact.

mod commands;
mod config;

pub use commands::{execute, run, Output};
pub use config::*;

use omegaz_core::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ResourceCap(_) => EXIT_RESOURCE,
        _ => EXIT_CONFIG,
    }
}

/// Machine-readable error line for standard error.
pub fn error_record(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

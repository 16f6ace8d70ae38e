//! Command implementations behind the `traji` binary.

pub mod ais_cmd;
pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

/// Bad command-line input, reported with the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

//! Experiment harness around `saep-core`: config parsing, the run /
//! sweep-alpha / compare subcommands, and JSON/CSV report emission.

pub mod commands;
pub mod config;
pub mod report;

/// Harness-level errors, split by exit code: configuration problems
/// (schema violations, invalid field values) exit 2, runtime failures
/// (I/O, diverged searches) exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    /// Maps a library error onto the config class (used where the root
    /// cause is a bad config value).
    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    /// Maps a library error onto the runtime class.
    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

//! Command-line driver: experiment files, trajectory CSVs, SVG plots and
//! table reproduction.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
    #[error("bound undefined: {0}")]
    BoundUndefined(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 config, 3 runtime, 4 bound-undefined.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 3,
            CliError::BoundUndefined(_) => 4,
        }
    }
}

pub use config::RunSpec;

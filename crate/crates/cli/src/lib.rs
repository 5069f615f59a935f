//! Library half of the command line front end: run configuration, snapshot
//! persistence, CSV emission, and the subcommand implementations. The binary
//! in main.rs is a thin argument-parsing shell over this.

pub mod commands;
pub mod config;
pub mod csvout;
pub mod snapshot;

use std::fmt::Display;

/// Verbosity of the progress stream on stderr. Machine-readable artifacts go
/// to files; stdout stays quiet so pipelines can rely on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum LogLevel {
    Quiet,
    Info,
    Debug,
}

#[derive(Debug, Clone, Copy)]
pub struct Logger {
    level: LogLevel,
}

impl Logger {
    pub fn new(level: LogLevel) -> Self {
        Logger { level }
    }

    pub fn info(&self, msg: impl Display) {
        if self.level >= LogLevel::Info {
            eprintln!("{msg}");
        }
    }

    pub fn debug(&self, msg: impl Display) {
        if self.level >= LogLevel::Debug {
            eprintln!("{msg}");
        }
    }
}

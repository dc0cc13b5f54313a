//! Command implementations behind the `autodip` binary.

pub mod commands;
pub mod config;
pub mod manifest;

pub use config::{CliConfig, WORKERS_ENV};
pub use manifest::{Manifest, ManifestEntry};

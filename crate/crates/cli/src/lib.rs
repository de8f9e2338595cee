//! Command-line front end of the tubular curvature filter: ingestion of
//! images and volumes, curvature rasters on disk, and PNG rendering.

pub mod cli;
pub mod config;
pub mod error;
pub mod ingest;
pub mod render;
pub mod store;

pub use cli::cli_main;
pub use error::{CliError, Result};

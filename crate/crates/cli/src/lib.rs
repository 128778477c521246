//! File formats, run configuration and commands around `sgrnn-core`.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod model_file;
pub mod palette;
pub mod png_io;

pub use config::{RunConfig, Stage};
pub use error::{CliError, Result};
pub use model_file::ModelFile;

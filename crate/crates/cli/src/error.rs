use std::path::{Path, PathBuf};

pub type Result<T> = std::result::Result<T, CliError>;

/// Everything a command can fail with; each variant maps to its own exit
/// code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot decode {}: {msg}", path.display())]
    Decode { path: PathBuf, msg: String },
    #[error("dataset sample {id}: {msg}")]
    Data { id: String, msg: String },
    #[error("model file {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("model mismatch: {0}")]
    Mismatch(String),
    #[error("computation error: {0}")]
    Core(#[from] sgrnn_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn decode(path: &Path, msg: impl ToString) -> Self {
        CliError::Decode { path: path.to_path_buf(), msg: msg.to_string() }
    }

    pub fn format(path: &Path, msg: impl ToString) -> Self {
        CliError::Format { path: path.to_path_buf(), msg: msg.to_string() }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Decode { .. } => 3,
            CliError::Data { .. } => 4,
            CliError::Format { .. } => 5,
            CliError::Mismatch(_) => 6,
            CliError::Core(_) => 7,
        }
    }
}

use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("channel count {0} is odd and cannot be split in halves")]
    OddChannels(usize),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("loss mask selects no pixels")]
    EmptyMask,
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: u8, classes: usize },
    #[error("scan tape does not belong to these parameters or this gradient")]
    StaleTape,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("could not place {0} faces without overlap")]
    Placement(usize),
    #[error("component region is empty")]
    DegenerateRegion,
    #[error("vocabulary mismatch: {0}")]
    Vocabulary(String),
    #[error("missing head output: {0}")]
    MissingHead(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed state ({x}, {y}): wall or outside the maze")]
    MalformedState { x: i64, y: i64 },

    #[error("goal ({gx}, {gy}) is unreachable from ({sx}, {sy})")]
    Unreachable { sx: usize, sy: usize, gx: usize, gy: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid maze: {0}")]
    InvalidMaze(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("index out of range: {0}")]
    Index(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("bad value for `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SceneError {
    #[error("no-such-object: id {0}")]
    NoSuchObject(usize),
    #[error("same-object: relation needs two distinct objects, got {0} twice")]
    SameObject(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("syntax-error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("type-error in `{node}`: {message}")]
    Type { node: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("non-unique: `{node}` resolved to {size} objects, expected exactly 1")]
    NonUnique { node: String, size: usize },
    #[error("non-unique-anchor: placement anchor resolved to {size} objects")]
    NonUniqueAnchor { size: usize },
    #[error("capacity: scene already holds the maximum number of objects")]
    Capacity,
    #[error("no-free-position: no legal position satisfies the placement")]
    NoFreePosition,
    #[error("invalid-result: {0}")]
    InvalidResult(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenError {
    #[error("oov-token: `{0}` is not in the vocabulary")]
    Oov(String),
    #[error("sequence-too-long: {len} tokens exceeds the maximum of {max}")]
    TooLong { len: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("shape mismatch in {op}: {detail}")]
pub struct ShapeError {
    pub op: &'static str,
    pub detail: String,
}

/// Reasons a generation attempt is discarded and retried.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("placement-exhausted: no legal position after {0} rejections")]
    PlacementExhausted(usize),
    #[error("no-referent: {0}")]
    NoReferent(String),
    #[error("degenerate-question: {0}")]
    DegenerateQuestion(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Token(#[from] TokenError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("unparseable-question: `{0}`")]
    UnparseableQuestion(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

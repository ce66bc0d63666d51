use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("token {token} is outside an alphabet of size {size}")]
    AlphabetMismatch { token: u32, size: usize },
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("step count must be at least 1")]
    ZeroSteps,
    #[error("generator list is empty")]
    EmptyGeneratorList,
    #[error("sequence is empty")]
    EmptySequence,
    #[error("sequence of length {len} is shorter than T+1 = {need}")]
    SequenceTooShort { len: usize, need: usize },
    #[error("slice index {0} out of range")]
    SliceOutOfRange(isize),
    #[error("not realizable: {0}")]
    NotRealizable(String),
    #[error("family is not enumerable: {0}")]
    NotEnumerable(String),
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("non-binary token {0}")]
    NonBinary(u32),
    #[error("guard exceeded: {0}")]
    Guard(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("circuit is not normalized: {0}")]
    NotNormalized(String),
    #[error("blank symbol has no output bit")]
    BlankOutput,
    #[error("history is not rooted in Pre: {0}")]
    NotPreRooted(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::word::DirEdge;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("malformed path: {0}")]
    MalformedPath(String),
    #[error("circuit reduces to the trivial loop")]
    TrivialCircuit,
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("not an automorphism: {0}")]
    NotAutomorphism(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("not foldable: {0}")]
    NotFoldable(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("budget exhausted: {what}")]
    Budget { what: String, partial: Option<Vec<DirEdge>> },
    #[error("internal check failed: {0}")]
    Internal(String),
}

impl Error {
    pub fn budget(what: impl Into<String>) -> Self {
        Error::Budget {
            what: what.into(),
            partial: None,
        }
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown slot ({domain}, {slot})")]
    UnknownSlot { domain: String, slot: String },

    #[error("dialogue {dialogue} turn {turn}: unknown slot ({domain}, {slot})")]
    UnknownSlotInCorpus {
        dialogue: String,
        turn: usize,
        domain: String,
        slot: String,
    },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    Json {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("token {0:?} is not covered by the lexicon")]
    TokenNotInLexicon(String),

    #[error("length mismatch: {pred} predictions vs {gold} gold states")]
    LengthMismatch { pred: usize, gold: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("missing corpus role {0}")]
    MissingRole(String),

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("regime {regime} failed: {source}")]
    Regime {
        regime: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Validation failures are caused by bad input data or configuration;
    /// everything else is a runtime failure. The CLI maps these to exit
    /// codes 2 and 3.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::UnknownSlot { .. }
            | Error::UnknownSlotInCorpus { .. }
            | Error::Invalid { .. }
            | Error::Json { .. }
            | Error::TokenNotInLexicon(_)
            | Error::LengthMismatch { .. }
            | Error::MissingRole(_)
            | Error::VocabularyMismatch(_)
            | Error::Checkpoint(_) => true,
            Error::Regime { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

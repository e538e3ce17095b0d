use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{origin}:{line}: invalid UTF-8")]
    Utf8 { origin: String, line: usize },

    /// A malformed line in a line-oriented input. `column` is 1-based and
    /// counts fields (or characters, for single-field formats).
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{origin}: sentence {sentence}: {message}")]
    Conllu {
        origin: String,
        sentence: usize,
        message: String,
    },

    #[error("{origin}: {message}")]
    Arpa { origin: String, message: String },

    #[error("score {score} out of range for scheme {scheme}")]
    ScoreOutOfRange { scheme: &'static str, score: f64 },

    #[error("tag {0:?} has no entry in the mapping table")]
    UnmappedTag(String),

    #[error("tag {tag:?} is not in the {tagset} inventory")]
    UnknownTag { tag: String, tagset: String },

    #[error("tagset mismatch: hypothesis uses {hyp}, reference uses {reference}")]
    TagsetMismatch { hyp: String, reference: String },

    #[error("empty reference: edit rate is undefined")]
    EmptyReference,

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing value for sentence {0}")]
    MissingValue(u64),

    #[error("zero probability for {0:?}")]
    ZeroProbability(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        origin: &str,
        line: usize,
        column: usize,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            origin: origin.to_string(),
            line,
            column,
            message: message.into(),
        }
    }
}

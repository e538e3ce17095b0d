//! Toolkit for studying machine-translation output: corpus preparation,
//! POS tagging, edit-rate and BLEU metrics, n-gram language models,
//! adequacy-binned analysis and back-translation selection.

pub mod analysis;
pub mod btselect;
pub mod cli;
pub mod corpus_io;
pub mod error;
pub mod metric_bleu;
pub mod metric_ter;
pub mod ngram_lm;
pub mod tagging;

pub use error::{Error, Result};

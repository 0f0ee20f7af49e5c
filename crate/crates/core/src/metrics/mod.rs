//! Corpus-level n-gram metrics computed from raw text.

mod bleu;
mod chrf;
mod tokenize;

pub use bleu::{bleu, sentence_bleu, BleuConfig, BleuReport, Smoothing};
pub use chrf::{chrf, ChrfConfig};
pub use tokenize::{tokenize, Tokenizer};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn check_corpus(hypotheses: &[impl AsRef<str>], references: &[impl AsRef<str>]) -> Result<(), MetricError> {
    if hypotheses.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(())
}

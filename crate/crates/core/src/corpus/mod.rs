//! Snippets, tag sets and the data plumbing around them.

mod bio;
mod conll;
mod records;
mod split;
mod synth;
mod tag;

pub use bio::{repair_bio, validate_bio, Violation, ViolationReason};
pub use conll::{parse_conll, validate_conll, write_conll, FileViolation, Sentence, Snippet, Token};
pub use records::{parse_classification_records, write_classification_records, ClassificationRecord};
pub use split::{build_batch_plan, make_splits, split_by_group, BatchPlan, SplitSpec, Splits};
pub use synth::{generate_synthetic_corpus, SynthProfile};
pub use tag::{Tag, TagKind, TagSet};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CorpusError {
    #[error("line {line}: unknown tag `{tag}` for tag set `{tagset}`")]
    UnknownTag { line: usize, tag: String, tagset: String },
    #[error("line {line}: malformed line ({reason})")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: label {label} is not 0 or 1")]
    InvalidLabel { line: usize, label: i64 },
    #[error("split ratios {0:?} must be non-negative and sum to 1")]
    InvalidRatios((f64, f64, f64)),
    #[error("cannot split an empty collection")]
    EmptyCollection,
    #[error("batch size must be at least 1")]
    InvalidBatchSize,
    #[error("invalid tag set: {0}")]
    InvalidTagSet(String),
}

//! Evaluation metric and training objective.
//!
//! Evaluation is entity-level: spans decoded from BIO tags count as true
//! positives only on an exact `(class, start, end)` match. Training uses the
//! soft macro-F1 loss over individual tags, where predicted probabilities stand
//! in for hard predictions in the true/false positive and false negative counts.

mod entity;
mod soft_f1;

pub use entity::{decode_entities, entity_report, ClassScore, EntityReport, EntitySpan};
pub use soft_f1::{
    soft_counts, soft_loss_gradient, soft_macro_f1_loss, LossGradient, SoftClassCounts, SoftCounts, DEFAULT_SMOOTHING,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("invalid BIO sequence at token {index}")]
    InvalidBio { index: usize },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("nothing to evaluate: no entity class in gold or predictions")]
    EmptyEvaluation,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no class has gold support")]
    NoGoldSupport,
    #[error("non-finite input at row {row}")]
    NonFiniteInput { row: usize },
}

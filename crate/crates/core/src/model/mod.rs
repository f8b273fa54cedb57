//! A small token and sequence classifier.
//!
//! A table of hashed-feature embeddings (the body) feeds a tanh hidden layer
//! and an affine prediction head. Training runs AdamW or a simplified
//! Adafactor with gradient clipping and dropout, over batches fixed once per
//! run. Behavioral fine-tuning reuses a trained body under a freshly seeded
//! head.

mod checkpoint;
mod features;
mod network;
mod optim;
mod params;
mod train;

pub use checkpoint::{decode_f64s, encode_f64s, transfer_from_checkpoint, Checkpoint, Task, CHECKPOINT_VERSION};
pub use features::{extract_features, feature_names, shape, FeatureConfig, DEFAULT_HASH_DIM, DEFAULT_RADIUS};
pub use network::{
    forward_backward, forward_backward_pooled, hidden_states, pooled_probabilities, token_probabilities, LossKind,
    PooledSequence, TaggedSequence,
};
pub use optim::{optimizer_step, Factored, Moments, Optimizer, OptimizerState};
pub use params::{
    clip_gradients, init_head, init_model, Gradients, Head, ModelDims, ModelParameters, Seeds, BODY_INIT_RANGE,
    DEFAULT_HIDDEN, DEFAULT_MODEL_HASH_DIM, HEAD_INIT_RANGE,
};
pub use train::{
    classify_document, evaluate_classifier, evaluate_tagger, predict_snippet, predict_tags, train, train_classifier,
    EncodedText, Encoder, EpochRecord, TrainConfig, TrainOutcome,
};

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::metrics::MetricsError;
use crate::window::WindowError;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("training data is empty")]
    EmptyDataset,
    #[error("batch has no labelled units")]
    EmptyBatch,
    #[error("document has no words")]
    EmptyDocument,
    #[error("parameters became non-finite")]
    NonFinite,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

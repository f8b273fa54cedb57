//! Versioned JSON checkpoints.
//!
//! Parameter arrays are stored as the big-endian hexadecimal bit patterns of
//! their `f64` values, 16 digits per value, so loading reproduces every bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{init_head, Encoder, FeatureConfig, Head, ModelDims, ModelError, ModelParameters};
use crate::corpus::TagSet;
use crate::window::{SubwordVocab, WindowConfig};
use crate::Matrix;

pub const CHECKPOINT_VERSION: u32 = 1;

/// What the head predicts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Task {
    Tagging { tagset: TagSet },
    Classification,
}

impl Task {
    pub fn n_outputs(&self) -> usize {
        match self {
            Self::Tagging { tagset } => tagset.len(),
            Self::Classification => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task: Task,
    pub encoder: Encoder,
    pub params: ModelParameters,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabFile {
    unk: String,
    entries: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format_version: u32,
    task: Task,
    dims: ModelDims,
    window: WindowConfig,
    features: FeatureConfig,
    vocab: VocabFile,
    body: String,
    head_weights: String,
    head_bias: String,
}

pub fn encode_f64s(values: &[f64]) -> String {
    values.iter().map(|v| format!("{:016x}", v.to_bits())).collect()
}

pub fn decode_f64s(text: &str, expected: usize) -> Result<Vec<f64>, ModelError> {
    if text.len() != expected * 16 || !text.is_ascii() {
        return Err(ModelError::Checkpoint(format!(
            "expected {expected} values ({} hex digits), found {} characters",
            expected * 16,
            text.len()
        )));
    }
    (0..expected)
        .map(|i| {
            u64::from_str_radix(&text[i * 16..(i + 1) * 16], 16)
                .map(f64::from_bits)
                .map_err(|e| ModelError::Checkpoint(format!("value {i}: {e}")))
        })
        .collect()
}

impl Checkpoint {
    pub fn new(task: Task, encoder: Encoder, params: ModelParameters) -> Result<Self, ModelError> {
        params.validate()?;
        if params.dims.n_outputs != task.n_outputs() || encoder.features.hash_dim != params.dims.hash_dim {
            return Err(ModelError::DimMismatch(format!(
                "dims {:?} do not fit the task ({} outputs) or hash_dim {}",
                params.dims,
                task.n_outputs(),
                encoder.features.hash_dim
            )));
        }
        Ok(Self { task, encoder, params })
    }

    pub fn to_json(&self) -> String {
        let file = CheckpointFile {
            format_version: CHECKPOINT_VERSION,
            task: self.task.clone(),
            dims: self.params.dims,
            window: self.encoder.window,
            features: self.encoder.features,
            vocab: VocabFile {
                unk: self.encoder.vocab.unk().to_string(),
                entries: self.encoder.vocab.entries().into_iter().map(String::from).collect(),
            },
            body: encode_f64s(self.params.body.as_slice()),
            head_weights: encode_f64s(self.params.head.weights.as_slice()),
            head_bias: encode_f64s(&self.params.head.bias),
        };
        serde_json::to_string(&file).expect("checkpoint serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: CheckpointFile = serde_json::from_str(text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if file.format_version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported format version {}",
                file.format_version
            )));
        }
        if let Task::Tagging { tagset } = &file.task {
            TagSet::new(tagset.name(), tagset.classes().to_vec())?;
        }
        let d = file.dims;
        d.validate()?;
        let params = ModelParameters {
            dims: d,
            body: Matrix::from_vec(d.hash_dim, d.hidden, decode_f64s(&file.body, d.hash_dim * d.hidden)?)
                .expect("length checked"),
            head: Head {
                weights: Matrix::from_vec(
                    d.n_outputs,
                    d.hidden,
                    decode_f64s(&file.head_weights, d.n_outputs * d.hidden)?,
                )
                .expect("length checked"),
                bias: decode_f64s(&file.head_bias, d.n_outputs)?,
            },
        };
        let vocab = SubwordVocab::new(file.vocab.entries, file.vocab.unk)?;
        let encoder = Encoder::new(vocab, file.window, file.features)?;
        Self::new(file.task, encoder, params)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Keeps the body of `source` and attaches a fresh head of the target width.
pub fn transfer_from_checkpoint(
    source: &ModelParameters,
    target_dims: ModelDims,
    head_init_seed: u64,
) -> Result<ModelParameters, ModelError> {
    target_dims.validate()?;
    let s = source.dims;
    if s.hash_dim != target_dims.hash_dim || s.hidden != target_dims.hidden {
        return Err(ModelError::DimMismatch(format!(
            "checkpoint body is {}x{}, target wants {}x{}",
            s.hash_dim, s.hidden, target_dims.hash_dim, target_dims.hidden
        )));
    }
    Ok(ModelParameters {
        dims: target_dims,
        body: source.body.clone(),
        head: init_head(target_dims.hidden, target_dims.n_outputs, head_init_seed),
    })
}

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::network::{forward_backward, forward_backward_pooled, pooled_probabilities, token_probabilities};
use super::{
    clip_gradients, extract_features, FeatureConfig, LossKind, ModelError, ModelParameters, Optimizer, PooledSequence,
    Seeds, TaggedSequence,
};
use crate::corpus::{build_batch_plan, repair_bio, ClassificationRecord, Snippet, Tag, TagSet};
use crate::metrics::{entity_report, ClassScore};
use crate::seed;
use crate::window::{
    align, document_class_probs, make_windows, merge_window_probs, word_probs, Alignment, SubwordVocab,
    TokenProbabilities, WindowConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub weight_decay: f64,
    pub max_grad_norm: f64,
    pub use_adafactor: bool,
    pub dropout: f64,
    pub batch_size: usize,
    pub loss_kind: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            epochs: 40,
            adam_beta1: 0.74,
            adam_beta2: 0.99,
            adam_epsilon: 3e-8,
            weight_decay: 0.36,
            max_grad_norm: 0.17,
            use_adafactor: true,
            dropout: 0.1,
            batch_size: 4,
            loss_kind: LossKind::SoftMacroF1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::InvalidConfig(what.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if !(self.adam_epsilon >= 0.0 && self.adam_epsilon.is_finite()) {
            return bad("adam_epsilon must be non-negative");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if self.max_grad_norm.is_nan() || self.max_grad_norm <= 0.0 {
            return bad("max_grad_norm must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        Ok(())
    }
}

/// Turns words into subword windows and their feature ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub vocab: SubwordVocab,
    pub window: WindowConfig,
    pub features: FeatureConfig,
}

/// A word sequence after alignment and windowing.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedText {
    pub alignment: Alignment,
    pub windows: Vec<Range<usize>>,
    /// Feature ids of every subtoken, computed within its window.
    pub features: Vec<Vec<Vec<u32>>>,
}

impl EncodedText {
    /// Per window, the features of the units that start a word: the word
    /// hidden states that sequence classification pools. A window made only of
    /// continuation pieces keeps all its units.
    pub fn word_features(&self) -> Vec<Vec<Vec<u32>>> {
        self.windows
            .iter()
            .zip(&self.features)
            .map(|(range, units)| {
                let firsts: Vec<Vec<u32>> = range
                    .clone()
                    .zip(units)
                    .filter(|(p, _)| self.alignment.is_first[*p])
                    .map(|(_, f)| f.clone())
                    .collect();
                if firsts.is_empty() {
                    units.clone()
                } else {
                    firsts
                }
            })
            .collect()
    }
}

impl Encoder {
    pub fn new(vocab: SubwordVocab, window: WindowConfig, features: FeatureConfig) -> Result<Self, ModelError> {
        window.validate()?;
        features.validate()?;
        Ok(Self {
            vocab,
            window,
            features,
        })
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> EncodedText {
        let alignment = align(words, &self.vocab);
        let windows = make_windows(alignment.len(), &self.window);
        let features = windows
            .iter()
            .map(|r| extract_features(&alignment.subtokens[r.clone()], &self.features))
            .collect();
        EncodedText {
            alignment,
            windows,
            features,
        }
    }

    /// Training windows of a snippet. Labels sit on the first piece of each
    /// word; missing gold tags read as `O`.
    pub fn tagged_sequences(&self, snippet: &Snippet, tagset: &TagSet) -> Result<Vec<TaggedSequence>, ModelError> {
        let gold = snippet
            .gold()
            .into_iter()
            .map(|t| {
                let t = t.unwrap_or(Tag::Outside);
                tagset
                    .index_of(&t)
                    .ok_or_else(|| ModelError::InvalidConfig(format!("tag {t} is not in tag set `{}`", tagset.name())))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let enc = self.encode(&snippet.words());
        let a = &enc.alignment;
        Ok(enc
            .windows
            .iter()
            .zip(enc.features)
            .map(|(r, features)| TaggedSequence {
                features,
                labels: r
                    .clone()
                    .map(|p| a.is_first[p].then(|| gold[a.word_index[p]]))
                    .collect(),
            })
            .collect())
    }

    /// Training windows of a classification record, each carrying the record label.
    pub fn pooled_sequences(&self, record: &ClassificationRecord) -> Vec<PooledSequence> {
        let words: Vec<&str> = record.text.split_whitespace().collect();
        self.encode(&words)
            .word_features()
            .into_iter()
            .map(|features| PooledSequence {
                features,
                label: usize::from(record.label),
            })
            .collect()
    }
}

fn check_compatible(params: &ModelParameters, encoder: &Encoder, n_outputs: usize) -> Result<(), ModelError> {
    params.validate()?;
    if encoder.features.hash_dim != params.dims.hash_dim {
        return Err(ModelError::DimMismatch(format!(
            "feature hash_dim {} but body has {} rows",
            encoder.features.hash_dim, params.dims.hash_dim
        )));
    }
    if params.dims.n_outputs != n_outputs {
        return Err(ModelError::DimMismatch(format!(
            "head has {} outputs, task needs {n_outputs}",
            params.dims.n_outputs
        )));
    }
    Ok(())
}

/// Per-word tags of a word sequence: window probabilities are merged, each
/// word reads its first piece, and the argmax sequence is repaired to valid BIO.
pub fn predict_tags<S: AsRef<str>>(
    params: &ModelParameters,
    encoder: &Encoder,
    tagset: &TagSet,
    words: &[S],
) -> Result<Vec<Tag>, ModelError> {
    check_compatible(params, encoder, tagset.len())?;
    if words.is_empty() {
        return Ok(Vec::new());
    }
    let enc = encoder.encode(words);
    let per_window = enc
        .features
        .iter()
        .map(|f| Ok(TokenProbabilities::new(token_probabilities(params, f)?)?))
        .collect::<Result<Vec<_>, ModelError>>()?;
    let merged = merge_window_probs(&enc.windows, &per_window)?;
    let tags: Vec<Tag> = word_probs(&enc.alignment, &merged)?
        .iter()
        .map(|row| tagset.tag_at(crate::argmax(row).expect("non-empty tag set")))
        .collect();
    Ok(repair_bio(&tags))
}

/// Copy of the snippet with predicted tags in place of gold.
pub fn predict_snippet(
    params: &ModelParameters,
    encoder: &Encoder,
    tagset: &TagSet,
    snippet: &Snippet,
) -> Result<Snippet, ModelError> {
    Ok(snippet.with_tags(&predict_tags(params, encoder, tagset, &snippet.words())?))
}

/// Entity-level macro-F1 of the model's predictions against the snippets' gold.
pub fn evaluate_tagger(
    params: &ModelParameters,
    encoder: &Encoder,
    tagset: &TagSet,
    snippets: &[Snippet],
) -> Result<f64, ModelError> {
    let mut gold = Vec::with_capacity(snippets.len());
    let mut pred = Vec::with_capacity(snippets.len());
    for s in snippets {
        gold.push(s.gold_sequences().concat());
        pred.push(predict_tags(params, encoder, tagset, &s.words())?);
    }
    Ok(entity_report(&gold, &pred)?.macro_f1)
}

/// Class probabilities of a document: mean over its sub-documents, argmax
/// with ties to class 0.
pub fn classify_document(
    params: &ModelParameters,
    encoder: &Encoder,
    text: &str,
) -> Result<(usize, [f64; 2]), ModelError> {
    check_compatible(params, encoder, 2)?;
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return Err(ModelError::EmptyDocument);
    }
    let per_subdoc = encoder
        .encode(&words)
        .word_features()
        .iter()
        .map(|f| {
            let p = pooled_probabilities(params, f)?;
            Ok([p[0], p[1]])
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    let (probs, label) = document_class_probs(&per_subdoc)?;
    Ok((label, probs))
}

/// Macro-F1 over the labels {0, 1} present in gold or predictions.
pub fn evaluate_classifier(
    params: &ModelParameters,
    encoder: &Encoder,
    records: &[ClassificationRecord],
) -> Result<f64, ModelError> {
    let mut counts = [(0usize, 0usize, 0usize); 2];
    for r in records {
        let (pred, _) = classify_document(params, encoder, &r.text)?;
        let gold = usize::from(r.label);
        if pred == gold {
            counts[gold].0 += 1;
        } else {
            counts[pred].1 += 1;
            counts[gold].2 += 1;
        }
    }
    let present: Vec<f64> = counts
        .iter()
        .filter(|c| c.0 + c.1 + c.2 > 0)
        .map(|&(tp, fp, fn_)| ClassScore::from_counts(tp, fp, fn_).f1)
        .collect();
    if present.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    Ok(present.iter().sum::<f64>() / present.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub train_loss: f64,
    /// Macro-F1 on the evaluation data after the epoch, if any was given.
    pub eval_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    pub history: Vec<EpochRecord>,
}

/// The generic loop shared by tagging and classification: a batch plan built
/// once from the data-order seed and replayed each epoch; per step forward and
/// backward, clipping, and an optimiser step.
fn run_training<E, B, V>(
    mut params: ModelParameters,
    examples: &[Vec<E>],
    config: &TrainConfig,
    seeds: Seeds,
    mut step_grads: B,
    mut evaluate: V,
) -> Result<TrainOutcome, ModelError>
where
    E: Clone,
    B: FnMut(&ModelParameters, &[E], &mut seed::Rng) -> Result<(f64, super::Gradients), ModelError>,
    V: FnMut(&ModelParameters) -> Result<Option<f64>, ModelError>,
{
    config.validate()?;
    if examples.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let indices: Vec<usize> = (0..examples.len()).collect();
    let plan = build_batch_plan(&indices, config.batch_size, seeds.data_order)?;
    let mut dropout_rng = seed::rng(seed::derive(seeds.global, "dropout"));
    let mut optimizer = Optimizer::new(&params, config);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut total = 0.0;
        let mut steps = 0usize;
        for batch in plan.epoch() {
            let items: Vec<E> = batch.iter().flat_map(|&i| examples[i].iter().cloned()).collect();
            let (loss, mut grads) = match step_grads(&params, &items, &mut dropout_rng) {
                Err(ModelError::EmptyBatch) => continue,
                other => other?,
            };
            clip_gradients(&mut grads, config.max_grad_norm);
            optimizer.step(&mut params, &grads)?;
            total += loss;
            steps += 1;
        }
        optimizer.finish(&mut params);
        if params.body.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_loss: if steps > 0 { total / steps as f64 } else { 0.0 },
            eval_macro_f1: evaluate(&params)?,
        });
    }
    Ok(TrainOutcome { params, history })
}

/// Trains a tagger. The head width must equal the tag set size.
pub fn train(
    params: ModelParameters,
    encoder: &Encoder,
    tagset: &TagSet,
    train: &[Snippet],
    eval: &[Snippet],
    config: &TrainConfig,
    seeds: Seeds,
) -> Result<TrainOutcome, ModelError> {
    check_compatible(&params, encoder, tagset.len())?;
    let examples = train
        .iter()
        .map(|s| encoder.tagged_sequences(s, tagset))
        .collect::<Result<Vec<_>, _>>()?;
    run_training(
        params,
        &examples,
        config,
        seeds,
        |p, batch, rng| forward_backward(p, batch, config.loss_kind, config.dropout, rng),
        |p| {
            if eval.is_empty() {
                Ok(None)
            } else {
                evaluate_tagger(p, encoder, tagset, eval).map(Some)
            }
        },
    )
}

/// Trains a binary document classifier on mean-pooled windows.
pub fn train_classifier(
    params: ModelParameters,
    encoder: &Encoder,
    train: &[ClassificationRecord],
    eval: &[ClassificationRecord],
    config: &TrainConfig,
    seeds: Seeds,
) -> Result<TrainOutcome, ModelError> {
    check_compatible(&params, encoder, 2)?;
    let examples: Vec<Vec<PooledSequence>> = train.iter().map(|r| encoder.pooled_sequences(r)).collect();
    run_training(
        params,
        &examples,
        config,
        seeds,
        |p, batch, rng| forward_backward_pooled(p, batch, config.loss_kind, config.dropout, rng),
        |p| {
            if eval.is_empty() {
                Ok(None)
            } else {
                evaluate_classifier(p, encoder, eval).map(Some)
            }
        },
    )
}

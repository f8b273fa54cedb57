//! JSON description of a stability suite and the loading of its data.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::stability::{
    AuxSource, DatasetBundle, LanguageSplit, Mode, SeedPolicy, StabilityConfig, SuiteInputs, SuiteSettings,
    CANONICAL_POLICIES,
};
use super::ExperimentError;
use crate::corpus::{generate_synthetic_corpus, parse_conll, Snippet, SplitSpec, SynthProfile, TagSet};
use crate::model::{Checkpoint, Encoder, FeatureConfig, TrainConfig, DEFAULT_HIDDEN, DEFAULT_MODEL_HASH_DIM};
use crate::seed;
use crate::window::{SubwordVocab, WindowConfig};

/// A language's snippets: read from a file or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub language: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Number of synthetic snippets to generate instead of reading a file.
    #[serde(default)]
    pub synthetic: Option<usize>,
}

/// Auxiliary data for behavioral runs: a corpus (file or synthetic) to
/// pretrain on, or a checkpoint that already holds the pretrained body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxSpec {
    #[serde(default = "default_aux_tagset")]
    pub tagset: String,
    #[serde(default = "default_aux_language")]
    pub language: String,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<usize>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

fn default_aux_tagset() -> String {
    "ner".into()
}

fn default_aux_language() -> String {
    "en".into()
}

fn default_modes() -> Vec<Mode> {
    vec![Mode::Normal, Mode::Behavioral]
}

fn default_policies() -> Vec<(SeedPolicy, SeedPolicy)> {
    CANONICAL_POLICIES.to_vec()
}

fn default_runs() -> usize {
    20
}

fn default_hidden() -> usize {
    DEFAULT_HIDDEN
}

fn default_hash_dim() -> usize {
    DEFAULT_MODEL_HASH_DIM
}

fn default_radius() -> usize {
    crate::model::DEFAULT_RADIUS
}

fn default_split() -> (f64, f64, f64) {
    (0.6, 0.2, 0.2)
}

fn default_tagset() -> String {
    "event".into()
}

fn default_min_count() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    /// `(data order, head init)` policy pairs run for each mode.
    #[serde(default = "default_policies")]
    pub policies: Vec<(SeedPolicy, SeedPolicy)>,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    pub base_seed: u64,
    #[serde(default = "default_tagset")]
    pub tagset: String,
    pub languages: Vec<DataSource>,
    #[serde(default)]
    pub aux: Option<AuxSpec>,
    /// Overrides applied on top of the suite's training defaults.
    #[serde(default)]
    pub train: Map<String, Value>,
    #[serde(default)]
    pub aux_train: Map<String, Value>,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_hash_dim")]
    pub hash_dim: usize,
    #[serde(default = "default_radius")]
    pub radius: usize,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default = "default_split")]
    pub split: (f64, f64, f64),
    #[serde(default = "default_min_count")]
    pub vocab_min_count: usize,
}

fn overlay(base: &TrainConfig, overrides: &Map<String, Value>) -> Result<TrainConfig, ExperimentError> {
    let mut v = serde_json::to_value(base).expect("config serialises");
    let obj = v.as_object_mut().expect("config is an object");
    for (k, val) in overrides {
        obj.insert(k.clone(), val.clone());
    }
    let cfg: TrainConfig =
        serde_json::from_value(v).map_err(|e| ExperimentError::InvalidConfig(format!("train config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

fn tagset_named(name: &str) -> Result<TagSet, ExperimentError> {
    TagSet::by_name(name).ok_or_else(|| ExperimentError::InvalidConfig(format!("unknown tag set `{name}`")))
}

fn read_conll(path: &Path, tagset: &TagSet) -> Result<Vec<Snippet>, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
    Ok(parse_conll(&text, tagset)?)
}

fn resolve(base_dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

impl SuiteSpec {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))
    }

    pub fn configs(&self) -> Vec<StabilityConfig> {
        self.modes
            .iter()
            .flat_map(|&m| self.policies.iter().map(move |&(d, h)| StabilityConfig::new(m, d, h)))
            .collect()
    }

    pub fn settings(&self) -> Result<SuiteSettings, ExperimentError> {
        let defaults = SuiteSettings::new(self.base_seed);
        Ok(SuiteSettings {
            n_runs: self.n_runs,
            base_seed: self.base_seed,
            train: overlay(&defaults.train, &self.train)?,
            aux_train: overlay(&defaults.aux_train, &self.aux_train)?,
            hidden: self.hidden,
        })
    }

    /// Reads or generates every corpus, splits per language, and builds the
    /// vocabulary from the training words (plus the auxiliary corpus).
    /// Relative paths are resolved against `base_dir`.
    pub fn load_inputs(&self, base_dir: &Path) -> Result<SuiteInputs, ExperimentError> {
        let tagset = tagset_named(&self.tagset)?;
        let corpus_seed = seed::derive(self.base_seed, "corpus");
        let mut languages = Vec::new();
        for src in &self.languages {
            let snippets = match (&src.path, src.synthetic) {
                (Some(p), None) => read_conll(&resolve(base_dir, p), &tagset)?,
                (None, Some(n)) => generate_synthetic_corpus(
                    &SynthProfile {
                        language: src.language.clone(),
                        n_snippets: n,
                        tagset: tagset.clone(),
                    },
                    corpus_seed,
                ),
                _ => {
                    return Err(ExperimentError::InvalidConfig(format!(
                        "language `{}` needs exactly one of `path` or `synthetic`",
                        src.language
                    )))
                }
            };
            languages.push(LanguageSplit {
                language: src.language.clone(),
                snippets,
            });
        }
        if languages.iter().all(|l| l.snippets.is_empty()) {
            return Err(ExperimentError::EmptyDataset);
        }
        let (a, b, c) = self.split;
        let spec = SplitSpec::new(a, b, c, seed::derive(self.base_seed, "split"))?;
        let data = DatasetBundle::from_languages(languages, &spec)?;

        let mut aux = None;
        let mut aux_words: Vec<String> = Vec::new();
        if let Some(spec) = &self.aux {
            let aux_tagset = tagset_named(&spec.tagset)?;
            aux = Some(match (&spec.path, spec.synthetic, &spec.checkpoint) {
                (Some(p), None, None) => AuxSource::Corpus {
                    snippets: read_conll(&resolve(base_dir, p), &aux_tagset)?,
                    tagset: aux_tagset,
                },
                (None, Some(n), None) => AuxSource::Corpus {
                    snippets: generate_synthetic_corpus(
                        &SynthProfile {
                            language: spec.language.clone(),
                            n_snippets: n,
                            tagset: aux_tagset.clone(),
                        },
                        seed::derive(self.base_seed, "aux-corpus"),
                    ),
                    tagset: aux_tagset,
                },
                (None, None, Some(p)) => AuxSource::Pretrained(Checkpoint::load(&resolve(base_dir, p))?.params),
                _ => {
                    return Err(ExperimentError::InvalidConfig(
                        "aux needs exactly one of `path`, `synthetic` or `checkpoint`".into(),
                    ))
                }
            });
            if let Some(AuxSource::Corpus { snippets, .. }) = &aux {
                aux_words = snippets.iter().flat_map(|s| s.words()).map(String::from).collect();
            }
        }
        let words = data.train_words().chain(aux_words.iter().map(String::as_str));
        let vocab = SubwordVocab::from_words(words, self.vocab_min_count);
        let encoder = Encoder::new(vocab, self.window, FeatureConfig::new(self.radius, self.hash_dim)?)?;
        Ok(SuiteInputs {
            encoder,
            tagset,
            data,
            aux,
        })
    }
}

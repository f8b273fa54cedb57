//! JSON files read by the subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use evtag::corpus::{SynthProfile, TagSet};
use evtag::model::{FeatureConfig, TrainConfig, DEFAULT_HIDDEN, DEFAULT_MODEL_HASH_DIM, DEFAULT_RADIUS};
use evtag::window::WindowConfig;
use serde::Deserialize;
use serde_json::{Map, Value};

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn tagset_named(name: &str) -> Result<TagSet> {
    match TagSet::by_name(name) {
        Some(t) => Ok(t),
        None => bail!("unknown tag set `{name}` (expected `event` or `ner`)"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    Tagging,
    Classification,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileFile {
    pub language: String,
    pub n_snippets: usize,
    #[serde(default = "default_tagset")]
    pub tagset: String,
}

fn default_tagset() -> String {
    "event".into()
}

impl ProfileFile {
    pub fn profile(&self) -> Result<SynthProfile> {
        Ok(SynthProfile {
            language: self.language.clone(),
            n_snippets: self.n_snippets,
            tagset: tagset_named(&self.tagset)?,
        })
    }
}

/// Model shape and training settings for `train`, `pretrain-aux` and `hpo`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub task: TaskKind,
    pub tagset: Option<String>,
    pub hidden: Option<usize>,
    pub hash_dim: Option<usize>,
    pub radius: Option<usize>,
    pub window: Option<WindowConfig>,
    pub vocab_min_count: Option<usize>,
    /// Checkpoint whose body initialises the model (behavioral fine-tuning).
    pub init_from: Option<PathBuf>,
    /// Training fields overriding the defaults.
    #[serde(default)]
    pub train: Map<String, Value>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), read_json)
    }

    pub fn hidden(&self) -> usize {
        self.hidden.unwrap_or(DEFAULT_HIDDEN)
    }

    pub fn features(&self) -> Result<FeatureConfig> {
        Ok(FeatureConfig::new(
            self.radius.unwrap_or(DEFAULT_RADIUS),
            self.hash_dim.unwrap_or(DEFAULT_MODEL_HASH_DIM),
        )?)
    }

    pub fn window(&self) -> WindowConfig {
        self.window.unwrap_or_default()
    }

    pub fn min_count(&self) -> usize {
        self.vocab_min_count.unwrap_or(1)
    }

    /// `base` with the `train` overrides applied.
    pub fn train_config(&self, base: &TrainConfig) -> Result<TrainConfig> {
        let mut value = serde_json::to_value(base)?;
        let obj = value.as_object_mut().expect("training config is an object");
        for (k, v) in &self.train {
            obj.insert(k.clone(), v.clone());
        }
        let cfg: TrainConfig = serde_json::from_value(value).context("training settings")?;
        cfg.validate()?;
        Ok(cfg)
    }
}

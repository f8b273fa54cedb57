use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::corpus::{split_by_group, Snippet, SplitSpec, TagSet};
use crate::model::{
    evaluate_tagger, init_model, train, transfer_from_checkpoint, Encoder, ModelDims, ModelParameters, Seeds,
    TrainConfig,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Normal,
    Behavioral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    Fixed,
    Random,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Normal => "normal",
            Self::Behavioral => "behavioral",
        }
    }
}

impl SeedPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::Random => "random",
        }
    }
}

/// The three `(data order, head init)` policy pairs run for each mode.
pub const CANONICAL_POLICIES: [(SeedPolicy, SeedPolicy); 3] = [
    (SeedPolicy::Random, SeedPolicy::Fixed),
    (SeedPolicy::Fixed, SeedPolicy::Random),
    (SeedPolicy::Random, SeedPolicy::Random),
];

/// One row of the stability table: a training mode and which seed varies
/// between runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub mode: Mode,
    pub data_seed: SeedPolicy,
    pub head_seed: SeedPolicy,
}

impl StabilityConfig {
    pub fn new(mode: Mode, data_seed: SeedPolicy, head_seed: SeedPolicy) -> Self {
        Self {
            mode,
            data_seed,
            head_seed,
        }
    }

    /// Normal then behavioral, each with the three canonical policy pairs.
    pub fn canonical() -> Vec<Self> {
        [Mode::Normal, Mode::Behavioral]
            .into_iter()
            .flat_map(|m| CANONICAL_POLICIES.map(|(d, h)| Self::new(m, d, h)))
            .collect()
    }

    pub fn is_canonical(&self) -> bool {
        CANONICAL_POLICIES.contains(&(self.data_seed, self.head_seed))
    }

    /// Stable small integer naming the configuration in seed derivation.
    pub fn id(&self) -> u64 {
        let bit = |p: SeedPolicy| u64::from(p == SeedPolicy::Random);
        let mode = u64::from(self.mode == Mode::Behavioral);
        mode * 4 + bit(self.data_seed) * 2 + bit(self.head_seed)
    }

    /// Seeds of run `run_index`: a fixed policy uses one value for every run
    /// of this configuration, a random policy a fresh value per run. The
    /// global seed is always fixed within a configuration.
    pub fn run_seeds(&self, base_seed: u64, run_index: usize) -> Seeds {
        let id = self.id();
        let pick = |policy: SeedPolicy, label: &str| match policy {
            SeedPolicy::Fixed => seed::derive_indexed(base_seed, label, &[id]),
            SeedPolicy::Random => seed::derive_indexed(base_seed, label, &[id, run_index as u64 + 1]),
        };
        Seeds {
            global: seed::derive_indexed(base_seed, "global", &[id]),
            data_order: pick(self.data_seed, "data-order"),
            head_init: pick(self.head_seed, "head-init"),
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}/{}-data/{}-head",
            self.mode.as_str(),
            self.data_seed.as_str(),
            self.head_seed.as_str()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageSplit {
    pub language: String,
    pub snippets: Vec<Snippet>,
}

/// Training and evaluation data of a suite, with one test split per language.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub train: Vec<Snippet>,
    pub eval: Vec<Snippet>,
    pub test: Vec<LanguageSplit>,
}

impl DatasetBundle {
    /// Splits each language on its own and concatenates train and eval parts.
    pub fn from_languages(languages: Vec<LanguageSplit>, spec: &SplitSpec) -> Result<Self, ExperimentError> {
        let sizes: Vec<usize> = languages.iter().map(|l| l.snippets.len()).collect();
        let all: Vec<&Snippet> = languages.iter().flat_map(|l| &l.snippets).collect();
        let (combined, per_language) = split_by_group(&sizes, spec, true)?;
        let take = |ix: &[usize]| ix.iter().map(|&i| all[i].clone()).collect::<Vec<_>>();
        let test = languages
            .iter()
            .zip(&per_language)
            .map(|(l, s)| LanguageSplit {
                language: l.language.clone(),
                snippets: take(&s.test),
            })
            .collect();
        Ok(Self {
            train: take(&combined.train),
            eval: take(&combined.eval),
            test,
        })
    }

    pub fn languages(&self) -> Vec<&str> {
        self.test.iter().map(|t| t.language.as_str()).collect()
    }

    /// Every word of every split, for building a vocabulary.
    pub fn train_words(&self) -> impl Iterator<Item = &str> {
        self.train.iter().flat_map(|s| s.tokens().map(|t| t.text.as_str()))
    }
}

/// Where the auxiliary body for behavioral runs comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum AuxSource {
    /// Pretrain on this corpus once per suite.
    Corpus { tagset: TagSet, snippets: Vec<Snippet> },
    /// Parameters of an already pretrained auxiliary model.
    Pretrained(ModelParameters),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSettings {
    pub n_runs: usize,
    pub base_seed: u64,
    pub train: TrainConfig,
    /// Configuration of the auxiliary pretraining pass.
    pub aux_train: TrainConfig,
    pub hidden: usize,
}

impl SuiteSettings {
    /// 20 runs, 20 training epochs, one auxiliary epoch at learning rate 1e-5.
    pub fn new(base_seed: u64) -> Self {
        Self {
            n_runs: 20,
            base_seed,
            train: TrainConfig {
                epochs: 20,
                ..TrainConfig::default()
            },
            aux_train: TrainConfig {
                epochs: 1,
                learning_rate: 1e-5,
                ..TrainConfig::default()
            },
            hidden: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteInputs {
    pub encoder: Encoder,
    pub tagset: TagSet,
    pub data: DatasetBundle,
    pub aux: Option<AuxSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: StabilityConfig,
    pub run_index: usize,
    pub seeds: Seeds,
    pub train: f64,
    pub eval: f64,
    /// `(language, macro-F1)` in the bundle's language order.
    pub test: Vec<(String, f64)>,
}

impl RunResult {
    /// Column values in table order: train, eval, then each test language.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.train, self.eval];
        v.extend(self.test.iter().map(|t| t.1));
        v
    }

    pub fn column_names(&self) -> Vec<String> {
        column_names(self.test.iter().map(|t| t.0.as_str()))
    }
}

pub fn column_names<'a>(languages: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut c = vec!["train".to_string(), "eval".to_string()];
    c.extend(languages.into_iter().map(|l| format!("test_{l}")));
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStat {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (`n − 1` divisor), one pass.
pub fn mean_std(values: &[f64]) -> Result<ColumnStat, ExperimentError> {
    if values.len() < 2 {
        return Err(ExperimentError::InsufficientRuns(values.len()));
    }
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    Ok(ColumnStat {
        mean,
        std: (m2 / (values.len() - 1) as f64).max(0.0).sqrt(),
    })
}

/// Per-column mean and sample standard deviation over runs.
pub fn summarize_runs(results: &[RunResult]) -> Result<Vec<ColumnStat>, ExperimentError> {
    let Some(first) = results.first() else {
        return Err(ExperimentError::InsufficientRuns(0));
    };
    let names = first.column_names();
    if results.iter().any(|r| r.column_names() != names) {
        return Err(ExperimentError::InvalidConfig("runs disagree on test languages".into()));
    }
    let rows: Vec<Vec<f64>> = results.iter().map(RunResult::values).collect();
    (0..names.len())
        .map(|c| mean_std(&rows.iter().map(|r| r[c]).collect::<Vec<_>>()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config: StabilityConfig,
    pub stats: Vec<ColumnStat>,
}

/// The mean (std) table: one row per configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub columns: Vec<String>,
    pub rows: Vec<SummaryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySummary {
    pub table: SummaryTable,
    pub runs: Vec<RunResult>,
}

/// Trains the auxiliary model once: a fresh body with a head over the
/// auxiliary tag set.
pub fn pretrain_aux(
    encoder: &Encoder,
    tagset: &TagSet,
    snippets: &[Snippet],
    hidden: usize,
    config: &TrainConfig,
    seeds: Seeds,
) -> Result<ModelParameters, ExperimentError> {
    let dims = ModelDims::new(encoder.features.hash_dim, hidden, tagset.len())?;
    Ok(train(init_model(dims, seeds), encoder, tagset, snippets, &[], config, seeds)?.params)
}

fn aux_body(settings: &SuiteSettings, inputs: &SuiteInputs) -> Result<ModelParameters, ExperimentError> {
    match &inputs.aux {
        None => Err(ExperimentError::MissingCheckpoint),
        Some(AuxSource::Pretrained(p)) => Ok(p.clone()),
        Some(AuxSource::Corpus { tagset, snippets }) => {
            let base = seed::derive(settings.base_seed, "aux");
            let seeds = Seeds::new(
                seed::derive(base, "global"),
                seed::derive(base, "data-order"),
                seed::derive(base, "head-init"),
            );
            pretrain_aux(
                &inputs.encoder,
                tagset,
                snippets,
                settings.hidden,
                &settings.aux_train,
                seeds,
            )
        }
    }
}

/// One training of one configuration, scored on every split.
pub fn run_once(
    settings: &SuiteSettings,
    inputs: &SuiteInputs,
    aux: Option<&ModelParameters>,
    config: StabilityConfig,
    run_index: usize,
) -> Result<RunResult, ExperimentError> {
    let data = &inputs.data;
    if data.train.is_empty() {
        return Err(ExperimentError::EmptyDataset);
    }
    let seeds = config.run_seeds(settings.base_seed, run_index);
    let dims = ModelDims::new(inputs.encoder.features.hash_dim, settings.hidden, inputs.tagset.len())?;
    let initial = match config.mode {
        Mode::Normal => init_model(dims, seeds),
        Mode::Behavioral => {
            transfer_from_checkpoint(aux.ok_or(ExperimentError::MissingCheckpoint)?, dims, seeds.head_init)?
        }
    };
    let enc = &inputs.encoder;
    let ts = &inputs.tagset;
    let params = train(initial, enc, ts, &data.train, &[], &settings.train, seeds)?.params;
    let score = |s: &[Snippet]| evaluate_tagger(&params, enc, ts, s);
    let test = data
        .test
        .iter()
        .map(|l| Ok((l.language.clone(), score(&l.snippets)?)))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(RunResult {
        config,
        run_index,
        seeds,
        train: score(&data.train)?,
        eval: score(&data.eval)?,
        test,
    })
}

/// Runs `settings.n_runs` trainings of every configuration and tabulates
/// mean and standard deviation per configuration.
pub fn run_stability_suite(
    settings: &SuiteSettings,
    inputs: &SuiteInputs,
    configs: &[StabilityConfig],
) -> Result<StabilitySummary, ExperimentError> {
    if settings.n_runs < 2 {
        return Err(ExperimentError::InsufficientRuns(settings.n_runs));
    }
    if inputs.data.train.is_empty() {
        return Err(ExperimentError::EmptyDataset);
    }
    let aux = if configs.iter().any(|c| c.mode == Mode::Behavioral) {
        Some(aux_body(settings, inputs)?)
    } else {
        None
    };
    let mut runs = Vec::new();
    let mut rows = Vec::new();
    for &config in configs {
        let results = (0..settings.n_runs)
            .map(|i| run_once(settings, inputs, aux.as_ref(), config, i))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(SummaryRow {
            config,
            stats: summarize_runs(&results)?,
        });
        runs.extend(results);
    }
    Ok(StabilitySummary {
        table: SummaryTable {
            columns: column_names(inputs.data.languages()),
            rows,
        },
        runs,
    })
}

/// Plain-text table with `mean (std)` cells.
pub fn format_table(table: &SummaryTable) -> String {
    let mut out = format!("{:<12} {:<8} {:<8}", "mode", "data", "head");
    for c in &table.columns {
        out.push_str(&format!(" {c:>17}"));
    }
    out.push('\n');
    for row in &table.rows {
        out.push_str(&format!(
            "{:<12} {:<8} {:<8}",
            row.config.mode.as_str(),
            row.config.data_seed.as_str(),
            row.config.head_seed.as_str()
        ));
        for s in &row.stats {
            out.push_str(&format!(" {:>17}", format!("{:.4} ({:.4})", s.mean, s.std)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_configs() {
        let c = StabilityConfig::canonical();
        assert_eq!(c.len(), 6);
        assert!(c.iter().all(StabilityConfig::is_canonical));
        let ids: std::collections::BTreeSet<u64> = c.iter().map(StabilityConfig::id).collect();
        assert_eq!(ids.len(), 6);
        assert!(!StabilityConfig::new(Mode::Normal, SeedPolicy::Fixed, SeedPolicy::Fixed).is_canonical());
    }

    #[test]
    fn seed_policies() {
        let c = StabilityConfig::new(Mode::Normal, SeedPolicy::Fixed, SeedPolicy::Random);
        let (a, b) = (c.run_seeds(7, 0), c.run_seeds(7, 1));
        assert_eq!(a.data_order, b.data_order);
        assert_eq!(a.global, b.global);
        assert_ne!(a.head_init, b.head_init);
        let d = StabilityConfig::new(Mode::Normal, SeedPolicy::Random, SeedPolicy::Fixed);
        assert_eq!(d.run_seeds(7, 0).head_init, d.run_seeds(7, 5).head_init);
        assert_ne!(d.run_seeds(7, 0).data_order, d.run_seeds(7, 5).data_order);
        assert_eq!(c.run_seeds(7, 3), c.run_seeds(7, 3));
        assert_ne!(c.run_seeds(7, 3), c.run_seeds(8, 3));
    }

    #[test]
    fn mean_std_examples() {
        let s = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert_eq!(mean_std(&[0.4; 5]).unwrap().std, 0.0);
        assert!(matches!(mean_std(&[1.0]), Err(ExperimentError::InsufficientRuns(1))));
    }

    #[test]
    fn summarize_rejects_single_run() {
        let r = RunResult {
            config: StabilityConfig::canonical()[0],
            run_index: 0,
            seeds: Seeds::new(0, 0, 0),
            train: 1.0,
            eval: 0.5,
            test: vec![("en".into(), 0.5)],
        };
        assert!(matches!(
            summarize_runs(std::slice::from_ref(&r)),
            Err(ExperimentError::InsufficientRuns(1))
        ));
        let mut other = r.clone();
        other.train = 0.0;
        let s = summarize_runs(&[r, other]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].mean, 0.5);
        assert_eq!(s[1].std, 0.0);
    }
}

//! Seed-stability studies and hyperparameter search.
//!
//! The stability suite trains the tagger many times per configuration, with
//! either the batch order, the head initialisation, or both drawn afresh for
//! each run, and reports mean and standard deviation of macro-F1 per split.
//! Behavioral runs start from a body pretrained on an auxiliary NER corpus.

mod hpo;
mod report;
mod stability;
mod suite;

pub use hpo::{hpo_search, HpoPoint, HpoResult, HpoSpace, Sampler, Trial, HPO_COLUMNS, N_CANDIDATES};
pub use report::{
    export_summary, export_trials, summary_from_csv, summary_to_csv, trials_from_csv, trials_to_csv, RUNS_JSON,
    SUMMARY_CSV, TABLE_TXT, TRIALS_CSV, TRIALS_JSON,
};
pub use stability::{
    column_names, format_table, mean_std, pretrain_aux, run_once, run_stability_suite, summarize_runs, AuxSource,
    ColumnStat, DatasetBundle, LanguageSplit, Mode, RunResult, SeedPolicy, StabilityConfig, StabilitySummary,
    SuiteInputs, SuiteSettings, SummaryRow, SummaryTable, CANONICAL_POLICIES,
};
pub use suite::{AuxSpec, DataSource, SuiteSpec};

use thiserror::Error;

use crate::corpus::CorpusError;
use crate::model::ModelError;

#[derive(Debug, Error, PartialEq)]
pub enum ExperimentError {
    #[error("behavioral runs need an auxiliary checkpoint or corpus")]
    MissingCheckpoint,
    #[error("training data is empty")]
    EmptyDataset,
    #[error("need at least 2 runs for a standard deviation, got {0}")]
    InsufficientRuns(usize),
    #[error("invalid search space: {0}")]
    InvalidSpace(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

mod common;

use common::{corpus, encoder_for, ner_corpus, HASH_DIM};
use evtag::corpus::{Snippet, SplitSpec, TagSet};
use evtag::experiments::*;
use evtag::model::TrainConfig;
use proptest::prelude::*;

fn inputs(seed: u64) -> SuiteInputs {
    let en = corpus("en", 40, seed);
    let es = corpus("es", 15, seed + 1);
    let aux = ner_corpus(20, seed + 2);
    let all: Vec<Snippet> = en.iter().chain(&es).chain(&aux).cloned().collect();
    let data = DatasetBundle::from_languages(
        vec![
            LanguageSplit {
                language: "en".into(),
                snippets: en,
            },
            LanguageSplit {
                language: "es".into(),
                snippets: es,
            },
        ],
        &SplitSpec::development(seed),
    )
    .unwrap();
    SuiteInputs {
        encoder: encoder_for(&all, HASH_DIM),
        tagset: TagSet::event(),
        data,
        aux: Some(AuxSource::Corpus {
            tagset: TagSet::ner(),
            snippets: aux,
        }),
    }
}

fn settings(base_seed: u64, n_runs: usize) -> SuiteSettings {
    SuiteSettings {
        n_runs,
        base_seed,
        train: TrainConfig {
            epochs: 2,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        },
        aux_train: TrainConfig {
            epochs: 1,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        },
        hidden: 8,
    }
}

#[test]
fn canonical_suite_has_six_rows_in_table_shape() {
    let inputs = inputs(1);
    let summary = run_stability_suite(&settings(7, 3), &inputs, &StabilityConfig::canonical()).unwrap();
    let table = &summary.table;
    assert_eq!(table.rows.len(), 6);
    assert_eq!(table.columns, ["train", "eval", "test_en", "test_es"]);
    assert_eq!(summary.runs.len(), 18);
    for row in &table.rows {
        assert_eq!(row.stats.len(), 4);
        assert!(row.stats.iter().all(|s| s.std >= 0.0 && (0.0..=1.0).contains(&s.mean)));
    }
    let text = format_table(table);
    assert_eq!(text.lines().count(), 7);
    assert!(text.lines().skip(1).all(|l| l.matches(" (").count() == 4));

    let again = run_stability_suite(&settings(7, 3), &inputs, &StabilityConfig::canonical()).unwrap();
    assert_eq!(again, summary);
}

#[test]
fn fixed_fixed_diagnostic_has_zero_spread() {
    let inputs = inputs(2);
    let both_fixed = StabilityConfig::new(Mode::Normal, SeedPolicy::Fixed, SeedPolicy::Fixed);
    assert!(!both_fixed.is_canonical());
    let summary = run_stability_suite(&settings(3, 3), &inputs, &[both_fixed]).unwrap();
    assert!(summary.table.rows[0].stats.iter().all(|s| s.std == 0.0));
}

#[test]
fn policies_control_which_seeds_vary() {
    let base = 11;
    for &(data, head) in &CANONICAL_POLICIES {
        for mode in [Mode::Normal, Mode::Behavioral] {
            let c = StabilityConfig::new(mode, data, head);
            let seeds: Vec<_> = (0..4).map(|i| c.run_seeds(base, i)).collect();
            let distinct = |f: fn(&evtag::model::Seeds) -> u64| {
                seeds.iter().map(f).collect::<std::collections::BTreeSet<_>>().len()
            };
            assert_eq!(distinct(|s| s.global), 1);
            assert_eq!(
                distinct(|s| s.data_order),
                if data == SeedPolicy::Random { 4 } else { 1 }
            );
            assert_eq!(
                distinct(|s| s.head_init),
                if head == SeedPolicy::Random { 4 } else { 1 }
            );
        }
    }
}

#[test]
fn runs_do_not_depend_on_execution_order() {
    let inputs = inputs(3);
    let s = settings(5, 3);
    let config = StabilityConfig::new(Mode::Normal, SeedPolicy::Random, SeedPolicy::Random);
    let forward: Vec<_> = (0..3)
        .map(|i| run_once(&s, &inputs, None, config, i).unwrap())
        .collect();
    let mut backward: Vec<_> = (0..3)
        .rev()
        .map(|i| run_once(&s, &inputs, None, config, i).unwrap())
        .collect();
    backward.reverse();
    assert_eq!(forward, backward);
    let suite = run_stability_suite(&s, &inputs, &[config]).unwrap();
    assert_eq!(suite.runs, forward);
}

#[test]
fn behavioral_mode_without_auxiliary_source_fails() {
    let mut inputs = inputs(4);
    inputs.aux = None;
    let config = StabilityConfig::new(Mode::Behavioral, SeedPolicy::Random, SeedPolicy::Fixed);
    let err = run_stability_suite(&settings(1, 2), &inputs, &[config]).unwrap_err();
    assert!(matches!(err, ExperimentError::MissingCheckpoint), "{err:?}");
}

#[test]
fn a_single_run_is_rejected() {
    let inputs = inputs(5);
    let err = run_stability_suite(&settings(1, 1), &inputs, &StabilityConfig::canonical()).unwrap_err();
    assert!(matches!(err, ExperimentError::InsufficientRuns(1)));
}

fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

proptest! {
    #[test]
    fn summary_matches_two_pass_statistics(rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 2..30)) {
        let config = StabilityConfig::canonical()[0];
        let results: Vec<RunResult> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| RunResult {
                config,
                run_index: i,
                seeds: config.run_seeds(0, i),
                train: r[0],
                eval: r[1],
                test: vec![("en".into(), r[2]), ("es".into(), r[3])],
            })
            .collect();
        let stats = summarize_runs(&results).unwrap();
        for (c, s) in stats.iter().enumerate() {
            let (m, sd) = two_pass(&rows.iter().map(|r| r[c]).collect::<Vec<_>>());
            prop_assert!((s.mean - m).abs() <= 1e-12);
            prop_assert!((s.std - sd).abs() <= 1e-12);
        }
    }
}

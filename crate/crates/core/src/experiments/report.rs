//! CSV and JSON export of stability tables and search trials.
//!
//! Floats are written in Rust's shortest round-trip form, so parsing an
//! exported file gives back the exact values.

use std::fs;
use std::path::Path;

use super::hpo::{HpoPoint, HpoResult, HPO_COLUMNS};
use super::stability::{
    format_table, ColumnStat, Mode, SeedPolicy, StabilityConfig, StabilitySummary, SummaryRow, SummaryTable,
};
use super::ExperimentError;

pub const SUMMARY_CSV: &str = "summary.csv";
pub const RUNS_JSON: &str = "runs.json";
pub const TABLE_TXT: &str = "table.txt";
pub const TRIALS_CSV: &str = "trials.csv";
pub const TRIALS_JSON: &str = "trials.json";

fn csv_err(e: csv::Error) -> ExperimentError {
    ExperimentError::Csv(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

/// One row per configuration: mode, data policy, head policy, then mean and
/// std of each column.
pub fn summary_to_csv(table: &SummaryTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["mode".to_string(), "data_policy".into(), "head_policy".into()];
    for c in &table.columns {
        header.push(format!("{c}_mean"));
        header.push(format!("{c}_std"));
    }
    w.write_record(&header).expect("in-memory write");
    for row in &table.rows {
        let mut rec = vec![
            row.config.mode.as_str().to_string(),
            row.config.data_seed.as_str().into(),
            row.config.head_seed.as_str().into(),
        ];
        for s in &row.stats {
            rec.push(s.mean.to_string());
            rec.push(s.std.to_string());
        }
        w.write_record(&rec).expect("in-memory write");
    }
    finish(w)
}

fn parse_mode(s: &str) -> Result<Mode, ExperimentError> {
    match s {
        "normal" => Ok(Mode::Normal),
        "behavioral" => Ok(Mode::Behavioral),
        _ => Err(ExperimentError::Csv(format!("unknown mode `{s}`"))),
    }
}

fn parse_policy(s: &str) -> Result<SeedPolicy, ExperimentError> {
    match s {
        "fixed" => Ok(SeedPolicy::Fixed),
        "random" => Ok(SeedPolicy::Random),
        _ => Err(ExperimentError::Csv(format!("unknown seed policy `{s}`"))),
    }
}

fn parse_f64(s: &str) -> Result<f64, ExperimentError> {
    s.parse()
        .map_err(|_| ExperimentError::Csv(format!("not a number: `{s}`")))
}

pub fn summary_from_csv(text: &str) -> Result<SummaryTable, ExperimentError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    if header.len() < 3 || header[..3] != ["mode", "data_policy", "head_policy"] || header.len().is_multiple_of(2) {
        return Err(ExperimentError::Csv("unexpected summary header".into()));
    }
    let mut columns = Vec::new();
    for pair in header[3..].chunks(2) {
        let name = pair[0]
            .strip_suffix("_mean")
            .filter(|n| pair[1].strip_suffix("_std") == Some(*n))
            .ok_or_else(|| ExperimentError::Csv(format!("unpaired columns {pair:?}")))?;
        columns.push(name.to_string());
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let config = StabilityConfig::new(parse_mode(&rec[0])?, parse_policy(&rec[1])?, parse_policy(&rec[2])?);
        let values = rec.iter().skip(3).map(parse_f64).collect::<Result<Vec<_>, _>>()?;
        let stats = values.chunks(2).map(|p| ColumnStat { mean: p[0], std: p[1] }).collect();
        rows.push(SummaryRow { config, stats });
    }
    Ok(SummaryTable { columns, rows })
}

/// One row per trial, one column per hyperparameter, eval macro-F1 last.
pub fn trials_to_csv(result: &HpoResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = HPO_COLUMNS.to_vec();
    header.push("eval_macro_f1");
    w.write_record(&header).expect("in-memory write");
    for t in &result.trials {
        let p = &t.point;
        w.write_record([
            p.epochs.to_string(),
            p.weight_decay.to_string(),
            p.learning_rate.to_string(),
            p.adafactor.to_string(),
            p.adam_beta1.to_string(),
            p.adam_beta2.to_string(),
            p.adam_epsilon.to_string(),
            p.max_grad_norm.to_string(),
            t.eval_macro_f1.to_string(),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

/// Points and objective values from a trials CSV.
pub fn trials_from_csv(text: &str) -> Result<Vec<(HpoPoint, f64)>, ExperimentError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut expected: Vec<&str> = HPO_COLUMNS.to_vec();
    expected.push("eval_macro_f1");
    if header != expected {
        return Err(ExperimentError::Csv("unexpected trials header".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let epochs = rec[0]
                .parse()
                .map_err(|_| ExperimentError::Csv(format!("bad epochs `{}`", &rec[0])))?;
            let adafactor = rec[3]
                .parse()
                .map_err(|_| ExperimentError::Csv(format!("bad flag `{}`", &rec[3])))?;
            let point = HpoPoint {
                epochs,
                weight_decay: parse_f64(&rec[1])?,
                learning_rate: parse_f64(&rec[2])?,
                adafactor,
                adam_beta1: parse_f64(&rec[4])?,
                adam_beta2: parse_f64(&rec[5])?,
                adam_epsilon: parse_f64(&rec[6])?,
                max_grad_norm: parse_f64(&rec[7])?,
            };
            Ok((point, parse_f64(&rec[8])?))
        })
        .collect()
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), ExperimentError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|e| ExperimentError::Io(format!("{}: {e}", dir.display())))
}

/// Writes `summary.csv`, `runs.json` and the text table into `dir`.
pub fn export_summary(summary: &StabilitySummary, dir: &Path) -> Result<(), ExperimentError> {
    ensure_dir(dir)?;
    write(dir, SUMMARY_CSV, &summary_to_csv(&summary.table))?;
    write(
        dir,
        RUNS_JSON,
        &serde_json::to_string_pretty(summary).expect("summary serialises"),
    )?;
    write(dir, TABLE_TXT, &format_table(&summary.table))
}

/// Writes `trials.csv` and `trials.json` into `dir`.
pub fn export_trials(result: &HpoResult, dir: &Path) -> Result<(), ExperimentError> {
    ensure_dir(dir)?;
    write(dir, TRIALS_CSV, &trials_to_csv(result))?;
    write(
        dir,
        TRIALS_JSON,
        &serde_json::to_string_pretty(result).expect("trials serialise"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::hpo::{hpo_search, HpoSpace, Sampler};

    fn table() -> SummaryTable {
        SummaryTable {
            columns: vec!["train".into(), "eval".into(), "test_en".into()],
            rows: StabilityConfig::canonical()
                .into_iter()
                .enumerate()
                .map(|(i, config)| SummaryRow {
                    config,
                    stats: (0..3)
                        .map(|c| ColumnStat {
                            mean: 1.0 / (i + c + 3) as f64,
                            std: 0.1 / (i + 7) as f64,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn summary_round_trip() {
        let t = table();
        let csv = summary_to_csv(&t);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("mode,data_policy,head_policy,train_mean,train_std,eval_mean"));
        assert_eq!(summary_from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn trials_round_trip() {
        let r = hpo_search(&HpoSpace::default(), 30, 5, 9, Sampler::Tpe, |i, _| Ok(i as f64 / 30.0)).unwrap();
        let csv = trials_to_csv(&r);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap().split(',').count(), 9);
        assert_eq!(lines.count(), 30);
        let back = trials_from_csv(&csv).unwrap();
        let orig: Vec<(HpoPoint, f64)> = r.trials.iter().map(|t| (t.point, t.eval_macro_f1)).collect();
        assert_eq!(back, orig);
    }

    #[test]
    fn malformed_csv() {
        assert!(summary_from_csv("a,b\n").is_err());
        assert!(summary_from_csv("mode,data_policy,head_policy,x_mean,x_std\nsideways,fixed,fixed,1,0\n").is_err());
        assert!(trials_from_csv("epochs\n1\n").is_err());
    }
}

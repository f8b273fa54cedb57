//! Subcommand implementations.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use evtag::corpus::{
    generate_synthetic_corpus, make_splits, parse_classification_records, parse_conll, validate_conll, write_conll,
    ClassificationRecord, Snippet, SplitSpec, SynthProfile, TagSet,
};
use evtag::experiments::{
    export_summary, export_trials, format_table, hpo_search, run_stability_suite, HpoSpace, Sampler, SuiteSpec,
};
use evtag::metrics::entity_report;
use evtag::model::{
    classify_document, evaluate_tagger, init_model, predict_snippet, train as train_tagger, train_classifier,
    transfer_from_checkpoint, Checkpoint, Encoder, ModelDims, ModelParameters, Seeds, Task, TrainConfig, TrainOutcome,
};
use evtag::seed;
use evtag::window::SubwordVocab;
use serde::{Deserialize, Serialize};

use crate::config::{read_json, tagset_named, ProfileFile, RunConfig, TaskKind};
use crate::{SamplerArg, SeedTriple};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_snippets(path: &Path, tagset: &TagSet) -> Result<Vec<Snippet>> {
    parse_conll(&read(path)?, tagset).with_context(|| format!("parsing {}", path.display()))
}

fn read_records(path: &Path) -> Result<Vec<ClassificationRecord>> {
    parse_classification_records(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn read_vocab(path: &Path) -> Result<SubwordVocab> {
    SubwordVocab::parse(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn seeds(s: SeedTriple) -> Seeds {
    Seeds::new(s.0, s.1, s.2)
}

fn log_history(outcome: &TrainOutcome) {
    for h in &outcome.history {
        match h.eval_macro_f1 {
            Some(f1) => eprintln!("epoch {:>3}  loss {:.6}  eval macro-F1 {f1:.4}", h.epoch, h.train_loss),
            None => eprintln!("epoch {:>3}  loss {:.6}", h.epoch, h.train_loss),
        }
    }
}

pub fn validate(file: &Path, tagset: &str) -> Result<ExitCode> {
    let tagset = tagset_named(tagset)?;
    let text = read(file)?;
    let found = validate_conll(&text, &tagset).with_context(|| format!("parsing {}", file.display()))?;
    for f in &found {
        println!(
            "{}:{}: snippet {}: {}",
            file.display(),
            f.line,
            f.snippet_id,
            f.violation
        );
    }
    if found.is_empty() {
        eprintln!("{}: no BIO violations", file.display());
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{}: {} BIO violation(s)", file.display(), found.len());
        Ok(ExitCode::from(1))
    }
}

pub fn synth(profile: &Path, seed_value: u64, out: &Path) -> Result<ExitCode> {
    let profile: SynthProfile = read_json::<ProfileFile>(profile)?.profile()?;
    let snippets = generate_synthetic_corpus(&profile, seed_value);
    write(out, &write_conll(&snippets))?;
    eprintln!("wrote {} snippets to {}", snippets.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

/// A fresh or transferred model plus the encoder it is trained with.
fn prepare_model(
    rc: &RunConfig,
    n_outputs: usize,
    words: &mut dyn Iterator<Item = &str>,
    vocab: Option<&Path>,
    seeds: Seeds,
) -> Result<(ModelParameters, Encoder)> {
    if let Some(source) = &rc.init_from {
        ensure!(
            vocab.is_none(),
            "--vocab cannot be combined with `init_from`; the source checkpoint's vocabulary is used"
        );
        let ckpt = Checkpoint::load(source).with_context(|| format!("loading {}", source.display()))?;
        let dims = ckpt.params.dims.with_outputs(n_outputs);
        let params = transfer_from_checkpoint(&ckpt.params, dims, seeds.head_init)?;
        eprintln!("transferred body from {}", source.display());
        return Ok((params, ckpt.encoder));
    }
    let vocab = match vocab {
        Some(p) => read_vocab(p)?,
        None => SubwordVocab::from_words(words, rc.min_count()),
    };
    let features = rc.features()?;
    let encoder = Encoder::new(vocab, rc.window(), features)?;
    let dims = ModelDims::new(features.hash_dim, rc.hidden(), n_outputs)?;
    Ok((init_model(dims, seeds), encoder))
}

#[derive(Clone, Copy)]
struct TrainFiles<'a> {
    data: &'a Path,
    out: &'a Path,
    eval: Option<&'a Path>,
    vocab: Option<&'a Path>,
}

fn train_with(
    files: &TrainFiles,
    rc: &RunConfig,
    base: &TrainConfig,
    default_tagset: &str,
    s: SeedTriple,
) -> Result<ExitCode> {
    let TrainFiles { data, out, eval, vocab } = *files;
    let cfg = rc.train_config(base)?;
    let seeds = seeds(s);
    let ckpt = match rc.task {
        TaskKind::Tagging => {
            let tagset = tagset_named(rc.tagset.as_deref().unwrap_or(default_tagset))?;
            let train_set = read_snippets(data, &tagset)?;
            let eval_set = eval.map(|p| read_snippets(p, &tagset)).transpose()?.unwrap_or_default();
            let mut words = train_set.iter().flat_map(|s| s.words());
            let (params, encoder) = prepare_model(rc, tagset.len(), &mut words, vocab, seeds)?;
            let outcome = train_tagger(params, &encoder, &tagset, &train_set, &eval_set, &cfg, seeds)?;
            log_history(&outcome);
            Checkpoint::new(Task::Tagging { tagset }, encoder, outcome.params)?
        }
        TaskKind::Classification => {
            ensure!(rc.tagset.is_none(), "`tagset` does not apply to classification");
            let train_set = read_records(data)?;
            let eval_set = eval.map(read_records).transpose()?.unwrap_or_default();
            let mut words = train_set.iter().flat_map(|r| r.text.split_whitespace());
            let (params, encoder) = prepare_model(rc, 2, &mut words, vocab, seeds)?;
            let outcome = train_classifier(params, &encoder, &train_set, &eval_set, &cfg, seeds)?;
            log_history(&outcome);
            Checkpoint::new(Task::Classification, encoder, outcome.params)?
        }
    };
    ckpt.save(out)?;
    eprintln!("wrote checkpoint {}", out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn train(
    data: &Path,
    config: &Path,
    s: SeedTriple,
    out: &Path,
    eval: Option<&Path>,
    vocab: Option<&Path>,
) -> Result<ExitCode> {
    let rc: RunConfig = read_json(config)?;
    let files = TrainFiles { data, out, eval, vocab };
    train_with(&files, &rc, &TrainConfig::default(), "event", s)
}

/// One epoch at learning rate 1e-5 over the auxiliary corpus.
pub fn aux_defaults() -> TrainConfig {
    TrainConfig {
        epochs: 1,
        learning_rate: 1e-5,
        ..TrainConfig::default()
    }
}

pub fn pretrain_aux(
    data: &Path,
    out: &Path,
    config: Option<&Path>,
    s: SeedTriple,
    vocab: Option<&Path>,
) -> Result<ExitCode> {
    let rc = RunConfig::load(config)?;
    ensure!(rc.task == TaskKind::Tagging, "auxiliary pretraining is a tagging task");
    ensure!(
        rc.init_from.is_none(),
        "`init_from` does not apply to auxiliary pretraining"
    );
    let files = TrainFiles {
        data,
        out,
        eval: None,
        vocab,
    };
    train_with(&files, &rc, &aux_defaults(), "ner", s)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))
}

pub fn predict(ckpt: &Path, data: &Path, vocab: Option<&Path>, out: &Path) -> Result<ExitCode> {
    let ckpt = load_checkpoint(ckpt)?;
    let Task::Tagging { tagset } = &ckpt.task else {
        bail!("checkpoint holds a document classifier; use `classify`");
    };
    if let Some(v) = vocab {
        ensure!(
            read_vocab(v)? == ckpt.encoder.vocab,
            "vocabulary {} does not match the one stored in the checkpoint",
            v.display()
        );
    }
    let snippets = read_snippets(data, tagset)?;
    let predicted = snippets
        .iter()
        .map(|s| predict_snippet(&ckpt.params, &ckpt.encoder, tagset, s))
        .collect::<Result<Vec<_>, _>>()?;
    write(out, &write_conll(&predicted))?;
    eprintln!("tagged {} snippets into {}", predicted.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Deserialize)]
struct Document {
    id: String,
    text: String,
}

#[derive(Debug, Serialize)]
struct Classified<'a> {
    id: &'a str,
    label: usize,
    probs: [f64; 2],
}

pub fn classify(ckpt: &Path, data: &Path, out: &Path) -> Result<ExitCode> {
    let ckpt = load_checkpoint(ckpt)?;
    ensure!(
        ckpt.task == Task::Classification,
        "checkpoint holds a tagger; use `predict`"
    );
    let text = read(data)?;
    let mut lines = String::new();
    let mut n = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(line).with_context(|| format!("{}:{}: malformed record", data.display(), i + 1))?;
        let (label, probs) = classify_document(&ckpt.params, &ckpt.encoder, &doc.text)
            .with_context(|| format!("{}:{}: document `{}`", data.display(), i + 1, doc.id))?;
        lines.push_str(&serde_json::to_string(&Classified {
            id: &doc.id,
            label,
            probs,
        })?);
        lines.push('\n');
        n += 1;
    }
    write(out, &lines)?;
    eprintln!("classified {n} documents into {}", out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn score(gold: &Path, pred: &Path, json: Option<&Path>, tagset: &str) -> Result<ExitCode> {
    let tagset = tagset_named(tagset)?;
    let gold_set = read_snippets(gold, &tagset)?;
    let pred_set = read_snippets(pred, &tagset)?;
    ensure!(
        gold_set.len() == pred_set.len(),
        "{} gold snippets but {} predicted",
        gold_set.len(),
        pred_set.len()
    );
    let mut gold_seqs = Vec::new();
    let mut pred_seqs = Vec::new();
    for (g, p) in gold_set.iter().zip(&pred_set) {
        ensure!(
            g.id == p.id,
            "snippet order differs: gold `{}` vs predicted `{}`",
            g.id,
            p.id
        );
        ensure!(
            g.sentence_ranges() == p.sentence_ranges(),
            "snippet `{}`: sentence lengths differ between gold and prediction",
            g.id
        );
        gold_seqs.extend(g.gold_sequences());
        pred_seqs.extend(p.gold_sequences());
    }
    let report = entity_report(&gold_seqs, &pred_seqs)?;
    println!("{}", report.macro_f1);
    if let Some(path) = json {
        write(path, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn stability(config: &Path, out: &Path) -> Result<ExitCode> {
    let spec = SuiteSpec::parse(&read(config)?).with_context(|| format!("parsing {}", config.display()))?;
    let base_dir = config.parent().unwrap_or(Path::new("."));
    let inputs = spec.load_inputs(base_dir)?;
    let settings = spec.settings()?;
    let configs = spec.configs();
    eprintln!(
        "running {} configurations x {} runs on {} training snippets",
        configs.len(),
        settings.n_runs,
        inputs.data.train.len()
    );
    let summary = run_stability_suite(&settings, &inputs, &configs)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    export_summary(&summary, out)?;
    print!("{}", format_table(&summary.table));
    Ok(ExitCode::SUCCESS)
}

pub struct HpoArgs<'a> {
    pub space: &'a Path,
    pub trials: usize,
    pub init: usize,
    pub seed: u64,
    pub out: &'a Path,
    pub data: Option<&'a Path>,
    pub config: Option<&'a Path>,
    pub sampler: SamplerArg,
}

pub fn hpo(args: &HpoArgs) -> Result<ExitCode> {
    let space: HpoSpace = read_json(args.space)?;
    let rc = RunConfig::load(args.config)?;
    ensure!(rc.task == TaskKind::Tagging, "the search tunes a tagger");
    ensure!(rc.init_from.is_none(), "`init_from` is not supported by the search");
    let base = rc.train_config(&TrainConfig::default())?;
    let tagset = tagset_named(rc.tagset.as_deref().unwrap_or("event"))?;
    let snippets = match args.data {
        Some(p) => read_snippets(p, &tagset)?,
        None => generate_synthetic_corpus(
            &SynthProfile {
                language: "en".into(),
                n_snippets: 200,
                tagset: tagset.clone(),
            },
            seed::derive(args.seed, "corpus"),
        ),
    };
    let splits = make_splits(
        snippets.len(),
        &SplitSpec::development(seed::derive(args.seed, "split")),
    )?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| snippets[i].clone()).collect::<Vec<_>>();
    let (train_set, eval_set) = (pick(&splits.train), pick(&splits.eval));
    ensure!(
        !train_set.is_empty() && !eval_set.is_empty(),
        "too few snippets to split into train and eval"
    );
    let vocab = SubwordVocab::from_words(train_set.iter().flat_map(|s| s.words()), rc.min_count());
    let features = rc.features()?;
    let encoder = Encoder::new(vocab, rc.window(), features)?;
    let dims = ModelDims::new(features.hash_dim, rc.hidden(), tagset.len())?;
    let sampler = match args.sampler {
        SamplerArg::Tpe => Sampler::Tpe,
        SamplerArg::Random => Sampler::Random,
    };
    let result = hpo_search(&space, args.trials, args.init, args.seed, sampler, |i, point| {
        let seeds = Seeds::new(
            seed::derive_indexed(args.seed, "trial-global", &[i as u64]),
            seed::derive_indexed(args.seed, "trial-data", &[i as u64]),
            seed::derive_indexed(args.seed, "trial-head", &[i as u64]),
        );
        let cfg = point.apply(&base);
        let outcome = train_tagger(init_model(dims, seeds), &encoder, &tagset, &train_set, &[], &cfg, seeds)?;
        let f1 = evaluate_tagger(&outcome.params, &encoder, &tagset, &eval_set)?;
        eprintln!("trial {:>2}: eval macro-F1 {f1:.4}", i);
        Ok(f1)
    })?;
    fs::create_dir_all(args.out).with_context(|| format!("creating {}", args.out.display()))?;
    export_trials(&result, args.out)?;
    let best = result.best_trial();
    let summary = serde_json::json!({
        "trial": best.index,
        "point": best.point,
        "eval_macro_f1": best.eval_macro_f1,
    });
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}

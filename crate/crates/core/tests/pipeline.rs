mod common;

use common::{corpus, encoder_for, event_dims, ner_corpus, HASH_DIM};
use evtag::corpus::{build_batch_plan, validate_bio, ClassificationRecord, Sentence, Snippet, Tag, TagSet, Token};
use evtag::model::*;
use evtag::window::{make_windows, TokenProbabilities, WindowConfig};

fn quick_config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    }
}

#[test]
fn training_is_bit_reproducible() {
    let data = corpus("en", 30, 1);
    let enc = encoder_for(&data, HASH_DIM);
    let ts = TagSet::event();
    let seeds = Seeds::new(1, 2, 3);
    let run = || {
        train(
            init_model(event_dims(16), seeds),
            &enc,
            &ts,
            &data[..20],
            &data[20..],
            &quick_config(3),
            seeds,
        )
        .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.history.len(), 3);
    let bits = |o: &TrainOutcome| {
        let mut v: Vec<u64> = o.params.body.as_slice().iter().map(|x| x.to_bits()).collect();
        v.extend(o.params.head.weights.as_slice().iter().map(|x| x.to_bits()));
        v.extend(o.history.iter().map(|h| h.train_loss.to_bits()));
        v
    };
    assert_eq!(bits(&a), bits(&b));
    assert_eq!(a.history, b.history);
    assert!(a.history.iter().all(|h| h.eval_macro_f1.is_some()));
}

#[test]
fn each_seed_changes_the_outcome() {
    let data = corpus("en", 20, 4);
    let enc = encoder_for(&data, HASH_DIM);
    let ts = TagSet::event();
    let run = |s: Seeds| {
        train(init_model(event_dims(8), s), &enc, &ts, &data, &[], &quick_config(1), s)
            .unwrap()
            .params
    };
    let base = run(Seeds::new(1, 2, 3));
    assert_ne!(base, run(Seeds::new(9, 2, 3)));
    assert_ne!(base, run(Seeds::new(1, 9, 3)));
    assert_ne!(base, run(Seeds::new(1, 2, 9)));
}

#[test]
fn zero_epochs_returns_initial_parameters() {
    let data = corpus("en", 5, 1);
    let enc = encoder_for(&data, HASH_DIM);
    let seeds = Seeds::new(1, 2, 3);
    let init = init_model(event_dims(8), seeds);
    let out = train(
        init.clone(),
        &enc,
        &TagSet::event(),
        &data,
        &data,
        &quick_config(0),
        seeds,
    )
    .unwrap();
    assert_eq!(out.params, init);
    assert!(out.history.is_empty());
}

#[test]
fn empty_training_data_is_an_error() {
    let data = corpus("en", 5, 1);
    let enc = encoder_for(&data, HASH_DIM);
    let seeds = Seeds::new(1, 2, 3);
    let err = train(
        init_model(event_dims(8), seeds),
        &enc,
        &TagSet::event(),
        &[],
        &[],
        &quick_config(1),
        seeds,
    );
    assert_eq!(err.unwrap_err(), ModelError::EmptyDataset);
}

#[test]
fn seed_isolation() {
    let dims = event_dims(8);
    let indices: Vec<usize> = (0..50).collect();
    let a = Seeds::new(1, 2, 3);
    let head_changed = Seeds { head_init: 99, ..a };
    let data_changed = Seeds { data_order: 99, ..a };
    let plan = |s: Seeds| build_batch_plan(&indices, 4, s.data_order).unwrap();
    assert_eq!(plan(a), plan(head_changed));
    assert_ne!(plan(a), plan(data_changed));
    assert_eq!(init_model(dims, a), init_model(dims, data_changed));
    assert_ne!(init_model(dims, a).head, init_model(dims, head_changed).head);
}

#[test]
fn cross_entropy_fits_a_small_batch() {
    let data = corpus("en", 4, 5);
    let enc = encoder_for(&data, HASH_DIM);
    let seeds = Seeds::new(5, 6, 7);
    let cfg = TrainConfig {
        epochs: 1000,
        learning_rate: 1e-2,
        use_adafactor: false,
        weight_decay: 0.0,
        dropout: 0.0,
        max_grad_norm: 10.0,
        batch_size: 4,
        loss_kind: LossKind::CrossEntropy,
        ..TrainConfig::default()
    };
    let out = train(
        init_model(event_dims(16), seeds),
        &enc,
        &TagSet::event(),
        &data,
        &[],
        &cfg,
        seeds,
    )
    .unwrap();
    let last = out.history.last().unwrap().train_loss;
    assert!(last < 1e-3, "final loss {last}");
    assert_eq!(
        evaluate_tagger(&out.params, &enc, &TagSet::event(), &data).unwrap(),
        1.0
    );
}

fn trained_tagger() -> (ModelParameters, Encoder, TagSet) {
    let data = corpus("en", 40, 8);
    let enc = encoder_for(&data, HASH_DIM);
    let ts = TagSet::event();
    let seeds = Seeds::new(8, 8, 8);
    let out = train(
        init_model(event_dims(16), seeds),
        &enc,
        &ts,
        &data,
        &[],
        &quick_config(5),
        seeds,
    )
    .unwrap();
    (out.params, enc, ts)
}

#[test]
fn short_input_matches_single_window_path() {
    let (params, enc, ts) = trained_tagger();
    let words = ["Workers", "protested", "in", "Chennai", "on", "Monday", "."];
    let enc_words = enc.encode(&words);
    assert_eq!(enc_words.windows.len(), 1);
    let probs = token_probabilities(&params, &enc_words.features[0]).unwrap();
    let direct: Vec<Tag> = enc_words
        .alignment
        .first_positions()
        .iter()
        .map(|&p| ts.tag_at(evtag::argmax(probs.row(p)).unwrap()))
        .collect();
    assert_eq!(
        predict_tags(&params, &enc, &ts, &words).unwrap(),
        evtag::corpus::repair_bio(&direct)
    );
}

#[test]
fn long_input_uses_overlapping_windows_and_valid_bio() {
    let (params, enc, ts) = trained_tagger();
    let words: Vec<String> = (0..1500)
        .map(|i| ["students", "marched", "near", "City", "Hall", "in", "Pune", "."][i % 8].to_string())
        .collect();
    let encoded = enc.encode(&words);
    assert!(encoded.windows.len() >= 3);
    let mut cover = vec![0; encoded.alignment.len()];
    for w in &encoded.windows {
        for p in w.clone() {
            cover[p] += 1;
        }
    }
    assert!(cover.iter().all(|&c| (1..=2).contains(&c)));
    let tags = predict_tags(&params, &enc, &ts, &words).unwrap();
    assert_eq!(tags.len(), words.len());
    assert!(validate_bio(&tags).is_empty());
    assert_eq!(tags, predict_tags(&params, &enc, &ts, &words).unwrap());
}

#[test]
fn window_probabilities_are_stochastic() {
    let (params, enc, _) = trained_tagger();
    let encoded = enc.encode(&["Farmers", "rallied", "."]);
    let probs = token_probabilities(&params, &encoded.features[0]).unwrap();
    TokenProbabilities::new(probs).unwrap();
}

#[test]
fn predicted_snippet_keeps_structure() {
    let (params, enc, ts) = trained_tagger();
    let s = &corpus("en", 1, 77)[0];
    let p = predict_snippet(&params, &enc, &ts, s).unwrap();
    assert_eq!(p.id, s.id);
    assert_eq!(p.words(), s.words());
    assert_eq!(p.sentence_ranges(), s.sentence_ranges());
}

#[test]
fn tagger_checkpoint_round_trip_predicts_identically() {
    let (params, enc, ts) = trained_tagger();
    let ckpt = Checkpoint::new(Task::Tagging { tagset: ts.clone() }, enc, params).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);
    let s = &corpus("en", 3, 9)[2];
    let predict = |c: &Checkpoint| predict_tags(&c.params, &c.encoder, &ts, &s.words()).unwrap();
    assert_eq!(predict(&ckpt), predict(&back));
}

#[test]
fn behavioral_transfer_from_auxiliary_model() {
    let aux_data = ner_corpus(30, 3);
    let target = corpus("en", 30, 3);
    let all: Vec<Snippet> = aux_data.iter().chain(&target).cloned().collect();
    let enc = encoder_for(&all, HASH_DIM);
    let ner = TagSet::ner();
    let seeds = Seeds::new(1, 1, 1);
    let aux_dims = ModelDims::new(HASH_DIM, 16, ner.len()).unwrap();
    assert_eq!(aux_dims.n_outputs, 7);
    let aux = train(
        init_model(aux_dims, seeds),
        &enc,
        &ner,
        &aux_data,
        &[],
        &quick_config(1),
        seeds,
    )
    .unwrap()
    .params;

    let moved = transfer_from_checkpoint(&aux, aux_dims.with_outputs(15), 42).unwrap();
    assert_eq!(moved.body, aux.body);
    assert_eq!(moved.head, init_head(16, 15, 42));
    let tuned = train(
        moved,
        &enc,
        &TagSet::event(),
        &target,
        &[],
        &quick_config(1),
        Seeds::new(1, 2, 42),
    )
    .unwrap();
    assert_eq!(tuned.params.dims.n_outputs, 15);
}

fn doc_records() -> Vec<ClassificationRecord> {
    let pos = "police said workers protested outside the plant on monday";
    let neg = "the company reported higher quarterly profits and new products";
    (0..40)
        .map(|i| ClassificationRecord {
            id: format!("d{i}"),
            text: if i % 2 == 0 { pos.to_string() } else { neg.to_string() },
            label: u8::from(i % 2 == 0),
        })
        .collect()
}

fn classifier_encoder(records: &[ClassificationRecord]) -> Encoder {
    let snippets: Vec<Snippet> = records
        .iter()
        .map(|r| Snippet {
            id: r.id.clone(),
            sentences: vec![Sentence {
                tokens: r
                    .text
                    .split_whitespace()
                    .map(|w| Token {
                        text: w.into(),
                        gold: None,
                    })
                    .collect(),
            }],
        })
        .collect();
    encoder_for(&snippets, HASH_DIM)
}

#[test]
fn classifier_learns_and_classifies_long_documents() {
    let records = doc_records();
    let enc = classifier_encoder(&records);
    let seeds = Seeds::new(3, 3, 3);
    let dims = ModelDims::new(HASH_DIM, 16, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        learning_rate: 1e-2,
        loss_kind: LossKind::CrossEntropy,
        ..TrainConfig::default()
    };
    let out = train_classifier(init_model(dims, seeds), &enc, &records, &records, &cfg, seeds).unwrap();
    assert_eq!(out.history.last().unwrap().eval_macro_f1, Some(1.0));

    let p = &out.params;
    let short = &records[0].text;
    let (label, probs) = classify_document(p, &enc, short).unwrap();
    assert_eq!(label, 1);
    let encoded = enc.encode(&short.split_whitespace().collect::<Vec<_>>());
    assert_eq!(encoded.windows.len(), 1);
    let single = pooled_probabilities(p, &encoded.word_features()[0]).unwrap();
    assert_eq!(probs.to_vec(), single);

    // Many copies of the same sentence span several windows; the label holds.
    let long = std::iter::repeat_n(short.as_str(), 120).collect::<Vec<_>>().join(" ");
    assert!(enc.encode(&long.split_whitespace().collect::<Vec<_>>()).windows.len() > 1);
    assert_eq!(classify_document(p, &enc, &long).unwrap().0, 1);
    assert_eq!(classify_document(p, &enc, "   "), Err(ModelError::EmptyDocument));
}

#[test]
fn classification_requires_binary_head() {
    let records = doc_records();
    let enc = classifier_encoder(&records);
    let p = init_model(ModelDims::new(HASH_DIM, 4, 15).unwrap(), Seeds::new(0, 0, 0));
    assert!(matches!(
        classify_document(&p, &enc, "a b"),
        Err(ModelError::DimMismatch(_))
    ));
}

#[test]
fn window_config_is_part_of_the_encoder() {
    let data = corpus("en", 2, 1);
    let mut enc = encoder_for(&data, HASH_DIM);
    enc.window = WindowConfig::new(8, 3).unwrap();
    let words = data[0].words();
    let encoded = enc.encode(&words);
    assert_eq!(encoded.windows, make_windows(encoded.alignment.len(), &enc.window));
}

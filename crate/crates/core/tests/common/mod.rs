#![allow(dead_code)]

use evtag::corpus::{generate_synthetic_corpus, Snippet, SynthProfile, TagSet};
use evtag::model::{Encoder, FeatureConfig, ModelDims};
use evtag::window::{SubwordVocab, WindowConfig};

pub const HASH_DIM: usize = 1 << 12;

pub fn corpus(language: &str, n: usize, seed: u64) -> Vec<Snippet> {
    generate_synthetic_corpus(&SynthProfile::event(language, n), seed)
}

pub fn ner_corpus(n: usize, seed: u64) -> Vec<Snippet> {
    generate_synthetic_corpus(&SynthProfile::ner("en", n), seed)
}

pub fn encoder_for(snippets: &[Snippet], hash_dim: usize) -> Encoder {
    let vocab = SubwordVocab::from_words(snippets.iter().flat_map(|s| s.words()), 1);
    Encoder::new(vocab, WindowConfig::default(), FeatureConfig::new(2, hash_dim).unwrap()).unwrap()
}

pub fn event_dims(hidden: usize) -> ModelDims {
    ModelDims::new(HASH_DIM, hidden, TagSet::event().len()).unwrap()
}

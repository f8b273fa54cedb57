use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::corpus::{validate_bio, Tag};

/// A half-open run of words `[start, end)` of one class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntitySpan {
    pub class: String,
    pub start: usize,
    pub end: usize,
}

/// Reads the maximal `B-c I-c*` runs of a valid BIO sequence.
pub fn decode_entities(tags: &[Tag]) -> Result<BTreeSet<EntitySpan>, MetricsError> {
    if let Some(v) = validate_bio(tags).first() {
        return Err(MetricsError::InvalidBio { index: v.index });
    }
    let mut spans = BTreeSet::new();
    let mut open: Option<(&str, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Tag::Inside(_) => continue,
            Tag::Begin(c) => {
                if let Some((class, start)) = open.take() {
                    spans.insert(EntitySpan {
                        class: class.into(),
                        start,
                        end: i,
                    });
                }
                open = Some((c, i));
            }
            Tag::Outside => {
                if let Some((class, start)) = open.take() {
                    spans.insert(EntitySpan {
                        class: class.into(),
                        start,
                        end: i,
                    });
                }
            }
        }
    }
    if let Some((class, start)) = open {
        spans.insert(EntitySpan {
            class: class.into(),
            start,
            end: tags.len(),
        });
    }
    Ok(spans)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ClassScore {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityReport {
    pub per_class: BTreeMap<String, ClassScore>,
    pub macro_f1: f64,
    pub micro_f1: f64,
}

/// Exact-match entity scores over aligned gold and predicted tag sequences.
///
/// The macro average runs over every class present in gold or predictions.
pub fn entity_report(gold: &[Vec<Tag>], pred: &[Vec<Tag>]) -> Result<EntityReport, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch(format!(
            "{} gold sequences, {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (k, (g, p)) in gold.iter().zip(pred).enumerate() {
        if g.len() != p.len() {
            return Err(MetricsError::LengthMismatch(format!(
                "sequence {k}: {} gold tags, {} predicted",
                g.len(),
                p.len()
            )));
        }
        let gs = decode_entities(g)?;
        let ps = decode_entities(p)?;
        for span in &ps {
            let entry = counts.entry(span.class.clone()).or_default();
            if gs.contains(span) {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
        for span in gs.difference(&ps) {
            counts.entry(span.class.clone()).or_default().2 += 1;
        }
    }
    if counts.is_empty() {
        return Err(MetricsError::EmptyEvaluation);
    }
    let per_class: BTreeMap<String, ClassScore> = counts
        .iter()
        .map(|(c, &(tp, fp, fn_))| (c.clone(), ClassScore::from_counts(tp, fp, fn_)))
        .collect();
    let macro_f1 = per_class.values().map(|s| s.f1).sum::<f64>() / per_class.len() as f64;
    let (tp, fp, fn_) = counts
        .values()
        .fold((0, 0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let micro_f1 = ClassScore::from_counts(tp, fp, fn_).f1;
    Ok(EntityReport {
        per_class,
        macro_f1,
        micro_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{repair_bio, TagSet};
    use proptest::prelude::*;

    fn tags(s: &str) -> Vec<Tag> {
        s.split_whitespace().map(|t| t.parse().unwrap()).collect()
    }

    fn span(c: &str, s: usize, e: usize) -> EntitySpan {
        EntitySpan {
            class: c.into(),
            start: s,
            end: e,
        }
    }

    #[test]
    fn decode_examples() {
        let d = decode_entities(&tags("B-trigger I-trigger O B-place")).unwrap();
        assert_eq!(d, [span("trigger", 0, 2), span("place", 3, 4)].into_iter().collect());
        assert!(decode_entities(&tags("O O O")).unwrap().is_empty());
        let d = decode_entities(&tags("B-time B-time")).unwrap();
        assert_eq!(d, [span("time", 0, 1), span("time", 1, 2)].into_iter().collect());
        assert_eq!(
            decode_entities(&tags("O I-time")),
            Err(MetricsError::InvalidBio { index: 1 })
        );
    }

    #[test]
    fn perfect_prediction() {
        let g = vec![tags("B-trigger I-trigger O B-place"), tags("B-time O")];
        let r = entity_report(&g, &g).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.micro_f1, 1.0);
        assert!(r.per_class.values().all(|s| s.f1 == 1.0));
    }

    #[test]
    fn spurious_class_halves_macro() {
        // gold {(trigger,0,2)}, pred {(trigger,0,2),(place,3,4)}
        let g = vec![tags("B-trigger I-trigger O O")];
        let p = vec![tags("B-trigger I-trigger O B-place")];
        let r = entity_report(&g, &p).unwrap();
        assert_eq!(r.per_class["trigger"].f1, 1.0);
        assert_eq!(r.per_class["place"], ClassScore::from_counts(0, 1, 0));
        assert_eq!(r.per_class["place"].f1, 0.0);
        assert_eq!(r.macro_f1, 0.5);
        // micro: tp 1, fp 1, fn 0 -> P 0.5, R 1, F 2/3
        assert!((r.micro_f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_mismatch_is_both_fp_and_fn() {
        let r = entity_report(&[tags("B-trigger I-trigger")], &[tags("B-trigger O")]).unwrap();
        let s = r.per_class["trigger"];
        assert_eq!((s.tp, s.fp, s.fn_), (0, 1, 1));
        assert_eq!(s.f1, 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            entity_report(&[tags("O")], &[]),
            Err(MetricsError::LengthMismatch(_))
        ));
        assert!(matches!(
            entity_report(&[tags("O")], &[tags("O O")]),
            Err(MetricsError::LengthMismatch(_))
        ));
        assert_eq!(
            entity_report(&[tags("O O")], &[tags("O O")]),
            Err(MetricsError::EmptyEvaluation)
        );
    }

    #[test]
    fn json_shape() {
        let r = entity_report(&[tags("B-time")], &[tags("B-time")]).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for key in ["tp", "fp", "fn", "precision", "recall", "f1"] {
            assert!(v["per_class"]["time"].get(key).is_some(), "{key}");
        }
        assert!(v.get("macro_f1").is_some() && v.get("micro_f1").is_some());
    }

    /// Brute force: enumerate every (start, end) window and read it as an entity
    /// iff it starts with B-c, continues with I-c and is not followed by I-c.
    fn brute_spans(t: &[Tag]) -> Vec<EntitySpan> {
        let mut out = vec![];
        for s in 0..t.len() {
            for e in s + 1..=t.len() {
                let Tag::Begin(c) = &t[s] else { continue };
                let inner = t[s + 1..e].iter().all(|x| *x == Tag::Inside(c.clone()));
                let closed = e == t.len() || t[e] != Tag::Inside(c.clone());
                if inner && closed {
                    out.push(span(c, s, e));
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn matches_brute_force_decoder(ix in prop::collection::vec(0usize..15, 0..30)) {
            let ts = TagSet::event();
            let t = repair_bio(&ix.iter().map(|&i| ts.tag_at(i)).collect::<Vec<_>>());
            let fast: Vec<EntitySpan> = decode_entities(&t).unwrap().into_iter().collect();
            let mut slow = brute_spans(&t);
            slow.sort();
            prop_assert_eq!(fast, slow);
        }
    }
}

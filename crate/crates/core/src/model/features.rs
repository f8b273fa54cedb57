//! Hashed lexical features.
//!
//! Each unit (a word or a subword piece) maps to a small set of feature ids:
//! its lowercased form, a three-character prefix and suffix, its
//! capitalisation shape, the lowercased neighbours within `radius` tagged with
//! their relative offset, and a bias feature. Names are hashed with FNV-1a and
//! folded into `hash_dim` buckets.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::seed::fnv1a;

pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_HASH_DIM: usize = 1 << 18;

const PAD_LEFT: &str = "<s>";
const PAD_RIGHT: &str = "</s>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub radius: usize,
    pub hash_dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            radius: DEFAULT_RADIUS,
            hash_dim: DEFAULT_HASH_DIM,
        }
    }
}

impl FeatureConfig {
    pub fn new(radius: usize, hash_dim: usize) -> Result<Self, ModelError> {
        let cfg = Self { radius, hash_dim };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.hash_dim.is_power_of_two() || self.hash_dim > 1 << 32 {
            return Err(ModelError::InvalidConfig(format!(
                "hash_dim {} is not a power of two up to 2^32",
                self.hash_dim
            )));
        }
        Ok(())
    }

    /// Bucket of one feature name.
    pub fn bucket(&self, name: &str) -> u32 {
        (fnv1a(name.as_bytes()) & (self.hash_dim as u64 - 1)) as u32
    }
}

/// Capitalisation shape with runs collapsed: "Police" -> "Xx", "2021" -> "d".
pub fn shape(unit: &str) -> String {
    let mut out = String::new();
    for ch in unit.chars() {
        let class = if ch.is_uppercase() {
            'X'
        } else if ch.is_lowercase() {
            'x'
        } else if ch.is_numeric() {
            'd'
        } else {
            ch
        };
        if !out.ends_with(class) {
            out.push(class);
        }
    }
    out
}

fn affixes(lower: &str) -> (String, String) {
    let body: Vec<char> = lower.strip_prefix("##").unwrap_or(lower).chars().collect();
    let k = body.len().min(3);
    (body[..k].iter().collect(), body[body.len() - k..].iter().collect())
}

/// Feature names of unit `i`, before hashing.
pub fn feature_names<S: AsRef<str>>(units: &[S], i: usize, radius: usize) -> Vec<String> {
    let unit = units[i].as_ref();
    let lower = unit.to_lowercase();
    let (prefix, suffix) = affixes(&lower);
    let mut names = vec![
        format!("w={lower}"),
        format!("p3={prefix}"),
        format!("s3={suffix}"),
        format!("shape={}", shape(unit)),
        "bias".to_string(),
    ];
    for d in 1..=radius {
        let left = i
            .checked_sub(d)
            .map_or(PAD_LEFT.to_string(), |j| units[j].as_ref().to_lowercase());
        let right = units
            .get(i + d)
            .map_or(PAD_RIGHT.to_string(), |u| u.as_ref().to_lowercase());
        names.push(format!("w[-{d}]={left}"));
        names.push(format!("w[+{d}]={right}"));
    }
    names
}

/// Hashed feature ids for every unit of a sequence. Ids may repeat when two
/// names collide; repeats are kept so every unit has the same number of ids.
pub fn extract_features<S: AsRef<str>>(units: &[S], cfg: &FeatureConfig) -> Vec<Vec<u32>> {
    (0..units.len())
        .map(|i| {
            feature_names(units, i, cfg.radius)
                .iter()
                .map(|n| cfg.bucket(n))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        assert_eq!(shape("Police"), "Xx");
        assert_eq!(shape("police"), "x");
        assert_eq!(shape("NATO"), "X");
        assert_eq!(shape("2021"), "d");
        assert_eq!(shape("##ed"), "#x");
        assert_eq!(shape("McDonald"), "XxXx");
    }

    #[test]
    fn deterministic_and_in_range() {
        let cfg = FeatureConfig::new(2, 1 << 10).unwrap();
        let words = ["Police", "marched", "in", "Chennai", "."];
        let a = extract_features(&words, &cfg);
        let b = extract_features(&words, &cfg);
        assert_eq!(a, b);
        assert!(a.iter().flatten().all(|&id| (id as usize) < cfg.hash_dim));
        assert!(a.iter().all(|ids| ids.len() == 5 + 2 * cfg.radius));
    }

    #[test]
    fn same_word_same_context_same_ids() {
        let cfg = FeatureConfig::default();
        let f = extract_features(&["a", "b", "x", "c", "d", "a", "b", "x", "c", "d"], &cfg);
        assert_eq!(f[2], f[7]);
    }

    #[test]
    fn capitalisation_changes_only_shape() {
        let cfg = FeatureConfig::default();
        let upper = extract_features(&["the", "Police", "came"], &cfg);
        let lower = extract_features(&["the", "police", "came"], &cfg);
        let differing: Vec<usize> = (0..upper[1].len()).filter(|&k| upper[1][k] != lower[1][k]).collect();
        assert_eq!(differing, vec![3]);
        assert_eq!(upper[1][3], cfg.bucket("shape=Xx"));
        assert_eq!(lower[1][3], cfg.bucket("shape=x"));
        // Neighbours see the lowercased form, so their ids do not move.
        assert_eq!(upper[0], lower[0]);
        assert_eq!(upper[2], lower[2]);
    }

    #[test]
    fn ids_are_the_hashed_names() {
        let cfg = FeatureConfig::new(1, 1 << 12).unwrap();
        let f = extract_features(&["Strike"], &cfg);
        let expected: Vec<u32> = [
            "w=strike",
            "p3=str",
            "s3=ike",
            "shape=Xx",
            "bias",
            "w[-1]=<s>",
            "w[+1]=</s>",
        ]
        .iter()
        .map(|n| (fnv1a(n.as_bytes()) % (1 << 12)) as u32)
        .collect();
        assert_eq!(f[0], expected);
    }

    #[test]
    fn continuation_pieces_strip_marker_for_affixes() {
        let names = feature_names(&["protest", "##ers"], 1, 0);
        assert_eq!(&names[..3], &["w=##ers", "p3=ers", "s3=ers"]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(FeatureConfig::new(2, 1000).is_err());
    }
}

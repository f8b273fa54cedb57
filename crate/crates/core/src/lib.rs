//! Event-information extraction toolkit.
//!
//! The crate is organised around the path a snippet takes through the system:
//!
//! - [`corpus`]: BIO tag sets, snippet files, classification records, splits,
//!   batch plans and a synthetic corpus generator.
//! - [`window`]: subword alignment, sliding windows over long inputs and
//!   merging of overlapping window predictions.
//! - [`metrics`]: entity-level exact-match scoring and the soft macro-F1 loss
//!   with its analytic gradient.
//! - [`model`]: a small hashed-feature token classifier with a separable
//!   prediction head, AdamW / Adafactor, checkpoints and head-reset transfer.
//! - [`experiments`]: seeded stability suites and hyperparameter search.

pub mod corpus;
pub mod experiments;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod seed;
pub mod window;

pub use matrix::Matrix;

/// Index of the largest value; ties go to the lower index.
///
/// Returns `None` for an empty slice.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::argmax;

    #[test]
    fn argmax_prefers_lower_index_on_ties() {
        assert_eq!(argmax(&[0.5, 0.5]), Some(0));
        assert_eq!(argmax(&[0.1, 0.7, 0.7]), Some(1));
        assert_eq!(argmax(&[]), None);
    }
}

//! Seeded train/eval/test partitions and fixed batch plans.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::CorpusError;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// `(train, eval, test)` fractions.
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, eval: f64, test: f64, seed: u64) -> Result<Self, CorpusError> {
        let spec = Self {
            ratios: (train, eval, test),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 60 / 20 / 20, the partition used for the development experiments.
    pub fn development(seed: u64) -> Self {
        Self {
            ratios: (0.6, 0.2, 0.2),
            seed,
        }
    }

    /// 80 / 20 / 0, the partition used before final submission.
    pub fn submission(seed: u64) -> Self {
        Self {
            ratios: (0.8, 0.2, 0.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let (a, b, c) = self.ratios;
        let ok = [a, b, c].iter().all(|r| r.is_finite() && *r >= 0.0) && ((a + b + c) - 1.0).abs() <= 1e-12;
        if ok {
            Ok(())
        } else {
            Err(CorpusError::InvalidRatios(self.ratios))
        }
    }

    /// `(train, eval, test)` sizes for `n` items.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
        let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let train = floor(self.ratios.0).min(n);
        let eval = floor(self.ratios.1).min(n - train);
        (train, eval, n - train - eval)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n_items` with `spec.seed` and cuts it into train, eval and
/// test. Each list is returned in ascending order.
pub fn make_splits(n_items: usize, spec: &SplitSpec) -> Result<Splits, CorpusError> {
    spec.validate()?;
    if n_items == 0 {
        return Err(CorpusError::EmptyCollection);
    }
    let mut order: Vec<usize> = (0..n_items).collect();
    order.shuffle(&mut seed::rng(seed::derive(spec.seed, "split")));
    let (n_train, n_eval, _) = spec.sizes(n_items);
    let sorted = |r: &[usize]| {
        let mut v = r.to_vec();
        v.sort_unstable();
        v
    };
    Ok(Splits {
        train: sorted(&order[..n_train]),
        eval: sorted(&order[n_train..n_train + n_eval]),
        test: sorted(&order[n_train + n_eval..]),
    })
}

/// Splits consecutive groups (e.g. languages) of the given sizes.
///
/// With `stratified`, each group is split on its own and the pieces are
/// concatenated, so every group keeps its share of eval and test items. Without
/// it, the concatenation is split as one collection. Indices refer to the
/// concatenation. The per-group `Splits` are returned alongside the combined one.
pub fn split_by_group(
    group_sizes: &[usize],
    spec: &SplitSpec,
    stratified: bool,
) -> Result<(Splits, Vec<Splits>), CorpusError> {
    let total: usize = group_sizes.iter().sum();
    if total == 0 {
        return Err(CorpusError::EmptyCollection);
    }
    let mut offsets = Vec::with_capacity(group_sizes.len());
    let mut acc = 0;
    for &n in group_sizes {
        offsets.push(acc);
        acc += n;
    }

    let per_group: Vec<Splits> = if stratified {
        let mut out = Vec::new();
        for (g, (&n, &off)) in group_sizes.iter().zip(&offsets).enumerate() {
            if n == 0 {
                out.push(Splits {
                    train: vec![],
                    eval: vec![],
                    test: vec![],
                });
                continue;
            }
            let sub = SplitSpec {
                ratios: spec.ratios,
                seed: seed::derive_indexed(spec.seed, "group", &[g as u64]),
            };
            let s = make_splits(n, &sub)?;
            let shift = |v: Vec<usize>| v.into_iter().map(|i| i + off).collect();
            out.push(Splits {
                train: shift(s.train),
                eval: shift(s.eval),
                test: shift(s.test),
            });
        }
        out
    } else {
        let whole = make_splits(total, spec)?;
        let pick = |v: &[usize], off: usize, n: usize| v.iter().copied().filter(|&i| i >= off && i < off + n).collect();
        group_sizes
            .iter()
            .zip(&offsets)
            .map(|(&n, &off)| Splits {
                train: pick(&whole.train, off, n),
                eval: pick(&whole.eval, off, n),
                test: pick(&whole.test, off, n),
            })
            .collect()
    };

    let combined = Splits {
        train: per_group.iter().flat_map(|s| s.train.iter().copied()).collect(),
        eval: per_group.iter().flat_map(|s| s.eval.iter().copied()).collect(),
        test: per_group.iter().flat_map(|s| s.test.iter().copied()).collect(),
    };
    Ok((combined, per_group))
}

/// Batches built once before training and replayed verbatim every epoch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchPlan {
    batches: Vec<Vec<usize>>,
    seed: u64,
}

impl BatchPlan {
    pub fn batches(&self) -> &[Vec<usize>] {
        &self.batches
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    /// The batch sequence for one epoch. Identical for every epoch.
    pub fn epoch(&self) -> impl Iterator<Item = &[usize]> {
        self.batches.iter().map(Vec::as_slice)
    }
}

/// Shuffles `indices` with `seed`, then chunks them in order.
pub fn build_batch_plan(indices: &[usize], batch_size: usize, seed: u64) -> Result<BatchPlan, CorpusError> {
    if batch_size == 0 {
        return Err(CorpusError::InvalidBatchSize);
    }
    let mut order = indices.to_vec();
    order.shuffle(&mut seed::rng(seed::derive(seed, "batch-plan")));
    Ok(BatchPlan {
        batches: order.chunks(batch_size).map(<[usize]>::to_vec).collect(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sizes(s: &Splits) -> (usize, usize, usize) {
        (s.train.len(), s.eval.len(), s.test.len())
    }

    #[test]
    fn exact_fractions() {
        let s = make_splits(10, &SplitSpec::development(1)).unwrap();
        assert_eq!(sizes(&s), (6, 2, 2));
    }

    #[test]
    fn floor_arithmetic_at_808() {
        // 0.6 * 808 = 484.8, 0.2 * 808 = 161.6, remainder 808 - 484 - 161 = 163.
        let s = make_splits(808, &SplitSpec::development(9)).unwrap();
        assert_eq!(sizes(&s), (484, 161, 163));
    }

    #[test]
    fn seeded_determinism() {
        let spec = SplitSpec::development(42);
        assert_eq!(make_splits(57, &spec).unwrap(), make_splits(57, &spec).unwrap());
        assert_ne!(
            make_splits(57, &spec).unwrap(),
            make_splits(57, &SplitSpec::development(43)).unwrap()
        );
    }

    #[test]
    fn invalid_ratios_and_empty_input() {
        assert!(SplitSpec::new(0.5, 0.2, 0.2, 0).is_err());
        assert!(SplitSpec::new(-0.2, 0.6, 0.6, 0).is_err());
        assert!(SplitSpec::new(0.8, 0.2, 0.0, 0).is_ok());
        assert_eq!(
            make_splits(0, &SplitSpec::development(0)),
            Err(CorpusError::EmptyCollection)
        );
        let bad = SplitSpec {
            ratios: (0.7, 0.7, 0.0),
            seed: 0,
        };
        assert!(matches!(make_splits(5, &bad), Err(CorpusError::InvalidRatios(_))));
    }

    #[test]
    fn representation_error_does_not_lose_an_item() {
        let spec = SplitSpec::new(0.29, 0.71, 0.0, 3).unwrap();
        assert_eq!(spec.sizes(100), (29, 71, 0));
    }

    #[test]
    fn stratified_groups_keep_their_share() {
        let spec = SplitSpec::development(5);
        let (all, groups) = split_by_group(&[808, 33, 30], &spec, true).unwrap();
        assert_eq!(sizes(&groups[0]), (484, 161, 163));
        assert_eq!(sizes(&groups[1]), (19, 6, 8));
        assert_eq!(sizes(&groups[2]), (18, 6, 6));
        assert!(groups[1].test.iter().all(|&i| (808..841).contains(&i)));
        let mut every: Vec<usize> = all.train.iter().chain(&all.eval).chain(&all.test).copied().collect();
        every.sort_unstable();
        assert_eq!(every, (0..871).collect::<Vec<_>>());

        let (flat, groups) = split_by_group(&[808, 33, 30], &spec, false).unwrap();
        assert_eq!(sizes(&flat), (522, 174, 175));
        let n: usize = groups.iter().map(|g| g.train.len() + g.eval.len() + g.test.len()).sum();
        assert_eq!(n, 871);
    }

    #[test]
    fn batch_plan_chunks() {
        let idx: Vec<usize> = (0..10).collect();
        let plan = build_batch_plan(&idx, 4, 3).unwrap();
        let lens: Vec<usize> = plan.batches().iter().map(Vec::len).collect();
        assert_eq!(lens, vec![4, 4, 2]);
        assert_eq!(plan, build_batch_plan(&idx, 4, 3).unwrap());
        let first: Vec<&[usize]> = plan.epoch().collect();
        let second: Vec<&[usize]> = plan.epoch().collect();
        assert_eq!(first, second);
        assert_eq!(build_batch_plan(&idx, 0, 3), Err(CorpusError::InvalidBatchSize));
    }

    proptest! {
        #[test]
        fn splits_partition(n in 1usize..1000, seed in any::<u64>()) {
            let s = make_splits(n, &SplitSpec::development(seed)).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.eval).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn batch_plan_covers_each_index_once(
            idx in prop::collection::btree_set(0usize..5000, 0..300),
            bs in 1usize..40,
            seed in any::<u64>(),
        ) {
            let idx: Vec<usize> = idx.into_iter().collect();
            let plan = build_batch_plan(&idx, bs, seed).unwrap();
            let mut seen: Vec<usize> = plan.batches().iter().flatten().copied().collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, idx);
            prop_assert!(plan.batches().iter().all(|b| !b.is_empty() && b.len() <= bs));
        }
    }
}

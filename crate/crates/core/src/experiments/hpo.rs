//! Hyperparameter search.
//!
//! The first `n_initial` trials draw every dimension uniformly. Later trials
//! use a tree-structured density-ratio sampler: completed trials are split at
//! the median objective into a good and a bad half, each half defines a
//! per-dimension density (smoothed frequencies for categorical dimensions, a
//! Gaussian mixture plus a uniform prior for continuous ones), a batch of
//! candidates is drawn from the good density, and the candidate maximising
//! good/bad density is evaluated next.

use std::time::Instant;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::model::TrainConfig;
use crate::seed::{self, Rng};

/// Candidates drawn per adaptive trial.
pub const N_CANDIDATES: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HpoSpace {
    pub epochs: Vec<usize>,
    /// Uniform bounds `[low, high)`.
    pub weight_decay: (f64, f64),
    pub learning_rate: Vec<f64>,
    pub adafactor: Vec<bool>,
    pub adam_beta1: (f64, f64),
    pub adam_beta2: (f64, f64),
    pub adam_epsilon: Vec<f64>,
    pub max_grad_norm: (f64, f64),
}

impl Default for HpoSpace {
    fn default() -> Self {
        Self {
            epochs: vec![20, 25, 30, 40],
            weight_decay: (0.001, 1.0),
            learning_rate: vec![1e-5, 2e-5, 3e-5, 4e-5, 5e-5, 6e-5, 2e-7, 1e-7, 3e-7, 2e-8],
            adafactor: vec![true, false],
            adam_beta1: (0.0, 1.0),
            adam_beta2: (0.0, 1.0),
            adam_epsilon: vec![1e-8, 2e-8, 3e-8, 1e-9, 2e-9, 3e-10],
            max_grad_norm: (0.0, 1.0),
        }
    }
}

/// One sampled configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpoPoint {
    pub epochs: usize,
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub adafactor: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub max_grad_norm: f64,
}

/// Column names of [`HpoPoint`] in export order.
pub const HPO_COLUMNS: [&str; 8] = [
    "epochs",
    "weight_decay",
    "learning_rate",
    "adafactor",
    "adam_beta1",
    "adam_beta2",
    "adam_epsilon",
    "max_grad_norm",
];

impl HpoPoint {
    /// `base` with the searched fields replaced.
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            weight_decay: self.weight_decay,
            learning_rate: self.learning_rate,
            use_adafactor: self.adafactor,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_epsilon: self.adam_epsilon,
            max_grad_norm: self.max_grad_norm,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Dim {
    Categorical(usize),
    Continuous(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Coord {
    Cat(usize),
    Num(f64),
}

impl HpoSpace {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidSpace(m));
        let sets = [
            ("epochs", self.epochs.len()),
            ("learning_rate", self.learning_rate.len()),
            ("adafactor", self.adafactor.len()),
            ("adam_epsilon", self.adam_epsilon.len()),
        ];
        if let Some((name, _)) = sets.iter().find(|s| s.1 == 0) {
            return bad(format!("`{name}` has no choices"));
        }
        let ranges = [
            ("weight_decay", self.weight_decay, 0.0, f64::INFINITY),
            ("adam_beta1", self.adam_beta1, 0.0, 1.0),
            ("adam_beta2", self.adam_beta2, 0.0, 1.0),
            ("max_grad_norm", self.max_grad_norm, 0.0, f64::INFINITY),
        ];
        for (name, (lo, hi), min, max) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo >= min && hi <= max) {
                return bad(format!(
                    "`{name}` bounds ({lo}, {hi}) must satisfy {min} <= low < high <= {max}"
                ));
            }
        }
        if self.learning_rate.iter().any(|&lr| !(lr > 0.0 && lr.is_finite())) {
            return bad("learning rates must be positive".into());
        }
        if self.adam_epsilon.iter().any(|&e| !(e >= 0.0 && e.is_finite())) {
            return bad("epsilons must be non-negative".into());
        }
        if self.epochs.contains(&0) {
            return bad("epochs must be positive".into());
        }
        Ok(())
    }

    pub fn contains(&self, p: &HpoPoint) -> bool {
        let within = |(lo, hi): (f64, f64), x: f64| lo <= x && x < hi;
        self.epochs.contains(&p.epochs)
            && within(self.weight_decay, p.weight_decay)
            && self.learning_rate.contains(&p.learning_rate)
            && self.adafactor.contains(&p.adafactor)
            && within(self.adam_beta1, p.adam_beta1)
            && within(self.adam_beta2, p.adam_beta2)
            && self.adam_epsilon.contains(&p.adam_epsilon)
            && within(self.max_grad_norm, p.max_grad_norm)
    }

    fn dims(&self) -> [Dim; 8] {
        let c = |(lo, hi): (f64, f64)| Dim::Continuous(lo, hi);
        [
            Dim::Categorical(self.epochs.len()),
            c(self.weight_decay),
            Dim::Categorical(self.learning_rate.len()),
            Dim::Categorical(self.adafactor.len()),
            c(self.adam_beta1),
            c(self.adam_beta2),
            Dim::Categorical(self.adam_epsilon.len()),
            c(self.max_grad_norm),
        ]
    }

    fn point(&self, x: &[Coord; 8]) -> HpoPoint {
        let cat = |k: usize| match x[k] {
            Coord::Cat(i) => i,
            Coord::Num(_) => unreachable!("categorical dimension"),
        };
        let num = |k: usize| match x[k] {
            Coord::Num(v) => v,
            Coord::Cat(_) => unreachable!("continuous dimension"),
        };
        HpoPoint {
            epochs: self.epochs[cat(0)],
            weight_decay: num(1),
            learning_rate: self.learning_rate[cat(2)],
            adafactor: self.adafactor[cat(3)],
            adam_beta1: num(4),
            adam_beta2: num(5),
            adam_epsilon: self.adam_epsilon[cat(6)],
            max_grad_norm: num(7),
        }
    }

    fn coords(&self, p: &HpoPoint) -> [Coord; 8] {
        let pos = |found: Option<usize>| Coord::Cat(found.expect("point drawn from this space"));
        [
            pos(self.epochs.iter().position(|&e| e == p.epochs)),
            Coord::Num(p.weight_decay),
            pos(self.learning_rate.iter().position(|&v| v == p.learning_rate)),
            pos(self.adafactor.iter().position(|&v| v == p.adafactor)),
            Coord::Num(p.adam_beta1),
            Coord::Num(p.adam_beta2),
            pos(self.adam_epsilon.iter().position(|&v| v == p.adam_epsilon)),
            Coord::Num(p.max_grad_norm),
        ]
    }

    /// Uniform draw over every dimension.
    pub fn sample_uniform(&self, rng: &mut Rng) -> HpoPoint {
        let x = self.dims().map(|d| match d {
            Dim::Categorical(n) => Coord::Cat(rng.random_range(0..n)),
            Dim::Continuous(lo, hi) => Coord::Num(rng.random_range(lo..hi)),
        });
        self.point(&x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Density-ratio sampler after the initial uniform trials.
    #[default]
    Tpe,
    /// Uniform draws for every trial.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub point: HpoPoint,
    pub eval_macro_f1: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpoResult {
    pub trials: Vec<Trial>,
    /// Index of the best trial; ties go to the earlier trial.
    pub best: usize,
}

impl HpoResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }
}

/// Per-dimension density built from a set of observed coordinates.
struct Density {
    dim: Dim,
    cats: Vec<f64>,
    centres: Vec<f64>,
    sigma: f64,
}

impl Density {
    fn new(dim: Dim, obs: &[Coord]) -> Self {
        match dim {
            Dim::Categorical(n) => {
                let mut counts = vec![1.0; n];
                for o in obs {
                    if let Coord::Cat(i) = o {
                        counts[*i] += 1.0;
                    }
                }
                let total: f64 = counts.iter().sum();
                Self {
                    dim,
                    cats: counts.iter().map(|c| c / total).collect(),
                    centres: vec![],
                    sigma: 0.0,
                }
            }
            Dim::Continuous(lo, hi) => {
                let centres: Vec<f64> = obs
                    .iter()
                    .filter_map(|o| match o {
                        Coord::Num(v) => Some(*v),
                        Coord::Cat(_) => None,
                    })
                    .collect();
                let sigma = 0.25 * (hi - lo) * ((centres.len() + 1) as f64).powf(-0.2);
                Self {
                    dim,
                    cats: vec![],
                    centres,
                    sigma,
                }
            }
        }
    }

    fn pdf(&self, x: Coord) -> f64 {
        match (self.dim, x) {
            (Dim::Categorical(_), Coord::Cat(i)) => self.cats[i],
            (Dim::Continuous(lo, hi), Coord::Num(v)) => {
                let k = (self.centres.len() + 1) as f64;
                let norm = 1.0 / (self.sigma * (2.0 * std::f64::consts::PI).sqrt());
                let bumps: f64 = self
                    .centres
                    .iter()
                    .map(|c| norm * (-0.5 * ((v - c) / self.sigma).powi(2)).exp())
                    .sum();
                (1.0 / (hi - lo) + bumps) / k
            }
            _ => unreachable!("coordinate kind matches its dimension"),
        }
    }

    fn sample(&self, rng: &mut Rng) -> Coord {
        match self.dim {
            Dim::Categorical(_) => {
                let mut u: f64 = rng.random();
                for (i, p) in self.cats.iter().enumerate() {
                    if u < *p {
                        return Coord::Cat(i);
                    }
                    u -= p;
                }
                Coord::Cat(self.cats.len() - 1)
            }
            Dim::Continuous(lo, hi) => {
                let k = rng.random_range(0..=self.centres.len());
                if k == self.centres.len() {
                    return Coord::Num(rng.random_range(lo..hi));
                }
                let normal = Normal::new(self.centres[k], self.sigma).expect("positive sigma");
                for _ in 0..32 {
                    let v = normal.sample(rng);
                    if (lo..hi).contains(&v) {
                        return Coord::Num(v);
                    }
                }
                Coord::Num(rng.random_range(lo..hi))
            }
        }
    }
}

/// Next point from the density-ratio sampler given completed trials.
fn suggest(space: &HpoSpace, done: &[Trial], rng: &mut Rng) -> HpoPoint {
    if done.is_empty() {
        return space.sample_uniform(rng);
    }
    let mut order: Vec<&Trial> = done.iter().collect();
    order.sort_by(|a, b| b.eval_macro_f1.total_cmp(&a.eval_macro_f1).then(a.index.cmp(&b.index)));
    let n_good = (order.len() / 2).max(1);
    let coords: Vec<[Coord; 8]> = order.iter().map(|t| space.coords(&t.point)).collect();
    let (good, bad) = coords.split_at(n_good);
    let dims = space.dims();
    let density = |set: &[[Coord; 8]], d: usize| Density::new(dims[d], &set.iter().map(|x| x[d]).collect::<Vec<_>>());
    let l: Vec<Density> = (0..8).map(|d| density(good, d)).collect();
    let g: Vec<Density> = (0..8).map(|d| density(bad, d)).collect();

    let mut best: Option<([Coord; 8], f64)> = None;
    for _ in 0..N_CANDIDATES {
        let x: [Coord; 8] = std::array::from_fn(|d| l[d].sample(rng));
        let score: f64 = (0..8).map(|d| l[d].pdf(x[d]).ln() - g[d].pdf(x[d]).ln()).sum();
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((x, score));
        }
    }
    space.point(&best.expect("at least one candidate").0)
}

/// Runs `n_trials` evaluations of `objective`, which maps a trial index and a
/// point to the eval macro-F1 to maximise.
pub fn hpo_search<F>(
    space: &HpoSpace,
    n_trials: usize,
    n_initial: usize,
    seed: u64,
    sampler: Sampler,
    mut objective: F,
) -> Result<HpoResult, ExperimentError>
where
    F: FnMut(usize, &HpoPoint) -> Result<f64, ExperimentError>,
{
    space.validate()?;
    if n_trials == 0 || n_initial > n_trials {
        return Err(ExperimentError::InvalidSpace(format!(
            "need 1 <= n_trials and n_initial <= n_trials, got {n_trials} and {n_initial}"
        )));
    }
    let mut rng = seed::rng(seed::derive(seed, "hpo"));
    let mut trials: Vec<Trial> = Vec::with_capacity(n_trials);
    for index in 0..n_trials {
        let point = if index < n_initial || sampler == Sampler::Random {
            space.sample_uniform(&mut rng)
        } else {
            suggest(space, &trials, &mut rng)
        };
        let start = Instant::now();
        let value = objective(index, &point)?;
        if value.is_nan() {
            return Err(ExperimentError::InvalidConfig(format!("trial {index} returned NaN")));
        }
        trials.push(Trial {
            index,
            point,
            eval_macro_f1: value,
            wall_time_secs: start.elapsed().as_secs_f64(),
        });
    }
    let values: Vec<f64> = trials.iter().map(|t| t.eval_macro_f1).collect();
    let best = crate::argmax(&values).expect("n_trials >= 1");
    Ok(HpoResult { trials, best })
}

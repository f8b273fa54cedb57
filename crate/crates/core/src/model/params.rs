use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::seed;
use crate::Matrix;

/// Half-width of the uniform head initialiser.
pub const HEAD_INIT_RANGE: f64 = 0.05;
/// Half-width of the uniform body initialiser.
pub const BODY_INIT_RANGE: f64 = 0.5;
/// Hidden width used when none is given.
pub const DEFAULT_HIDDEN: usize = 64;
/// Body rows used for training when none is given.
pub const DEFAULT_MODEL_HASH_DIM: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub hash_dim: usize,
    pub hidden: usize,
    pub n_outputs: usize,
}

impl ModelDims {
    pub fn new(hash_dim: usize, hidden: usize, n_outputs: usize) -> Result<Self, ModelError> {
        let dims = Self {
            hash_dim,
            hidden,
            n_outputs,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hash_dim == 0 || self.hidden == 0 || self.n_outputs < 2 {
            return Err(ModelError::InvalidConfig(format!(
                "dims need hash_dim, hidden >= 1 and n_outputs >= 2, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Same body, different head width.
    pub fn with_outputs(self, n_outputs: usize) -> Self {
        Self { n_outputs, ..self }
    }
}

/// Roots of the three independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seeds {
    /// Body initialisation, dropout, and anything else not pinned below.
    pub global: u64,
    /// Composition and order of the training batches.
    pub data_order: u64,
    /// Initialisation of the prediction head.
    pub head_init: u64,
}

impl Seeds {
    pub fn new(global: u64, data_order: u64, head_init: u64) -> Self {
        Self {
            global,
            data_order,
            head_init,
        }
    }
}

/// The affine prediction layer: `logits = weights · h + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    /// `n_outputs × hidden`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub dims: ModelDims,
    /// Feature embedding table, `hash_dim × hidden`.
    pub body: Matrix,
    pub head: Head,
}

impl ModelParameters {
    /// Checks that every array matches `dims` and holds finite values.
    pub fn validate(&self) -> Result<(), ModelError> {
        let d = self.dims;
        let shapes_ok = self.body.rows() == d.hash_dim
            && self.body.cols() == d.hidden
            && self.head.weights.rows() == d.n_outputs
            && self.head.weights.cols() == d.hidden
            && self.head.bias.len() == d.n_outputs;
        if !shapes_ok {
            return Err(ModelError::ShapeMismatch(format!("parameters do not match dims {d:?}")));
        }
        let all = self
            .body
            .as_slice()
            .iter()
            .chain(self.head.weights.as_slice())
            .chain(&self.head.bias);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(())
    }
}

/// Fresh head of width `n_outputs`; depends only on the shape and the seed.
pub fn init_head(hidden: usize, n_outputs: usize, head_init_seed: u64) -> Head {
    let mut rng = seed::rng(seed::derive(head_init_seed, "head"));
    let data = (0..n_outputs * hidden)
        .map(|_| rng.random_range(-HEAD_INIT_RANGE..=HEAD_INIT_RANGE))
        .collect();
    Head {
        weights: Matrix::from_vec(n_outputs, hidden, data).expect("sized by construction"),
        bias: vec![0.0; n_outputs],
    }
}

/// Body from the global seed, head from the head seed.
pub fn init_model(dims: ModelDims, seeds: Seeds) -> ModelParameters {
    let mut rng = seed::rng(seed::derive(seeds.global, "body"));
    let data = (0..dims.hash_dim * dims.hidden)
        .map(|_| rng.random_range(-BODY_INIT_RANGE..=BODY_INIT_RANGE))
        .collect();
    ModelParameters {
        dims,
        body: Matrix::from_vec(dims.hash_dim, dims.hidden, data).expect("sized by construction"),
        head: init_head(dims.hidden, dims.n_outputs, seeds.head_init),
    }
}

/// Gradients with a sparse body: only rows touched by the batch are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub body: BTreeMap<u32, Vec<f64>>,
    pub head_weights: Matrix,
    pub head_bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros(dims: ModelDims) -> Self {
        Self {
            body: BTreeMap::new(),
            head_weights: Matrix::zeros(dims.n_outputs, dims.hidden),
            head_bias: vec![0.0; dims.n_outputs],
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.body
            .values()
            .flatten()
            .chain(self.head_weights.as_slice())
            .chain(&self.head_bias)
    }

    /// Global L2 norm over every component.
    pub fn norm(&self) -> f64 {
        self.values().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        self.body.values_mut().flatten().for_each(|g| *g *= factor);
        self.head_weights.as_mut_slice().iter_mut().for_each(|g| *g *= factor);
        self.head_bias.iter_mut().for_each(|g| *g *= factor);
    }

    /// Dense copy of the body gradient, `hash_dim × hidden`.
    pub fn dense_body(&self, dims: ModelDims) -> Matrix {
        let mut m = Matrix::zeros(dims.hash_dim, dims.hidden);
        for (&r, g) in &self.body {
            m.row_mut(r as usize).copy_from_slice(g);
        }
        m
    }
}

/// Rescales so the global norm is at most `max_norm`. Returns the norm before
/// clipping.
pub fn clip_gradients(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}

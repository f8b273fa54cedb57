//! AdamW and a simplified Adafactor.
//!
//! Both apply decoupled weight decay, `w ← w · (1 − lr·wd)`, before the
//! gradient update. Adafactor here keeps only factored second moments: for a
//! matrix, exponential averages `R` of row sums and `C` of column sums of the
//! squared gradient, with `v̂_ij = R_i · C_j / ΣR / (1 − β2^t)`; vectors keep an
//! unfactored average. There is no first moment and no relative step size.
//!
//! [`optimizer_step`] updates every parameter. [`Optimizer`] gives the same
//! result while touching only the body rows present in the gradient: a row
//! that received no gradient for `k` steps is brought up to date when it is
//! next touched (or in [`Optimizer::finish`]).

use serde::{Deserialize, Serialize};

use super::{Gradients, ModelError, ModelParameters, TrainConfig};
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    fn zeros(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// Factored second-moment accumulators of a `rows × cols` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Factored {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub row_total: f64,
}

impl Factored {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            row: vec![0.0; rows],
            col: vec![0.0; cols],
            row_total: 0.0,
        }
    }

    fn estimate(&self, i: usize, j: usize, bias_correction: f64) -> f64 {
        if self.row_total > 0.0 {
            self.row[i] * self.col[j] / self.row_total / bias_correction
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OptimizerState {
    AdamW {
        body: Moments,
        head_weights: Moments,
        head_bias: Moments,
    },
    Adafactor {
        body: Factored,
        head_weights: Factored,
        head_bias: Vec<f64>,
    },
}

impl OptimizerState {
    pub fn new(params: &ModelParameters, use_adafactor: bool) -> Self {
        let d = params.dims;
        if use_adafactor {
            Self::Adafactor {
                body: Factored::zeros(d.hash_dim, d.hidden),
                head_weights: Factored::zeros(d.n_outputs, d.hidden),
                head_bias: vec![0.0; d.n_outputs],
            }
        } else {
            Self::AdamW {
                body: Moments::zeros(d.hash_dim * d.hidden),
                head_weights: Moments::zeros(d.n_outputs * d.hidden),
                head_bias: Moments::zeros(d.n_outputs),
            }
        }
    }

    fn check(&self, params: &ModelParameters) -> Result<(), ModelError> {
        let d = params.dims;
        let ok = match self {
            Self::AdamW {
                body,
                head_weights,
                head_bias,
            } => {
                body.m.len() == d.hash_dim * d.hidden
                    && body.v.len() == body.m.len()
                    && head_weights.m.len() == d.n_outputs * d.hidden
                    && head_weights.v.len() == head_weights.m.len()
                    && head_bias.m.len() == d.n_outputs
                    && head_bias.v.len() == d.n_outputs
            }
            Self::Adafactor {
                body,
                head_weights,
                head_bias,
            } => {
                body.row.len() == d.hash_dim
                    && body.col.len() == d.hidden
                    && head_weights.row.len() == d.n_outputs
                    && head_weights.col.len() == d.hidden
                    && head_bias.len() == d.n_outputs
            }
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::ShapeMismatch(format!(
                "optimizer state does not match dims {d:?}"
            )))
        }
    }
}

/// Per-step constants.
struct Step {
    lr: f64,
    decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bc1: f64,
    bc2: f64,
}

impl Step {
    fn new(cfg: &TrainConfig, t: usize) -> Self {
        let t = t as i32;
        Self {
            lr: cfg.learning_rate,
            decay: 1.0 - cfg.learning_rate * cfg.weight_decay,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_epsilon,
            bc1: 1.0 - cfg.adam_beta1.powi(t),
            bc2: 1.0 - cfg.adam_beta2.powi(t),
        }
    }

    fn adam(&self, w: &mut [f64], g: Option<&[f64]>, m: &mut [f64], v: &mut [f64]) {
        for j in 0..w.len() {
            let gj = g.map_or(0.0, |g| g[j]);
            w[j] *= self.decay;
            m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
            v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
            w[j] -= self.lr * (m[j] / self.bc1) / ((v[j] / self.bc2).sqrt() + self.eps);
        }
    }

    fn factored_update(&self, w: &mut [f64], g: Option<&[f64]>, acc: &Factored, i: usize) {
        for (j, wj) in w.iter_mut().enumerate() {
            *wj *= self.decay;
            if let Some(g) = g {
                let v = acc.estimate(i, j, self.bc2);
                *wj -= self.lr * g[j] / (v.sqrt() + self.eps);
            }
        }
    }

    /// Full Adafactor step on a dense matrix.
    fn adafactor_matrix(&self, w: &mut Matrix, g: &Matrix, acc: &mut Factored) {
        for (i, r) in acc.row.iter_mut().enumerate() {
            let s: f64 = g.row(i).iter().map(|x| x * x).sum();
            *r = self.beta2 * *r + (1.0 - self.beta2) * s;
        }
        acc.row_total = acc.row.iter().sum();
        for (j, c) in acc.col.iter_mut().enumerate() {
            let s: f64 = (0..g.rows()).map(|i| g.get(i, j).powi(2)).sum();
            *c = self.beta2 * *c + (1.0 - self.beta2) * s;
        }
        for i in 0..w.rows() {
            self.factored_update(w.row_mut(i), Some(g.row(i)), acc, i);
        }
    }

    fn adafactor_vector(&self, w: &mut [f64], g: &[f64], v: &mut [f64]) {
        for j in 0..w.len() {
            w[j] *= self.decay;
            v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
            w[j] -= self.lr * g[j] / ((v[j] / self.bc2).sqrt() + self.eps);
        }
    }
}

fn update_head(params: &mut ModelParameters, grads: &Gradients, state: &mut OptimizerState, s: &Step) {
    let head = &mut params.head;
    match state {
        OptimizerState::AdamW {
            head_weights,
            head_bias,
            ..
        } => {
            s.adam(
                head.weights.as_mut_slice(),
                Some(grads.head_weights.as_slice()),
                &mut head_weights.m,
                &mut head_weights.v,
            );
            s.adam(
                &mut head.bias,
                Some(&grads.head_bias),
                &mut head_bias.m,
                &mut head_bias.v,
            );
        }
        OptimizerState::Adafactor {
            head_weights,
            head_bias,
            ..
        } => {
            s.adafactor_matrix(&mut head.weights, &grads.head_weights, head_weights);
            s.adafactor_vector(&mut head.bias, &grads.head_bias, head_bias);
        }
    }
}

fn check_grads(params: &ModelParameters, grads: &Gradients) -> Result<(), ModelError> {
    let d = params.dims;
    let ok = grads.head_weights.rows() == d.n_outputs
        && grads.head_weights.cols() == d.hidden
        && grads.head_bias.len() == d.n_outputs
        && grads
            .body
            .iter()
            .all(|(&r, g)| (r as usize) < d.hash_dim && g.len() == d.hidden);
    if ok {
        Ok(())
    } else {
        Err(ModelError::ShapeMismatch(format!("gradients do not match dims {d:?}")))
    }
}

/// One optimisation step over every parameter. `step_index` starts at 1.
pub fn optimizer_step(
    params: &mut ModelParameters,
    grads: &Gradients,
    state: &mut OptimizerState,
    config: &TrainConfig,
    step_index: usize,
) -> Result<(), ModelError> {
    if step_index == 0 {
        return Err(ModelError::InvalidConfig("step_index starts at 1".into()));
    }
    state.check(params)?;
    check_grads(params, grads)?;
    let s = Step::new(config, step_index);
    let h = params.dims.hidden;
    match state {
        OptimizerState::AdamW { body, .. } => {
            for i in 0..params.dims.hash_dim {
                let span = i * h..(i + 1) * h;
                s.adam(
                    params.body.row_mut(i),
                    grads.body.get(&(i as u32)).map(Vec::as_slice),
                    &mut body.m[span.clone()],
                    &mut body.v[span],
                );
            }
        }
        OptimizerState::Adafactor { body, .. } => {
            s.adafactor_matrix(&mut params.body, &grads.dense_body(params.dims), body);
        }
    }
    update_head(params, grads, state, &s);
    Ok(())
}

/// Stateful optimiser that updates body rows only when they receive gradient.
#[derive(Debug, Clone)]
pub struct Optimizer {
    state: OptimizerState,
    config: TrainConfig,
    /// Last step applied to each body row.
    synced: Vec<usize>,
    step: usize,
}

impl Optimizer {
    pub fn new(params: &ModelParameters, config: &TrainConfig) -> Self {
        Self {
            state: OptimizerState::new(params, config.use_adafactor),
            config: config.clone(),
            synced: vec![0; params.dims.hash_dim],
            step: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.step
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    /// Replays steps `synced[i]+1 ..= until` for body row `i`, during which
    /// the row received no gradient.
    fn catch_up(&mut self, params: &mut ModelParameters, i: usize, until: usize) {
        let from = self.synced[i];
        if from >= until {
            return;
        }
        let h = params.dims.hidden;
        let w = params.body.row_mut(i);
        let decay = 1.0 - self.config.learning_rate * self.config.weight_decay;
        match &mut self.state {
            OptimizerState::AdamW { body, .. } => {
                let span = i * h..(i + 1) * h;
                let (m, v) = (&mut body.m[span.clone()], &mut body.v[span]);
                let mut u = from + 1;
                // While momentum is non-zero the update must be replayed step
                // by step; afterwards only decay remains.
                while u <= until && m.iter().any(|&x| x != 0.0) {
                    Step::new(&self.config, u).adam(w, None, m, v);
                    u += 1;
                }
                if u <= until {
                    let k = (until - u + 1) as i32;
                    let wf = decay.powi(k);
                    let vf = self.config.adam_beta2.powi(k);
                    w.iter_mut().for_each(|x| *x *= wf);
                    v.iter_mut().for_each(|x| *x *= vf);
                }
            }
            OptimizerState::Adafactor { body, .. } => {
                let k = (until - from) as i32;
                let wf = decay.powi(k);
                w.iter_mut().for_each(|x| *x *= wf);
                body.row[i] *= self.config.adam_beta2.powi(k);
            }
        }
        self.synced[i] = until;
    }

    pub fn step(&mut self, params: &mut ModelParameters, grads: &Gradients) -> Result<(), ModelError> {
        self.state.check(params)?;
        check_grads(params, grads)?;
        let t = self.step + 1;
        for &r in grads.body.keys() {
            self.catch_up(params, r as usize, t - 1);
        }
        let s = Step::new(&self.config, t);
        let h = params.dims.hidden;
        match &mut self.state {
            OptimizerState::AdamW { body, .. } => {
                for (&r, g) in &grads.body {
                    let i = r as usize;
                    let span = i * h..(i + 1) * h;
                    s.adam(
                        params.body.row_mut(i),
                        Some(g),
                        &mut body.m[span.clone()],
                        &mut body.v[span],
                    );
                }
            }
            OptimizerState::Adafactor { body, .. } => {
                let mut added = 0.0;
                let mut col = vec![0.0; h];
                for (&r, g) in &grads.body {
                    let sq: f64 = g.iter().map(|x| x * x).sum();
                    let row = &mut body.row[r as usize];
                    *row = s.beta2 * *row + (1.0 - s.beta2) * sq;
                    added += sq;
                    col.iter_mut().zip(g).for_each(|(c, x)| *c += x * x);
                }
                body.row_total = s.beta2 * body.row_total + (1.0 - s.beta2) * added;
                for (c, add) in body.col.iter_mut().zip(&col) {
                    *c = s.beta2 * *c + (1.0 - s.beta2) * add;
                }
                for (&r, g) in &grads.body {
                    s.factored_update(params.body.row_mut(r as usize), Some(g), body, r as usize);
                }
            }
        }
        for &r in grads.body.keys() {
            self.synced[r as usize] = t;
        }
        update_head(params, grads, &mut self.state, &s);
        self.step = t;
        Ok(())
    }

    /// Brings every body row up to the current step.
    pub fn finish(&mut self, params: &mut ModelParameters) {
        for i in 0..params.dims.hash_dim {
            self.catch_up(params, i, self.step);
        }
    }
}

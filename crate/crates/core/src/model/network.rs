//! Forward and backward passes.
//!
//! For a unit with feature ids `f_1..f_n`:
//!
//! ```text
//! h      = tanh(mean_k body[f_k])
//! logits = head.weights · dropout(h) + head.bias
//! ```
//!
//! Sequence classification mean-pools `h` over the word-initial units of a
//! window before dropout and the head.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Gradients, ModelError, ModelParameters};
use crate::matrix::softmax;
use crate::metrics::{soft_loss_gradient, DEFAULT_SMOOTHING};
use crate::seed::Rng;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    SoftMacroF1,
    CrossEntropy,
}

/// One window of units for tagging. Units without a label (continuation
/// pieces) still provide context through the features of their neighbours but
/// add nothing to the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedSequence {
    pub features: Vec<Vec<u32>>,
    pub labels: Vec<Option<usize>>,
}

/// One window of units with a single sequence-level label.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSequence {
    pub features: Vec<Vec<u32>>,
    pub label: usize,
}

fn check_ids(params: &ModelParameters, ids: &[u32]) -> Result<(), ModelError> {
    if ids.is_empty() {
        return Err(ModelError::ShapeMismatch("unit without features".into()));
    }
    match ids.iter().find(|&&f| f as usize >= params.dims.hash_dim) {
        Some(f) => Err(ModelError::ShapeMismatch(format!(
            "feature id {f} outside hash_dim {}",
            params.dims.hash_dim
        ))),
        None => Ok(()),
    }
}

fn hidden(params: &ModelParameters, ids: &[u32]) -> Vec<f64> {
    let mut a = vec![0.0; params.dims.hidden];
    for &f in ids {
        for (acc, w) in a.iter_mut().zip(params.body.row(f as usize)) {
            *acc += w;
        }
    }
    let n = ids.len() as f64;
    a.iter().map(|v| (v / n).tanh()).collect()
}

fn logits(params: &ModelParameters, h: &[f64]) -> Vec<f64> {
    params
        .head
        .weights
        .iter_rows()
        .zip(&params.head.bias)
        .map(|(w, b)| w.iter().zip(h).map(|(w, h)| w * h).sum::<f64>() + b)
        .collect()
}

fn dropout_mask(hidden: usize, rate: f64, rng: &mut Rng) -> Option<Vec<f64>> {
    (rate > 0.0).then(|| {
        let keep = 1.0 / (1.0 - rate);
        (0..hidden)
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect()
    })
}

fn apply_mask(v: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        v.iter_mut().zip(m).for_each(|(x, k)| *x *= k);
    }
}

/// Hidden states of every unit, without dropout.
pub fn hidden_states(params: &ModelParameters, features: &[Vec<u32>]) -> Result<Matrix, ModelError> {
    let mut out = Matrix::zeros(features.len(), params.dims.hidden);
    for (i, ids) in features.iter().enumerate() {
        check_ids(params, ids)?;
        out.row_mut(i).copy_from_slice(&hidden(params, ids));
    }
    Ok(out)
}

/// Per-unit output distributions, without dropout.
pub fn token_probabilities(params: &ModelParameters, features: &[Vec<u32>]) -> Result<Matrix, ModelError> {
    let mut out = Matrix::zeros(features.len(), params.dims.n_outputs);
    for (i, ids) in features.iter().enumerate() {
        check_ids(params, ids)?;
        out.row_mut(i)
            .copy_from_slice(&softmax(&logits(params, &hidden(params, ids))));
    }
    Ok(out)
}

/// Output distribution of a mean-pooled window, without dropout.
pub fn pooled_probabilities(params: &ModelParameters, features: &[Vec<u32>]) -> Result<Vec<f64>, ModelError> {
    if features.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let hs = hidden_states(params, features)?;
    Ok(softmax(&logits(params, &mean_rows(&hs))))
}

fn mean_rows(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
    }
    let n = m.rows() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    out
}

/// Cross-entropy averaged over rows, and its gradient with respect to the logits.
fn cross_entropy(logits: &Matrix, gold: &[usize]) -> (f64, Matrix) {
    let n = logits.rows() as f64;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    let mut value = 0.0;
    for (i, (z, &g)) in logits.iter_rows().zip(gold).enumerate() {
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        value -= z[g] - log_norm;
        for (j, out) in grad.row_mut(i).iter_mut().enumerate() {
            let p = (z[j] - log_norm).exp();
            *out = (p - if j == g { 1.0 } else { 0.0 }) / n;
        }
    }
    (value / n, grad)
}

fn loss_and_grad(logits: &Matrix, gold: &[usize], loss: LossKind) -> Result<(f64, Matrix), ModelError> {
    match loss {
        LossKind::CrossEntropy => Ok(cross_entropy(logits, gold)),
        LossKind::SoftMacroF1 => {
            let g = soft_loss_gradient(logits, gold, DEFAULT_SMOOTHING)?;
            Ok((g.value, g.grad))
        }
    }
}

/// Accumulates the head gradient for one unit and returns `head.weightsᵀ · dz`.
fn backprop_head(params: &ModelParameters, grads: &mut Gradients, dz: &[f64], h_in: &[f64]) -> Vec<f64> {
    let mut dh = vec![0.0; params.dims.hidden];
    for (k, &d) in dz.iter().enumerate() {
        grads.head_bias[k] += d;
        let w = params.head.weights.row(k);
        for ((gw, dhj), (&hj, &wj)) in grads
            .head_weights
            .row_mut(k)
            .iter_mut()
            .zip(dh.iter_mut())
            .zip(h_in.iter().zip(w))
        {
            *gw += d * hj;
            *dhj += d * wj;
        }
    }
    dh
}

fn backprop_body(grads: &mut Gradients, ids: &[u32], da: &[f64]) {
    let n = ids.len() as f64;
    for &f in ids {
        let row = grads.body.entry(f).or_insert_with(|| vec![0.0; da.len()]);
        row.iter_mut().zip(da).for_each(|(g, d)| *g += d / n);
    }
}

struct Unit<'a> {
    ids: &'a [u32],
    h: Vec<f64>,
    mask: Option<Vec<f64>>,
}

/// Loss over every labelled unit of the batch and its exact gradients.
///
/// Dropout masks are drawn from `rng` in batch order; with `dropout == 0` the
/// stream is not touched.
pub fn forward_backward(
    params: &ModelParameters,
    batch: &[TaggedSequence],
    loss: LossKind,
    dropout: f64,
    rng: &mut Rng,
) -> Result<(f64, Gradients), ModelError> {
    let t = params.dims.n_outputs;
    let mut units = Vec::new();
    let mut gold = Vec::new();
    let mut z = Vec::new();
    for seq in batch {
        if seq.features.len() != seq.labels.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} units but {} labels",
                seq.features.len(),
                seq.labels.len()
            )));
        }
        for (ids, label) in seq.features.iter().zip(&seq.labels) {
            let Some(label) = *label else { continue };
            check_ids(params, ids)?;
            if label >= t {
                return Err(ModelError::ShapeMismatch(format!("label {label} outside {t} outputs")));
            }
            let h = hidden(params, ids);
            let mask = dropout_mask(params.dims.hidden, dropout, rng);
            let mut hd = h.clone();
            apply_mask(&mut hd, &mask);
            z.extend(logits(params, &hd));
            gold.push(label);
            units.push(Unit { ids, h, mask });
        }
    }
    if units.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let z = Matrix::from_vec(units.len(), t, z).expect("one row per unit");
    let (value, dz) = loss_and_grad(&z, &gold, loss)?;

    let mut grads = Gradients::zeros(params.dims);
    for (i, unit) in units.iter().enumerate() {
        let mut hd = unit.h.clone();
        apply_mask(&mut hd, &unit.mask);
        let mut dh = backprop_head(params, &mut grads, dz.row(i), &hd);
        apply_mask(&mut dh, &unit.mask);
        let da: Vec<f64> = dh.iter().zip(&unit.h).map(|(d, h)| d * (1.0 - h * h)).collect();
        backprop_body(&mut grads, unit.ids, &da);
    }
    Ok((value, grads))
}

/// Loss of mean-pooled windows against their sequence labels.
pub fn forward_backward_pooled(
    params: &ModelParameters,
    batch: &[PooledSequence],
    loss: LossKind,
    dropout: f64,
    rng: &mut Rng,
) -> Result<(f64, Gradients), ModelError> {
    let t = params.dims.n_outputs;
    if batch.is_empty() || batch.iter().any(|s| s.features.is_empty()) {
        return Err(ModelError::EmptyBatch);
    }
    let mut states = Vec::with_capacity(batch.len());
    let mut z = Vec::new();
    for seq in batch {
        if seq.label >= t {
            return Err(ModelError::ShapeMismatch(format!(
                "label {} outside {t} outputs",
                seq.label
            )));
        }
        let hs = hidden_states(params, &seq.features)?;
        let mut pooled = mean_rows(&hs);
        let mask = dropout_mask(params.dims.hidden, dropout, rng);
        apply_mask(&mut pooled, &mask);
        z.extend(logits(params, &pooled));
        states.push((hs, pooled, mask));
    }
    let z = Matrix::from_vec(batch.len(), t, z).expect("one row per sequence");
    let gold: Vec<usize> = batch.iter().map(|s| s.label).collect();
    let (value, dz) = loss_and_grad(&z, &gold, loss)?;

    let mut grads = Gradients::zeros(params.dims);
    for (i, (seq, (hs, pooled, mask))) in batch.iter().zip(&states).enumerate() {
        let mut dpooled = backprop_head(params, &mut grads, dz.row(i), pooled);
        apply_mask(&mut dpooled, mask);
        let n = hs.rows() as f64;
        for (ids, h) in seq.features.iter().zip(hs.iter_rows()) {
            let da: Vec<f64> = dpooled.iter().zip(h).map(|(d, h)| d / n * (1.0 - h * h)).collect();
            backprop_body(&mut grads, ids, &da);
        }
    }
    Ok((value, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, ModelDims, Seeds};
    use crate::seed;

    fn small_params() -> ModelParameters {
        init_model(ModelDims::new(16, 4, 5).unwrap(), Seeds::new(11, 0, 12))
    }

    fn batch() -> Vec<TaggedSequence> {
        vec![TaggedSequence {
            features: vec![vec![0, 3, 3, 7], vec![1, 2, 15], vec![4, 5, 6, 0]],
            labels: vec![Some(1), Some(0), Some(3)],
        }]
    }

    /// Applies `f` to a copy of the parameter at flat index `k` of the
    /// concatenation body ++ head weights ++ head bias.
    fn perturbed(p: &ModelParameters, k: usize, delta: f64) -> ModelParameters {
        let mut q = p.clone();
        let nb = q.body.as_slice().len();
        let nw = q.head.weights.as_slice().len();
        if k < nb {
            q.body.as_mut_slice()[k] += delta;
        } else if k < nb + nw {
            q.head.weights.as_mut_slice()[k - nb] += delta;
        } else {
            q.head.bias[k - nb - nw] += delta;
        }
        q
    }

    fn flat(p: &ModelParameters, g: &Gradients) -> Vec<f64> {
        let mut out = g.dense_body(p.dims).into_vec();
        out.extend_from_slice(g.head_weights.as_slice());
        out.extend_from_slice(&g.head_bias);
        out
    }

    fn check_fd<F>(p: &ModelParameters, loss_of: F, analytic: Vec<f64>)
    where
        F: Fn(&ModelParameters) -> f64,
    {
        let h = 1e-5;
        let fd: Vec<f64> = (0..analytic.len())
            .map(|k| (loss_of(&perturbed(p, k, h)) - loss_of(&perturbed(p, k, -h))) / (2.0 * h))
            .collect();
        let diff: f64 = fd
            .iter()
            .zip(&analytic)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(scale > 0.0);
        assert!(diff / scale < 1e-4, "relative error {}", diff / scale);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = small_params();
        for loss in [LossKind::SoftMacroF1, LossKind::CrossEntropy] {
            for dropout in [0.0, 0.3] {
                let run =
                    |q: &ModelParameters| forward_backward(q, &batch(), loss, dropout, &mut seed::rng(5)).unwrap();
                let (_, g) = run(&p);
                check_fd(&p, |q| run(q).0, flat(&p, &g));
            }
        }
    }

    #[test]
    fn pooled_gradients_match_finite_differences() {
        let p = init_model(ModelDims::new(16, 4, 2).unwrap(), Seeds::new(3, 0, 4));
        let b = vec![
            PooledSequence {
                features: vec![vec![0, 1], vec![2, 3], vec![3, 9]],
                label: 1,
            },
            PooledSequence {
                features: vec![vec![5, 6]],
                label: 0,
            },
        ];
        for loss in [LossKind::SoftMacroF1, LossKind::CrossEntropy] {
            for dropout in [0.0, 0.2] {
                let run =
                    |q: &ModelParameters| forward_backward_pooled(q, &b, loss, dropout, &mut seed::rng(8)).unwrap();
                let (_, g) = run(&p);
                check_fd(&p, |q| run(q).0, flat(&p, &g));
            }
        }
    }

    #[test]
    fn no_dropout_is_bit_identical_and_leaves_rng() {
        let p = small_params();
        let mut r1 = seed::rng(1);
        let mut r2 = seed::rng(2);
        let a = forward_backward(&p, &batch(), LossKind::SoftMacroF1, 0.0, &mut r1).unwrap();
        let b = forward_backward(&p, &batch(), LossKind::SoftMacroF1, 0.0, &mut r2).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
        assert_eq!(r1.random::<u64>(), seed::rng(1).random::<u64>());
    }

    #[test]
    fn unlabelled_units_are_skipped() {
        let p = small_params();
        let mut b = batch();
        b[0].labels[1] = None;
        let (_, g) = forward_backward(&p, &b, LossKind::CrossEntropy, 0.0, &mut seed::rng(0)).unwrap();
        assert!(!g.body.contains_key(&15));
        b[0].labels = vec![None; 3];
        assert_eq!(
            forward_backward(&p, &b, LossKind::CrossEntropy, 0.0, &mut seed::rng(0)).unwrap_err(),
            ModelError::EmptyBatch
        );
    }

    #[test]
    fn shape_errors() {
        let p = small_params();
        let mut b = batch();
        b[0].features[0][0] = 16;
        assert!(matches!(
            forward_backward(&p, &b, LossKind::CrossEntropy, 0.0, &mut seed::rng(0)),
            Err(ModelError::ShapeMismatch(_))
        ));
        let mut b = batch();
        b[0].labels[0] = Some(5);
        assert!(matches!(
            forward_backward(&p, &b, LossKind::CrossEntropy, 0.0, &mut seed::rng(0)),
            Err(ModelError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn probabilities_are_rows_of_softmax() {
        let p = small_params();
        let probs = token_probabilities(&p, &batch()[0].features).unwrap();
        for row in probs.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

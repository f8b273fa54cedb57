//! Soft macro-F1 loss.
//!
//! For each tag class `c` (one-vs-rest) and token `i` with predicted
//! probability `p_ic` and gold indicator `y_ic`:
//!
//! ```text
//! soft_tp = sum_i p_ic * y_ic
//! soft_fp = sum_i p_ic * (1 - y_ic)
//! soft_fn = sum_i (1 - p_ic) * y_ic
//! P = soft_tp / (soft_tp + soft_fp + eps)
//! R = soft_tp / (soft_tp + soft_fn + eps)
//! F = 2 P R / (P + R + eps)
//! loss = 1 - mean of F over classes with gold support
//! ```

use super::MetricsError;
use crate::matrix::softmax;
use crate::Matrix;

pub const DEFAULT_SMOOTHING: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SoftClassCounts {
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
    /// Number of tokens whose gold tag is this class.
    pub support: usize,
}

impl SoftClassCounts {
    fn precision(&self, eps: f64) -> f64 {
        self.tp / (self.tp + self.fp + eps)
    }

    fn recall(&self, eps: f64) -> f64 {
        self.tp / (self.tp + self.fn_ + eps)
    }

    pub fn f1(&self, eps: f64) -> f64 {
        let p = self.precision(eps);
        let r = self.recall(eps);
        2.0 * p * r / (p + r + eps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftCounts {
    pub classes: Vec<SoftClassCounts>,
}

impl SoftCounts {
    pub fn supported(&self) -> impl Iterator<Item = (usize, &SoftClassCounts)> {
        self.classes.iter().enumerate().filter(|(_, c)| c.support > 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub value: f64,
    /// d loss / d logits, one row per token.
    pub grad: Matrix,
}

fn check_gold(rows: usize, cols: usize, gold: &[usize]) -> Result<(), MetricsError> {
    if rows != gold.len() {
        return Err(MetricsError::ShapeMismatch(format!(
            "{rows} rows but {} gold labels",
            gold.len()
        )));
    }
    if let Some(&g) = gold.iter().find(|&&g| g >= cols) {
        return Err(MetricsError::ShapeMismatch(format!(
            "gold label {g} outside {cols} classes"
        )));
    }
    Ok(())
}

/// Soft true positive, false positive and false negative mass per class.
pub fn soft_counts(probs: &Matrix, gold: &[usize]) -> Result<SoftCounts, MetricsError> {
    check_gold(probs.rows(), probs.cols(), gold)?;
    let mut classes = vec![SoftClassCounts::default(); probs.cols()];
    for (i, (row, &g)) in probs.iter_rows().zip(gold).enumerate() {
        let sum: f64 = row.iter().sum();
        if row.iter().any(|p| !p.is_finite()) {
            return Err(MetricsError::NonFiniteInput { row: i });
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MetricsError::ShapeMismatch(format!("row {i} sums to {sum}")));
        }
        for (c, (&p, counts)) in row.iter().zip(classes.iter_mut()).enumerate() {
            if c == g {
                counts.tp += p;
                counts.fn_ += 1.0 - p;
                counts.support += 1;
            } else {
                counts.fp += p;
            }
        }
    }
    Ok(SoftCounts { classes })
}

/// `1 - mean soft F1` over classes with gold support.
pub fn soft_macro_f1_loss(probs: &Matrix, gold: &[usize], eps: f64) -> Result<f64, MetricsError> {
    let counts = soft_counts(probs, gold)?;
    let (n, sum) = counts
        .supported()
        .fold((0usize, 0.0), |(n, s), (_, c)| (n + 1, s + c.f1(eps)));
    if n == 0 {
        return Err(MetricsError::NoGoldSupport);
    }
    Ok(1.0 - sum / n as f64)
}

/// Loss of `softmax(logits)` and its exact gradient with respect to the logits.
pub fn soft_loss_gradient(logits: &Matrix, gold: &[usize], eps: f64) -> Result<LossGradient, MetricsError> {
    check_gold(logits.rows(), logits.cols(), gold)?;
    if let Some(row) = logits.iter_rows().position(|r| r.iter().any(|z| !z.is_finite())) {
        return Err(MetricsError::NonFiniteInput { row });
    }
    let (n, t) = (logits.rows(), logits.cols());
    let mut probs = Matrix::zeros(n, t);
    for i in 0..n {
        probs.row_mut(i).copy_from_slice(&softmax(logits.row(i)));
    }
    let counts = soft_counts(&probs, gold)?;
    let supported: Vec<usize> = counts.supported().map(|(c, _)| c).collect();
    if supported.is_empty() {
        return Err(MetricsError::NoGoldSupport);
    }
    let k = supported.len() as f64;
    let value = 1.0 - supported.iter().map(|&c| counts.classes[c].f1(eps)).sum::<f64>() / k;

    // Per class: dL/dp_ic = a_c + b_c * y_ic, since precision depends on p_ic
    // through the predicted mass and recall only through the gold tokens.
    let mut a = vec![0.0; t];
    let mut b = vec![0.0; t];
    for &c in &supported {
        let s = &counts.classes[c];
        let p = s.precision(eps);
        let r = s.recall(eps);
        let d = p + r + eps;
        let df_dp = 2.0 * r * (r + eps) / (d * d);
        let df_dr = 2.0 * p * (p + eps) / (d * d);
        let mass = s.tp + s.fp + eps;
        // dP/dp_ic = (y_ic * mass - tp) / mass^2 ; dR/dp_ic = y_ic / (tp + fn + eps)
        a[c] = -(df_dp * (-s.tp / (mass * mass))) / k;
        b[c] = -(df_dp / mass + df_dr / (s.tp + s.fn_ + eps)) / k;
    }

    let mut grad = Matrix::zeros(n, t);
    for (i, &gi) in gold.iter().enumerate() {
        let p = probs.row(i);
        let g: Vec<f64> = (0..t).map(|c| a[c] + if c == gi { b[c] } else { 0.0 }).collect();
        let dot: f64 = p.iter().zip(&g).map(|(p, g)| p * g).sum();
        for (j, out) in grad.row_mut(i).iter_mut().enumerate() {
            *out = p[j] * (g[j] - dot);
        }
    }
    Ok(LossGradient { value, grad })
}

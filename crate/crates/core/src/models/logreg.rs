//! Logistic regression trained by full-batch gradient descent.
//!
//! The objective is L2-regularized mean cross-entropy; the bias is
//! not regularized. Weights start at zero, so training is a pure
//! function of the data and hyperparameters — the seed argument is
//! accepted for interface symmetry with the SVM but has no effect.
//! Inputs are expected standardized (see `features::standardize`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LabeledDataset;

/// Trained logistic-regression parameters plus training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Regularized mean cross-entropy after the final update.
    pub final_loss: f64,
}

/// Numerically stable sigmoid.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Regularized loss and its gradient at (`weights`, `bias`).
///
/// Returns (loss, d/dweights, d/dbias). Exposed so the gradient can be
/// verified against finite differences.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    features: &[Vec<f64>],
    labels: &[u8],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let d = weights.len();
    let mut loss = 0.0;
    let mut grad_w = vec![0.0f64; d];
    let mut grad_b = 0.0f64;
    for (row, &label) in features.iter().zip(labels) {
        let y = label as f64;
        let z = bias + row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>();
        // −[y·ln p + (1−y)·ln(1−p)] = softplus(z) − y·z.
        loss += softplus(z) - y * z;
        let err = sigmoid(z) - y;
        for (g, x) in grad_w.iter_mut().zip(row) {
            *g += err * x;
        }
        grad_b += err;
    }
    loss /= n;
    grad_b /= n;
    let mut reg = 0.0;
    for (g, &w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
        reg += w * w;
    }
    loss += 0.5 * l2 * reg;
    (loss, grad_w, grad_b)
}

/// Trains by `epochs` full-batch gradient-descent steps.
pub fn train_logreg(
    train: &LabeledDataset,
    lr: f64,
    epochs: usize,
    l2: f64,
    _seed: u64,
) -> Result<LogRegModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (n0, n1) = train.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    if lr.is_nan() || lr <= 0.0 || epochs == 0 || l2.is_nan() || l2 < 0.0 {
        return Err(Error::InvalidHyperparameter(format!(
            "logreg needs lr > 0, epochs >= 1, l2 >= 0; got lr {lr}, epochs {epochs}, l2 {l2}"
        )));
    }
    let d = train.feature_names.len();
    let mut weights = vec![0.0f64; d];
    let mut bias = 0.0f64;
    for _ in 0..epochs {
        let (_, grad_w, grad_b) =
            loss_and_gradient(&weights, bias, &train.features, &train.labels, l2);
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= lr * g;
        }
        bias -= lr * grad_b;
    }
    let (final_loss, _, _) = loss_and_gradient(&weights, bias, &train.features, &train.labels, l2);
    Ok(LogRegModel {
        weights,
        bias,
        epochs,
        learning_rate: lr,
        l2,
        final_loss,
    })
}

/// Predicted label and probability for one feature row.
/// Probability ≥ 0.5 maps to class 1 (boundary ties are vessel).
pub fn predict_logreg(model: &LogRegModel, row: &[f64]) -> Result<(u8, f64)> {
    if row.len() != model.weights.len() {
        return Err(Error::WidthMismatch {
            expected: model.weights.len(),
            got: row.len(),
        });
    }
    let z = model.bias
        + row
            .iter()
            .zip(&model.weights)
            .map(|(x, w)| x * w)
            .sum::<f64>();
    let p = sigmoid(z);
    Ok((u8::from(p >= 0.5), p))
}

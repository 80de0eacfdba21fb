//! Training losses.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Numerically stable `ln(1 + e^x)`.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-class positively weighted sigmoid cross-entropy with logits.
///
/// For logit `z`, target `t` and positive-class weight `w`:
/// `l = w t softplus(-z) + (1 - t) softplus(z)`, averaged over every
/// element of the batch. Returns the loss and its gradient with respect to
/// the logits. Targets must be exactly 0 or 1 and weights strictly
/// positive.
pub fn weighted_bce_loss(
    logits: &Tensor,
    targets: &Tensor,
    pos_weights: &[f64],
) -> Result<(f64, Tensor)> {
    if logits.shape() != targets.shape() {
        return Err(Error::Dim(format!(
            "logits {:?} vs targets {:?}",
            logits.shape(),
            targets.shape()
        )));
    }
    if logits.cols() != pos_weights.len() {
        return Err(Error::Dim(format!(
            "{} classes but {} pos_weights",
            logits.cols(),
            pos_weights.len()
        )));
    }
    if pos_weights.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Config("pos_weights must be > 0".into()));
    }
    let classes = logits.cols();
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(logits.shape());
    for r in 0..logits.rows() {
        let z = logits.row_slice(r);
        let t = targets.row_slice(r);
        let g = grad.row_slice_mut(r);
        for j in 0..classes {
            if t[j] != 0.0 && t[j] != 1.0 {
                return Err(Error::Config(format!(
                    "target must be 0 or 1, got {}",
                    t[j]
                )));
            }
            let w = pos_weights[j];
            loss += w * t[j] * softplus(-z[j]) + (1.0 - t[j]) * softplus(z[j]);
            let s = sigmoid(z[j]);
            g[j] = ((1.0 - t[j]) * s - w * t[j] * (1.0 - s)) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Mean absolute error with subgradient 0 at exact ties.
pub fn l1_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::Dim(format!(
            "pred {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(pred.shape());
    for ((p, t), g) in pred
        .data()
        .iter()
        .zip(target.data())
        .zip(grad.data_mut().iter_mut())
    {
        let d = p - t;
        loss += d.abs();
        *g = if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        };
    }
    Ok((loss / n, grad))
}

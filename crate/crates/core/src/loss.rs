//! Loss and evaluation functions for the segmentation network: binary
//! cross-entropy, soft Sørensen–Dice, the hybrid BCE + (1 − Dice) training
//! loss, and the Jaccard index used as the reported metric.

use crate::error::{Error, Result};
use crate::raster::BinaryMask;
use crate::tensor::Tensor;

/// Predictions are clamped into [EPS, 1 − EPS] before any logarithm.
pub const EPS: f64 = 1e-7;

/// Relative weight of the (1 − Dice) term in the hybrid loss.
pub const DEFAULT_DICE_WEIGHT: f64 = 1.0;

fn check_binary(target: &Tensor) -> Result<()> {
    for &v in target.data() {
        if v != 0.0 && v != 1.0 {
            return Err(Error::NonBinaryTarget(v));
        }
    }
    Ok(())
}

/// Mean binary cross-entropy: −(1/N) Σ [y·log p + (1−y)·log(1−p)].
pub fn bce(pred: &Tensor, target: &Tensor) -> Result<f64> {
    pred.check_same_shape(target)?;
    check_binary(target)?;
    let n = pred.len() as f64;
    let mut acc = 0.0;
    for (&p, &y) in pred.data().iter().zip(target.data().iter()) {
        let pc = p.clamp(EPS, 1.0 - EPS);
        acc -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
    }
    Ok(acc / n)
}

/// Soft Sørensen–Dice coefficient: 2|a·b| / (|a|² + |b|²), in [0, 1].
/// Returns 1 when both inputs are all-zero (nothing there, nothing missed).
pub fn dice(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.check_same_shape(b)?;
    let mut s_ab = 0.0;
    let mut s_aa = 0.0;
    let mut s_bb = 0.0;
    for (&x, &y) in a.data().iter().zip(b.data().iter()) {
        s_ab += x * y;
        s_aa += x * x;
        s_bb += y * y;
    }
    if s_aa + s_bb == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0 * s_ab / (s_aa + s_bb))
}

/// Hybrid training loss: bce + weight · (1 − dice). Zero iff the prediction
/// is perfect up to the clamp.
pub fn hybrid_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    hybrid_loss_weighted(pred, target, DEFAULT_DICE_WEIGHT)
}

pub fn hybrid_loss_weighted(pred: &Tensor, target: &Tensor, dice_weight: f64) -> Result<f64> {
    let b = bce(pred, target)?;
    let d = dice(pred, target)?;
    Ok(b + dice_weight * (1.0 - d))
}

/// Analytic gradient of the hybrid loss with respect to the prediction.
/// Pixels clamped by the BCE epsilon get zero BCE gradient, matching the
/// clamped forward value.
pub fn hybrid_loss_grad(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    hybrid_loss_grad_weighted(pred, target, DEFAULT_DICE_WEIGHT)
}

pub fn hybrid_loss_grad_weighted(
    pred: &Tensor,
    target: &Tensor,
    dice_weight: f64,
) -> Result<Tensor> {
    pred.check_same_shape(target)?;
    check_binary(target)?;
    let n = pred.len() as f64;

    let mut s_ab = 0.0;
    let mut s_aa = 0.0;
    let mut s_bb = 0.0;
    for (&p, &y) in pred.data().iter().zip(target.data().iter()) {
        s_ab += p * y;
        s_aa += p * p;
        s_bb += y * y;
    }
    let t = s_aa + s_bb;

    let mut grad = Tensor::zeros(pred.shape());
    for (i, (&p, &y)) in pred.data().iter().zip(target.data().iter()).enumerate() {
        // BCE term; zero where the clamp is active.
        let mut g = 0.0;
        if p > EPS && p < 1.0 - EPS {
            g += (p - y) / (p * (1.0 - p)) / n;
        }
        // d(1 − D)/dp_i = −2 (y_i·t − 2 p_i·s_ab) / t².
        if t > 0.0 {
            g -= dice_weight * 2.0 * (y * t - 2.0 * p * s_ab) / (t * t);
        }
        grad.data_mut()[i] = g;
    }
    Ok(grad)
}

/// Jaccard index |A∩B| / |A∪B| on binary masks; 1 when both are empty.
pub fn jaccard(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", a.width, a.height),
            got: format!("{}x{}", b.width, b.height),
        });
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.data.iter().zip(b.data.iter()) {
        if x && y {
            inter += 1;
        }
        if x || y {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Jaccard between a probability tensor (thresholded at `threshold`) and a
/// binary target tensor. Used for the per-epoch training metric.
pub fn jaccard_tensors(pred: &Tensor, target: &Tensor, threshold: f64) -> Result<f64> {
    pred.check_same_shape(target)?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&p, &y) in pred.data().iter().zip(target.data().iter()) {
        let a = p > threshold;
        let b = y > threshold;
        if a && b {
            inter += 1;
        }
        if a || b {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

//! The two-term weighted cross-entropy loss and class-weight derivation.

use super::pseudo::MixedTarget;
use crate::error::{Error, Result};
use crate::net::Tensor;
use crate::raster::{FuelClass, LabelRaster, NUM_CLASSES, TRAINABLE_CLASSES, UNLABELED};

/// Scalar pieces of the segmentation loss.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossBreakdown {
    /// Mean weighted cross-entropy against the mixed target.
    pub scribble_term: f64,
    /// Mean weighted cross-entropy against the point annotations
    /// (before the lambda factor).
    pub point_term: f64,
    /// `scribble_term + lambda * point_term`.
    pub total: f64,
}

/// Cross-entropy of the mixed target plus `lambda` times the
/// cross-entropy of the point annotations, with the analytic gradient
/// w.r.t. the logits.
///
/// Each term is the mean over its labeled pixels of
/// `pixel_weight * class_weight * CE`; a term with no labeled pixels
/// contributes exactly zero. `Ignored` never contributes to either term.
pub fn loss_seg(
    logits: &Tensor,
    mixed: &MixedTarget,
    points: &LabelRaster,
    class_weights: &[f64],
    lambda: f64,
    weighted_point_loss: bool,
) -> Result<(LossBreakdown, Tensor)> {
    let (classes, h, w) = match logits.shape.as_slice() {
        [c, h, w] if *c == TRAINABLE_CLASSES => (*c, *h, *w),
        other => {
            return Err(Error::ShapeMismatch(format!(
                "expected {TRAINABLE_CLASSES} x H x W logits, got {other:?}"
            )))
        }
    };
    if mixed.labels.height() != h
        || mixed.labels.width() != w
        || points.height() != h
        || points.width() != w
    {
        return Err(Error::ShapeMismatch(
            "targets do not match the logits".to_string(),
        ));
    }
    if class_weights.len() != NUM_CLASSES {
        return Err(Error::InvalidConfig(format!(
            "class_weights needs {NUM_CLASSES} entries"
        )));
    }
    if logits.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue("logits".to_string()));
    }

    let plane = h * w;
    let ignored = FuelClass::Ignored.id();

    let n_mixed = mixed
        .weights
        .values()
        .iter()
        .zip(mixed.labels.values())
        .filter(|(&weight, &label)| weight > 0.0 && label != UNLABELED && label != ignored)
        .count();
    let n_points = points
        .values()
        .iter()
        .filter(|&&c| c != UNLABELED && c != ignored)
        .count();

    let mut d_logits = vec![0.0f64; logits.data.len()];
    let mut scribble_sum = 0.0f64;
    let mut point_sum = 0.0f64;
    let mut probs = vec![0.0f64; classes];

    for i in 0..plane {
        let mixed_label = mixed.labels.values()[i];
        let mixed_weight = mixed.weights.values()[i] as f64;
        let point_label = points.values()[i];
        let mixed_active = mixed_weight > 0.0 && mixed_label != UNLABELED && mixed_label != ignored;
        let point_active = point_label != UNLABELED && point_label != ignored;
        if !mixed_active && !point_active {
            continue;
        }

        // Per-pixel log-softmax via the max trick.
        let mut max = f64::NEG_INFINITY;
        for c in 0..classes {
            max = max.max(logits.data[c * plane + i]);
        }
        let mut denom = 0.0;
        for c in 0..classes {
            let e = (logits.data[c * plane + i] - max).exp();
            probs[c] = e;
            denom += e;
        }
        let log_denom = denom.ln();
        for p in probs.iter_mut() {
            *p /= denom;
        }

        // Coefficient of (softmax - onehot) per term.
        let mut coeff = [0.0f64; 2];
        let mut targets = [0usize; 2];
        let mut n_terms = 0;
        if mixed_active {
            let cw = class_weights[mixed_label as usize];
            let ce = log_denom - (logits.data[mixed_label as usize * plane + i] - max);
            scribble_sum += mixed_weight * cw * ce;
            coeff[n_terms] = mixed_weight * cw / n_mixed as f64;
            targets[n_terms] = mixed_label as usize;
            n_terms += 1;
        }
        if point_active {
            let cw = if weighted_point_loss {
                class_weights[point_label as usize]
            } else {
                1.0
            };
            let ce = log_denom - (logits.data[point_label as usize * plane + i] - max);
            point_sum += cw * ce;
            coeff[n_terms] = lambda * cw / n_points as f64;
            targets[n_terms] = point_label as usize;
            n_terms += 1;
        }
        for t in 0..n_terms {
            let a = coeff[t];
            if a == 0.0 {
                continue;
            }
            for c in 0..classes {
                d_logits[c * plane + i] += a * probs[c];
            }
            d_logits[targets[t] * plane + i] -= a;
        }
    }

    let scribble_term = if n_mixed > 0 {
        scribble_sum / n_mixed as f64
    } else {
        0.0
    };
    let point_term = if n_points > 0 {
        point_sum / n_points as f64
    } else {
        0.0
    };
    let breakdown = LossBreakdown {
        scribble_term,
        point_term,
        total: scribble_term + lambda * point_term,
    };
    Ok((
        breakdown,
        Tensor::from_data(logits.shape.clone(), d_logits),
    ))
}

/// Inverse-frequency class weights from a scribble dataset, normalized to
/// mean one over the classes present; absent classes get zero and the
/// `Ignored` class never counts. Frequencies are floored at 1e-4 so very
/// rare classes cannot dominate.
pub fn class_weights_from_frequencies(scribbles: &[&LabelRaster]) -> Result<Vec<f64>> {
    const FREQUENCY_FLOOR: f64 = 1e-4;
    let mut counts = [0u64; NUM_CLASSES];
    for raster in scribbles {
        for &v in raster.values() {
            if v != UNLABELED && v != FuelClass::Ignored.id() {
                counts[v as usize] += 1;
            }
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyDataset(
            "no labeled pixels to derive class weights from".to_string(),
        ));
    }
    let mut weights = vec![0.0f64; NUM_CLASSES];
    let mut present = 0usize;
    let mut sum = 0.0f64;
    for c in 0..TRAINABLE_CLASSES {
        if counts[c] > 0 {
            let freq = counts[c] as f64 / total as f64;
            weights[c] = 1.0 / freq.max(FREQUENCY_FLOOR);
            present += 1;
            sum += weights[c];
        }
    }
    let mean = sum / present as f64;
    for weight in weights.iter_mut() {
        *weight /= mean;
    }
    Ok(weights)
}

//! Pseudo-label generation and label mixing.

use crate::error::{Error, Result};
use crate::net::SegModel;
use crate::raster::{FuelClass, LabelRaster, MultiSpectralImage, WeightMap, UNLABELED};

/// Training target produced by fusing scribbles over filtered
/// pseudo-labels, with per-pixel loss weights.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedTarget {
    pub labels: LabelRaster,
    pub weights: WeightMap,
}

impl MixedTarget {
    /// Scribbles alone: weight 1 on trainable scribble pixels, 0
    /// elsewhere. Used when mixing is disabled.
    pub fn from_scribbles(scribbles: &LabelRaster) -> Self {
        let empty = LabelRaster::unlabeled(scribbles.height(), scribbles.width());
        mix_labels(&empty, scribbles).expect("shapes match by construction")
    }
}

/// Runs the teacher on the (clean, unaugmented) image and keeps the argmax
/// class wherever the confidence clears `tau`; everything else is
/// [`UNLABELED`]. The per-pixel confidence map is returned for auditing.
pub fn generate_pseudo_labels(
    teacher: &SegModel,
    image: &MultiSpectralImage,
    tau: f64,
) -> Result<(LabelRaster, Vec<f32>)> {
    let probs = teacher.infer(image)?;
    let argmax = probs.argmax_labels();
    let confidence = probs.confidence();
    let tau = tau as f32;
    let mut classes = argmax.values().to_vec();
    for (value, &conf) in classes.iter_mut().zip(&confidence) {
        if conf < tau {
            *value = UNLABELED;
        }
    }
    Ok((
        LabelRaster::new(classes, image.height(), image.width())?,
        confidence,
    ))
}

/// Fuses scribbles on top of pseudo-labels.
///
/// Scribble pixels always win and carry weight 1 (0 for `Ignored`
/// scribbles, which stay in the target but never reach the loss).
/// Remaining pseudo-labeled pixels carry the coverage weight
/// `|pseudo-labeled| / |pixels|`, counted over the pseudo raster before
/// fusion. Pixels labeled by neither stay unlabeled at weight 0.
pub fn mix_labels(pseudo: &LabelRaster, scribbles: &LabelRaster) -> Result<MixedTarget> {
    if pseudo.height() != scribbles.height() || pseudo.width() != scribbles.width() {
        return Err(Error::ShapeMismatch(format!(
            "pseudo {}x{} vs scribbles {}x{}",
            pseudo.height(),
            pseudo.width(),
            scribbles.height(),
            scribbles.width()
        )));
    }
    let (h, w) = (pseudo.height(), pseudo.width());
    let total = (h * w) as f64;
    let surviving = pseudo.labeled_count() as f64;
    let pseudo_weight = (surviving / total) as f32;

    let ignored = FuelClass::Ignored.id();
    let mut labels = vec![UNLABELED; h * w];
    let mut weights = vec![0.0f32; h * w];
    for i in 0..h * w {
        let s = scribbles.values()[i];
        let p = pseudo.values()[i];
        if s != UNLABELED {
            labels[i] = s;
            weights[i] = if s == ignored { 0.0 } else { 1.0 };
        } else if p != UNLABELED {
            labels[i] = p;
            weights[i] = pseudo_weight;
        }
    }
    Ok(MixedTarget {
        labels: LabelRaster::new(labels, h, w)?,
        weights: WeightMap::new(weights, h, w)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Architecture;
    use crate::raster::{ProbabilityMap, TRAINABLE_CLASSES};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, h: usize, w: usize) -> MultiSpectralImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let names = MultiSpectralImage::default_band_names();
        let data = (0..names.len() * h * w)
            .map(|_| rng.gen_range(0.0..1.0))
            .collect();
        MultiSpectralImage::new(data, names, h, w).unwrap()
    }

    #[test]
    fn tau_zero_labels_everything() {
        let model = SegModel::new(Architecture::default(), 3).unwrap();
        let image = random_image(4, 8, 8);
        let (labels, conf) = generate_pseudo_labels(&model, &image, 0.0).unwrap();
        assert_eq!(labels.labeled_count(), 64);
        assert_eq!(conf.len(), 64);
    }

    #[test]
    fn uniform_teacher_yields_nothing_at_half() {
        // A fresh model has a zero head, so its confidence is exactly 1/9.
        let model = SegModel::new(Architecture::default(), 3).unwrap();
        let image = random_image(4, 8, 8);
        let (labels, conf) = generate_pseudo_labels(&model, &image, 0.5).unwrap();
        assert_eq!(labels.labeled_count(), 0);
        assert!(conf.iter().all(|&c| (c - 1.0 / 9.0).abs() < 1e-6));
    }

    #[test]
    fn tau_one_keeps_only_certain_pixels() {
        let model = SegModel::new(Architecture::default(), 3).unwrap();
        let image = random_image(4, 8, 8);
        let (labels, _) = generate_pseudo_labels(&model, &image, 1.0).unwrap();
        assert_eq!(labels.labeled_count(), 0);

        // A synthetic fully-certain distribution survives tau = 1.
        let mut probs = vec![0.0f32; TRAINABLE_CLASSES * 4];
        for i in 0..4 {
            probs[2 * 4 + i] = 1.0;
        }
        let pm = ProbabilityMap::new(probs, 2, 2).unwrap();
        let labels = pm.argmax_labels();
        let conf = pm.confidence();
        assert!(conf.iter().all(|&c| c >= 1.0));
        assert_eq!(labels.labeled_count(), 4);
    }

    #[test]
    fn scribbles_override_pseudo_with_weight_one() {
        let mut pseudo = LabelRaster::unlabeled(2, 2);
        pseudo.set(0, 0, FuelClass::Artificial.id());
        pseudo.set(0, 1, FuelClass::Grassland.id());
        let mut scribbles = LabelRaster::unlabeled(2, 2);
        scribbles.set(0, 0, FuelClass::Water.id());
        let mixed = mix_labels(&pseudo, &scribbles).unwrap();
        assert_eq!(mixed.labels.get(0, 0), FuelClass::Water.id());
        assert_eq!(mixed.weights.get(0, 0), 1.0);
        // Pseudo-only pixel keeps the pseudo class at coverage weight 2/4.
        assert_eq!(mixed.labels.get(0, 1), FuelClass::Grassland.id());
        assert_eq!(mixed.weights.get(0, 1), 0.5);
        // Unlabeled everywhere else.
        assert_eq!(mixed.labels.get(1, 1), UNLABELED);
        assert_eq!(mixed.weights.get(1, 1), 0.0);
    }

    #[test]
    fn coverage_weight_is_exact_on_half_filled_tile() {
        let n = 512;
        let mut pseudo = LabelRaster::unlabeled(n, n);
        let mut count = 0usize;
        'outer: for r in 0..n {
            for c in 0..n {
                pseudo.set(r, c, FuelClass::Bare.id());
                count += 1;
                if count == 131_072 {
                    break 'outer;
                }
            }
        }
        let scribbles = LabelRaster::unlabeled(n, n);
        let mixed = mix_labels(&pseudo, &scribbles).unwrap();
        assert_eq!(mixed.weights.get(0, 0), 0.5);
    }

    #[test]
    fn empty_inputs_give_empty_target() {
        let pseudo = LabelRaster::unlabeled(4, 4);
        let scribbles = LabelRaster::unlabeled(4, 4);
        let mixed = mix_labels(&pseudo, &scribbles).unwrap();
        assert_eq!(mixed.labels.labeled_count(), 0);
        assert!(mixed.weights.values().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn ignored_scribbles_carry_zero_weight() {
        let mut pseudo = LabelRaster::unlabeled(2, 2);
        pseudo.set(1, 1, FuelClass::Water.id());
        let mut scribbles = LabelRaster::unlabeled(2, 2);
        scribbles.set(0, 0, FuelClass::Ignored.id());
        let mixed = mix_labels(&pseudo, &scribbles).unwrap();
        assert_eq!(mixed.labels.get(0, 0), FuelClass::Ignored.id());
        assert_eq!(mixed.weights.get(0, 0), 0.0);
    }
}

//! The training loop: batch sampling, augmentation, teacher pseudo-labels
//! on the clean view, label mixing, the weighted two-term loss, AdamW and
//! the EMA teacher update. Deterministic given the config seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::augment::{gaussian_blur, sample_augment, AugmentParams};
use super::config::TrainConfig;
use super::loss::{class_weights_from_frequencies, loss_seg};
use super::optim::{lr_at, optimizer_step, AdamWState};
use super::pseudo::{generate_pseudo_labels, mix_labels, MixedTarget};
use crate::error::{Error, Result};
use crate::metrics::{iou, ConfusionMatrix};
use crate::net::{ema_update, Architecture, SegModel};
use crate::raster::{LabelRaster, MultiSpectralImage, TRAINABLE_CLASSES};

pub struct TrainSample {
    pub name: String,
    pub image: MultiSpectralImage,
    pub scribbles: LabelRaster,
    pub points: LabelRaster,
}

pub struct ValSample {
    pub name: String,
    pub image: MultiSpectralImage,
    pub labels: LabelRaster,
}

pub struct Dataset {
    pub train: Vec<TrainSample>,
    pub val: Vec<ValSample>,
}

/// One metrics-log row; written out as CSV by the train command.
#[derive(Clone, Copy, Debug)]
pub struct IterationLog {
    pub iter: u64,
    pub lr: f64,
    pub loss_scribble: f64,
    pub loss_point: f64,
    /// Mean surviving pseudo-label coverage over the batch.
    pub pseudo_cover: f64,
    pub val_miou: Option<f64>,
}

pub struct TrainOutput {
    pub student: SegModel,
    pub teacher: SegModel,
    pub log: Vec<IterationLog>,
    pub class_weights: Vec<f64>,
}

fn validate_dataset(dataset: &Dataset, cfg: &TrainConfig) -> Result<usize> {
    if dataset.train.is_empty() {
        return Err(Error::EmptyDataset("no training samples".to_string()));
    }
    let bands = dataset.train[0].image.band_count();
    let stride = 1usize << cfg.widths.len();
    for s in &dataset.train {
        if s.image.band_count() != bands {
            return Err(Error::ShapeMismatch(format!(
                "sample {} has {} bands, expected {bands}",
                s.name,
                s.image.band_count()
            )));
        }
        let (h, w) = (s.image.height(), s.image.width());
        if s.scribbles.height() != h
            || s.scribbles.width() != w
            || s.points.height() != h
            || s.points.width() != w
        {
            return Err(Error::ShapeMismatch(format!(
                "sample {}: labels do not match the image",
                s.name
            )));
        }
        if h < cfg.tile_size || w < cfg.tile_size {
            return Err(Error::ShapeMismatch(format!(
                "sample {}: {h}x{w} smaller than tile_size {}",
                s.name, cfg.tile_size
            )));
        }
    }
    for s in &dataset.val {
        if s.image.band_count() != bands {
            return Err(Error::ShapeMismatch(format!(
                "val sample {} has {} bands, expected {bands}",
                s.name,
                s.image.band_count()
            )));
        }
        if s.image.height() % stride != 0 || s.image.width() % stride != 0 {
            return Err(Error::ShapeMismatch(format!(
                "val sample {}: {}x{} not divisible by the model stride {stride}",
                s.name,
                s.image.height(),
                s.image.width()
            )));
        }
    }
    Ok(bands)
}

/// Mean IoU (x100) of the model on the validation set.
pub fn validate_miou(model: &SegModel, val: &[ValSample]) -> Result<Option<f64>> {
    if val.is_empty() {
        return Ok(None);
    }
    let mut cm = ConfusionMatrix::new();
    for sample in val {
        let probs = model.infer(&sample.image)?;
        cm.accumulate(&probs.argmax_labels(), &sample.labels)?;
    }
    match iou(&cm) {
        Ok(scores) => Ok(Some(100.0 * scores.mean)),
        Err(Error::EmptyConfusionMatrix) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs the full training loop and returns the student, the EMA teacher
/// and the metrics log. With `total_iters == 0` the freshly initialized
/// models are returned untouched.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    let bands = validate_dataset(dataset, cfg)?;

    let class_weights = match &cfg.class_weights {
        Some(w) => w.clone(),
        None => {
            let scribbles: Vec<&LabelRaster> =
                dataset.train.iter().map(|s| &s.scribbles).collect();
            class_weights_from_frequencies(&scribbles)?
        }
    };

    let arch = Architecture {
        in_bands: bands,
        widths: cfg.widths.clone(),
        classes: TRAINABLE_CLASSES,
    };
    let mut student = SegModel::new(arch, cfg.seed)?;
    let mut teacher = student.clone();
    let mut state = AdamWState::new(&student.params);

    // Stream 1 so the loop draws are independent of model initialization.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);

    let mut log = Vec::new();
    let tile = cfg.tile_size;
    for iter in 0..cfg.total_iters {
        let lr = lr_at(iter, cfg);
        let mut grad_acc = student.params.zeros_like();
        let mut loss_scribble = 0.0;
        let mut loss_point = 0.0;
        let mut pseudo_cover = 0.0;

        for _ in 0..cfg.batch_size {
            let sample = &dataset.train[rng.gen_range(0..dataset.train.len())];
            let (h, w) = (sample.image.height(), sample.image.width());
            let r0 = if h > tile { rng.gen_range(0..=h - tile) } else { 0 };
            let c0 = if w > tile { rng.gen_range(0..=w - tile) } else { 0 };
            let image_crop = sample.image.crop(r0, c0, tile, tile)?;
            let scribble_crop = sample.scribbles.crop(r0, c0, tile, tile)?;
            let point_crop = sample.points.crop(r0, c0, tile, tile)?;

            let aug = if cfg.augment {
                sample_augment(&mut rng)
            } else {
                AugmentParams::identity()
            };
            let aug_scribbles = aug.transform.apply_labels(&scribble_crop);
            let aug_points = aug.transform.apply_labels(&point_crop);
            let mut aug_image = aug.transform.apply_image(&image_crop);
            if let Some(sigma) = aug.blur_sigma {
                aug_image = gaussian_blur(&aug_image, sigma);
            }

            // The teacher sees the clean crop; its pseudo-labels are then
            // moved into the student's augmented frame before mixing.
            let mixed = if cfg.mixing {
                let (pseudo, _) = generate_pseudo_labels(&teacher, &image_crop, cfg.tau)?;
                let pseudo_aug = aug.transform.apply_labels(&pseudo);
                pseudo_cover += pseudo_aug.labeled_count() as f64
                    / (pseudo_aug.height() * pseudo_aug.width()) as f64;
                mix_labels(&pseudo_aug, &aug_scribbles)?
            } else {
                MixedTarget::from_scribbles(&aug_scribbles)
            };

            let (logits, cache) = student.forward(&aug_image)?;
            let (loss, d_logits) = loss_seg(
                &logits,
                &mixed,
                &aug_points,
                &class_weights,
                cfg.lambda,
                cfg.weighted_point_loss,
            )?;
            let grads = student.backward(&cache, &d_logits)?;
            grad_acc.add_scaled(&grads, 1.0 / cfg.batch_size as f64);
            loss_scribble += loss.scribble_term / cfg.batch_size as f64;
            loss_point += loss.point_term / cfg.batch_size as f64;
        }
        pseudo_cover /= cfg.batch_size as f64;

        optimizer_step(&mut student.params, &grad_acc, &mut state, lr, cfg.weight_decay)?;
        ema_update(&mut teacher, &student, cfg.alpha)?;

        let is_last = iter + 1 == cfg.total_iters;
        let want_val =
            cfg.val_interval > 0 && ((iter + 1) % cfg.val_interval == 0 || is_last);
        let want_log =
            cfg.log_interval > 0 && ((iter + 1) % cfg.log_interval == 0 || is_last);
        if want_log || want_val {
            let val_miou = if want_val {
                validate_miou(&student, &dataset.val)?
            } else {
                None
            };
            log.push(IterationLog {
                iter,
                lr,
                loss_scribble,
                loss_point,
                pseudo_cover,
                val_miou,
            });
        }
    }

    Ok(TrainOutput {
        student,
        teacher,
        log,
        class_weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{FuelClass, UNLABELED};
    use rand::{Rng, SeedableRng};

    /// Two-class scenes with opposite layouts. Crops plus flips and
    /// translations make position uninformative, so the model has to use
    /// reflectance.
    fn toy_dataset(n: usize) -> Dataset {
        let names = MultiSpectralImage::default_band_names();
        let bands = names.len();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut train = Vec::new();
        let mut val = Vec::new();
        for (name, horizontal) in [("a", false), ("b", true)] {
            let mut data = vec![0.0f32; bands * n * n];
            let mut dense = LabelRaster::unlabeled(n, n);
            for r in 0..n {
                for c in 0..n {
                    let side = if horizontal { r < n / 2 } else { c < n / 2 };
                    let class = if side {
                        FuelClass::Water
                    } else {
                        FuelClass::Grassland
                    };
                    dense.set(r, c, class.id());
                    for b in 0..bands {
                        let base = match class {
                            FuelClass::Water => 0.1 + 0.02 * b as f32,
                            _ => 0.7 - 0.02 * b as f32,
                        };
                        data[(b * n + r) * n + c] = base + rng.gen_range(-0.01..0.01);
                    }
                }
            }
            let image = MultiSpectralImage::new(data, names.clone(), n, n).unwrap();
            // Scribbles: one stroke near each half center.
            let mut scribbles = LabelRaster::unlabeled(n, n);
            for k in 0..n {
                if horizontal {
                    scribbles.set(n / 4, k, FuelClass::Water.id());
                    scribbles.set(3 * n / 4, k, FuelClass::Grassland.id());
                } else {
                    scribbles.set(k, n / 4, FuelClass::Water.id());
                    scribbles.set(k, 3 * n / 4, FuelClass::Grassland.id());
                }
            }
            let mut points = LabelRaster::unlabeled(n, n);
            points.set(1, 1, dense.get(1, 1));
            points.set(n - 2, n - 2, dense.get(n - 2, n - 2));
            train.push(TrainSample {
                name: name.to_string(),
                image: image.clone(),
                scribbles,
                points,
            });
            val.push(ValSample {
                name: name.to_string(),
                image,
                labels: dense,
            });
        }
        Dataset { train, val }
    }

    fn tiny_config(iters: u64) -> TrainConfig {
        TrainConfig {
            total_iters: iters,
            warmup_iters: iters.min(20),
            tile_size: 16,
            widths: vec![4, 8],
            base_lr: 3e-3,
            alpha: 0.9,
            tau: 0.8,
            val_interval: 0,
            log_interval: 5,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn zero_iterations_returns_untouched_models() {
        let dataset = toy_dataset(32);
        let cfg = TrainConfig {
            total_iters: 0,
            warmup_iters: 0,
            ..tiny_config(0)
        };
        let out = train(&dataset, &cfg).unwrap();
        let fresh = SegModel::new(out.student.arch.clone(), cfg.seed).unwrap();
        assert_eq!(out.student.params, fresh.params);
        assert_eq!(out.teacher.params, fresh.params);
        assert!(out.log.is_empty());
    }

    #[test]
    fn same_seed_gives_bit_identical_runs() {
        let dataset = toy_dataset(32);
        let cfg = tiny_config(12);
        let a = train(&dataset, &cfg).unwrap();
        let b = train(&dataset, &cfg).unwrap();
        for (x, y) in a.student.params.tensors.iter().zip(&b.student.params.tensors) {
            assert!(x
                .tensor
                .data
                .iter()
                .zip(&y.tensor.data)
                .all(|(p, q)| p.to_bits() == q.to_bits()));
        }
        for (x, y) in a.teacher.params.tensors.iter().zip(&b.teacher.params.tensors) {
            assert!(x
                .tensor
                .data
                .iter()
                .zip(&y.tensor.data)
                .all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn training_reduces_loss_and_learns_the_toy_scenes() {
        let dataset = toy_dataset(32);
        let mut cfg = tiny_config(400);
        cfg.val_interval = 400;
        let out = train(&dataset, &cfg).unwrap();
        // Heavy translations occasionally empty a crop's target, so
        // compare the first and last iterations that actually saw labels.
        let first = out
            .log
            .iter()
            .find(|l| l.loss_scribble > 0.0)
            .expect("some batch carried labels");
        let last = out
            .log
            .iter()
            .rev()
            .find(|l| l.loss_scribble > 0.0)
            .unwrap();
        assert!(
            last.loss_scribble < first.loss_scribble,
            "{} -> {}",
            first.loss_scribble,
            last.loss_scribble
        );
        // Both real classes must be segmented well; stray predictions of
        // other classes may exist but must stay marginal.
        let mut cm = ConfusionMatrix::new();
        for sample in &dataset.val {
            let pred = out.student.infer(&sample.image).unwrap().argmax_labels();
            cm.accumulate(&pred, &sample.labels).unwrap();
        }
        let scores = iou(&cm).unwrap();
        let water = scores.per_class[crate::raster::FuelClass::Water.id() as usize].unwrap();
        let grass =
            scores.per_class[crate::raster::FuelClass::Grassland.id() as usize].unwrap();
        assert!(water > 0.5 && grass > 0.5, "water {water}, grass {grass}");
    }

    #[test]
    fn teacher_lags_student_but_follows() {
        let dataset = toy_dataset(32);
        let cfg = tiny_config(30);
        let out = train(&dataset, &cfg).unwrap();
        // The teacher must differ from both the fresh init and the final
        // student (it is a trajectory average).
        let fresh = SegModel::new(out.student.arch.clone(), cfg.seed).unwrap();
        assert_ne!(out.teacher.params, fresh.params);
        assert_ne!(out.teacher.params, out.student.params);
    }
}

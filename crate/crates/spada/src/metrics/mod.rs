//! Evaluation against sparse ground truths: confusion-matrix accumulation,
//! per-class IoU and F1, and multi-section report assembly.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::annot::PointAnnotation;
use crate::error::{Error, Result};
use crate::raster::{FuelClass, LabelRaster, TRAINABLE_CLASSES, UNLABELED};

/// Row-per-ground-truth, column-per-prediction counts over the trainable
/// classes. `UNLABELED` and `Ignored` ground truth never contributes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; TRAINABLE_CLASSES]; TRAINABLE_CLASSES],
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt][pred]
    }

    pub fn add(&mut self, gt: usize, pred: usize) {
        self.counts[gt][pred] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Merges another matrix by addition; accumulation is order-free.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (dst, src) in self
            .counts
            .iter_mut()
            .flatten()
            .zip(other.counts.iter().flatten())
        {
            *dst += src;
        }
    }

    /// Tallies `pred` against dense or sparse ground-truth labels. Only
    /// pixels with trainable ground truth count; predictions there must be
    /// trainable classes.
    pub fn accumulate(&mut self, pred: &LabelRaster, gt: &LabelRaster) -> Result<()> {
        if pred.height() != gt.height() || pred.width() != gt.width() {
            return Err(Error::ShapeMismatch(format!(
                "pred {}x{} vs gt {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        let ignored = FuelClass::Ignored.id();
        for (i, (&g, &p)) in gt.values().iter().zip(pred.values()).enumerate() {
            if g == UNLABELED || g == ignored {
                continue;
            }
            if p == UNLABELED || p == ignored {
                return Err(Error::InvalidPrediction {
                    value: p,
                    row: i / gt.width(),
                    col: i % gt.width(),
                });
            }
            self.add(g as usize, p as usize);
        }
        Ok(())
    }

    /// Tallies `pred` against point annotations. A forest super-class
    /// point counts as correct for either forest prediction, attributed
    /// to the predicted class on the diagonal; a miss is attributed to
    /// the point's stored class row.
    pub fn accumulate_points(
        &mut self,
        pred: &LabelRaster,
        points: &[PointAnnotation],
    ) -> Result<()> {
        let ignored = FuelClass::Ignored.id();
        for point in points {
            if point.row >= pred.height() || point.col >= pred.width() {
                return Err(Error::PointOutOfBounds {
                    row: point.row,
                    col: point.col,
                    height: pred.height(),
                    width: pred.width(),
                });
            }
            let gt_class = point.class.stored_class();
            if gt_class == FuelClass::Ignored {
                continue;
            }
            let p = pred.get(point.row, point.col);
            if p == UNLABELED || p == ignored {
                return Err(Error::InvalidPrediction {
                    value: p,
                    row: point.row,
                    col: point.col,
                });
            }
            let predicted = FuelClass::from_id(p).expect("raster invariant");
            if point.class.matches(predicted) {
                self.add(p as usize, p as usize);
            } else {
                self.add(gt_class.id() as usize, p as usize);
            }
        }
        Ok(())
    }

    fn class_counts(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.counts[c][c];
        let fp: u64 = (0..TRAINABLE_CLASSES)
            .filter(|&g| g != c)
            .map(|g| self.counts[g][c])
            .sum();
        let fn_: u64 = (0..TRAINABLE_CLASSES)
            .filter(|&p| p != c)
            .map(|p| self.counts[c][p])
            .sum();
        (tp, fp, fn_)
    }
}

/// Per-class scores in `[0, 1]`; classes with no support in either the
/// ground truth or the prediction are `None` and excluded from the mean.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassScores {
    pub per_class: [Option<f64>; TRAINABLE_CLASSES],
    pub mean: f64,
}

fn scores_with(cm: &ConfusionMatrix, score: impl Fn(u64, u64, u64) -> f64) -> Result<ClassScores> {
    if cm.is_empty() {
        return Err(Error::EmptyConfusionMatrix);
    }
    let mut per_class = [None; TRAINABLE_CLASSES];
    let mut sum = 0.0;
    let mut n = 0usize;
    for c in 0..TRAINABLE_CLASSES {
        let (tp, fp, fn_) = cm.class_counts(c);
        if tp + fp + fn_ == 0 {
            continue;
        }
        let v = score(tp, fp, fn_);
        per_class[c] = Some(v);
        sum += v;
        n += 1;
    }
    Ok(ClassScores {
        per_class,
        mean: sum / n as f64,
    })
}

/// Intersection over union per class: `TP / (TP + FP + FN)`.
pub fn iou(cm: &ConfusionMatrix) -> Result<ClassScores> {
    scores_with(cm, |tp, fp, fn_| tp as f64 / (tp + fp + fn_) as f64)
}

/// F1 per class: `2 TP / (2 TP + FP + FN)`; the mean is macro (unweighted).
pub fn f1(cm: &ConfusionMatrix) -> Result<ClassScores> {
    scores_with(cm, |tp, fp, fn_| {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    })
}

/// F1 averaged with per-class ground-truth support as weights.
pub fn weighted_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.is_empty() {
        return Err(Error::EmptyConfusionMatrix);
    }
    let mut sum = 0.0;
    let mut support_total = 0u64;
    for c in 0..TRAINABLE_CLASSES {
        let (tp, fp, fn_) = cm.class_counts(c);
        let support = tp + fn_;
        if support == 0 {
            continue;
        }
        sum += support as f64 * (2.0 * tp as f64 / (2 * tp + fp + fn_) as f64);
        support_total += support;
    }
    Ok(sum / support_total as f64)
}

/// One evaluation section: a prediction raster with whichever ground
/// truths exist for it.
pub struct SectionEval {
    pub name: String,
    pub pred: LabelRaster,
    pub gt_points: Option<Vec<PointAnnotation>>,
    pub gt_dense: Option<LabelRaster>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub iou: Option<f64>,
    pub f1: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SectionReport {
    pub mean_iou: Option<f64>,
    pub macro_f1: Option<f64>,
    pub n_pixels: u64,
    pub n_points: u64,
}

/// Pooled and per-section metrics. IoU comes from the dense matrix, F1
/// from the points matrix; scores are reported x100. The per-class
/// `tp/fp/fn` triple comes from the dense matrix when dense ground truth
/// exists, otherwise from the points matrix.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub per_class: BTreeMap<String, ClassReport>,
    pub mean_iou: Option<f64>,
    pub macro_f1: Option<f64>,
    pub weighted_f1: Option<f64>,
    pub n_pixels: u64,
    pub n_points: u64,
    pub sections: BTreeMap<String, SectionReport>,
}

/// Evaluates every section and pools the confusion matrices; pooling by
/// matrix addition makes the pooled scores independent of section order.
pub fn evaluate_run(sections: &[SectionEval]) -> Result<Report> {
    if sections.is_empty() {
        return Err(Error::EmptyDataset("no sections to evaluate".to_string()));
    }
    let mut pooled_dense = ConfusionMatrix::new();
    let mut pooled_points = ConfusionMatrix::new();
    let mut section_reports = BTreeMap::new();
    for section in sections {
        let mut dense_cm = ConfusionMatrix::new();
        let mut points_cm = ConfusionMatrix::new();
        if let Some(gt) = &section.gt_dense {
            dense_cm.accumulate(&section.pred, gt)?;
        }
        if let Some(points) = &section.gt_points {
            points_cm.accumulate_points(&section.pred, points)?;
        }
        let report = SectionReport {
            mean_iou: iou(&dense_cm).ok().map(|s| 100.0 * s.mean),
            macro_f1: f1(&points_cm).ok().map(|s| 100.0 * s.mean),
            n_pixels: dense_cm.total(),
            n_points: points_cm.total(),
        };
        pooled_dense.merge(&dense_cm);
        pooled_points.merge(&points_cm);
        section_reports.insert(section.name.clone(), report);
    }

    let dense_scores = iou(&pooled_dense).ok();
    let point_scores = f1(&pooled_points).ok();
    let mut per_class = BTreeMap::new();
    for c in 0..TRAINABLE_CLASSES {
        let class = FuelClass::from_id(c as u8).unwrap();
        let iou_c = dense_scores.as_ref().and_then(|s| s.per_class[c]);
        let f1_c = point_scores.as_ref().and_then(|s| s.per_class[c]);
        if iou_c.is_none() && f1_c.is_none() {
            continue;
        }
        let (tp, fp, fn_) = if pooled_dense.is_empty() {
            pooled_points.class_counts(c)
        } else {
            pooled_dense.class_counts(c)
        };
        per_class.insert(
            class.name().to_string(),
            ClassReport {
                iou: iou_c.map(|v| 100.0 * v),
                f1: f1_c.map(|v| 100.0 * v),
                tp,
                fp,
                fn_,
            },
        );
    }

    Ok(Report {
        per_class,
        mean_iou: dense_scores.map(|s| 100.0 * s.mean),
        macro_f1: point_scores.map(|s| 100.0 * s.mean),
        weighted_f1: weighted_f1(&pooled_points).ok().map(|v| 100.0 * v),
        n_pixels: pooled_dense.total(),
        n_points: pooled_points.total(),
        sections: section_reports,
    })
}

impl Report {
    /// Flat per-class CSV with a trailing summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,iou,f1,tp,fp,fn\n");
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.4}"));
        for (name, c) in &self.per_class {
            out.push_str(&format!(
                "{name},{},{},{},{},{}\n",
                fmt(c.iou),
                fmt(c.f1),
                c.tp,
                c.fp,
                c.fn_
            ));
        }
        out.push_str(&format!(
            "__summary__,{},{},{},{},\n",
            fmt(self.mean_iou),
            fmt(self.macro_f1),
            self.n_pixels,
            self.n_points
        ));
        out
    }
}

//! Composition of the scribble ground-truth pipeline.

use super::filter::{spectral_filter, SpectralFilterConfig};
use super::mapping::{remap, ClassMapping};
use super::morpho::{buffer, skeletonize};
use crate::error::{Error, Result};
use crate::raster::{FuelClass, LabelRaster, MultiSpectralImage, SourceIdRaster, UNLABELED};

fn check_shapes(a: (usize, usize), b: (usize, usize), what: &str) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

/// Replaces the `classes` portion of `base` with `patch`: wherever the
/// patch carries one of the selected classes it overwrites the base, and
/// base pixels of a selected class with no patch support are cleared.
/// Everything else is kept. This is replacement, not union.
pub fn overlay(
    base: &LabelRaster,
    patch: &LabelRaster,
    classes: &[FuelClass],
) -> Result<LabelRaster> {
    check_shapes(
        (base.height(), base.width()),
        (patch.height(), patch.width()),
        "overlay",
    )?;
    let mut selected = [false; 256];
    for class in classes {
        selected[class.id() as usize] = true;
    }
    let out = base
        .values()
        .iter()
        .zip(patch.values())
        .map(|(&b, &p)| {
            if p != UNLABELED && selected[p as usize] {
                p
            } else if b != UNLABELED && selected[b as usize] {
                UNLABELED
            } else {
                b
            }
        })
        .collect();
    LabelRaster::new(out, base.height(), base.width())
}

/// Reassigns wooded pixels according to a dominant-leaf-type raster whose
/// values are `Broadleaves`, `Coniferous` or [`UNLABELED`]. Wooded pixels
/// without leaf-type support keep their class; other classes are untouched.
pub fn split_forest(labels: &LabelRaster, leaf_type: &LabelRaster) -> Result<LabelRaster> {
    check_shapes(
        (labels.height(), labels.width()),
        (leaf_type.height(), leaf_type.width()),
        "split_forest",
    )?;
    let broad = FuelClass::Broadleaves.id();
    let conif = FuelClass::Coniferous.id();
    if let Some(pos) = leaf_type
        .values()
        .iter()
        .position(|&v| v != UNLABELED && v != broad && v != conif)
    {
        return Err(Error::InvalidRaster(format!(
            "leaf-type raster holds class {} at pixel ({}, {}); expected forest classes or UNLABELED",
            leaf_type.values()[pos],
            pos / leaf_type.width(),
            pos % leaf_type.width()
        )));
    }
    let out = labels
        .values()
        .iter()
        .zip(leaf_type.values())
        .map(|(&label, &leaf)| {
            if (label == broad || label == conif) && leaf != UNLABELED {
                leaf
            } else {
                label
            }
        })
        .collect();
    LabelRaster::new(out, labels.height(), labels.width())
}

/// Knobs for [`build_scribbles`].
#[derive(Clone, Debug)]
pub struct ScribbleConfig {
    pub filter: SpectralFilterConfig,
    pub buffer_radius: usize,
    /// Classes replaced by the urban patch raster when one is provided.
    pub urban_classes: Vec<FuelClass>,
}

impl Default for ScribbleConfig {
    fn default() -> Self {
        Self {
            filter: SpectralFilterConfig::recommended(),
            buffer_radius: 5,
            urban_classes: vec![FuelClass::Artificial],
        }
    }
}

/// Full scribble pipeline: remap the source ids, drop spectrally
/// implausible labels, thin each class to a skeleton, thicken by the
/// buffer radius, then optionally paste the urban patch and split wooded
/// pixels by dominant leaf type.
pub fn build_scribbles(
    clc: &SourceIdRaster,
    image: &MultiSpectralImage,
    ua: Option<&LabelRaster>,
    hrl: Option<&LabelRaster>,
    mapping: &ClassMapping,
    cfg: &ScribbleConfig,
) -> Result<LabelRaster> {
    check_shapes(
        (clc.height(), clc.width()),
        (image.height(), image.width()),
        "build_scribbles",
    )?;
    let remapped = remap(clc, mapping)?;
    let filtered = spectral_filter(&remapped, image, &cfg.filter)?;
    let thinned = skeletonize(&filtered);
    let mut scribbles = buffer(&thinned, cfg.buffer_radius);
    if let Some(ua) = ua {
        scribbles = overlay(&scribbles, ua, &cfg.urban_classes)?;
    }
    if let Some(hrl) = hrl {
        scribbles = split_forest(&scribbles, hrl)?;
    }
    Ok(scribbles)
}

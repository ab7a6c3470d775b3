//! Spectral-index filtering of remapped labels.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ndvi, ndwi, FuelClass, LabelRaster, MultiSpectralImage, UNLABELED};

/// Index bounds a labeled pixel must satisfy to keep its class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralPredicate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ndvi_min: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ndvi_max: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ndwi_min: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ndwi_max: Option<f32>,
}

impl SpectralPredicate {
    fn validate(&self) -> Result<()> {
        let bounds = [self.ndvi_min, self.ndvi_max, self.ndwi_min, self.ndwi_max];
        for b in bounds.into_iter().flatten() {
            if !(-1.0..=1.0).contains(&b) {
                return Err(Error::InvalidConfig(format!(
                    "spectral bound {b} outside [-1, 1]"
                )));
            }
        }
        for (lo, hi) in [
            (self.ndvi_min, self.ndvi_max),
            (self.ndwi_min, self.ndwi_max),
        ] {
            if let (Some(lo), Some(hi)) = (lo, hi) {
                if lo > hi {
                    return Err(Error::InvalidConfig(format!(
                        "spectral bounds inverted: {lo} > {hi}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn uses_ndvi(&self) -> bool {
        self.ndvi_min.is_some() || self.ndvi_max.is_some()
    }

    fn uses_ndwi(&self) -> bool {
        self.ndwi_min.is_some() || self.ndwi_max.is_some()
    }

    fn holds(&self, ndvi: f32, ndwi: f32) -> bool {
        self.ndvi_min.map_or(true, |v| ndvi >= v)
            && self.ndvi_max.map_or(true, |v| ndvi <= v)
            && self.ndwi_min.map_or(true, |v| ndwi >= v)
            && self.ndwi_max.map_or(true, |v| ndwi <= v)
    }
}

/// Per-class spectral predicates. Classes without an entry pass unfiltered.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpectralFilterConfig {
    per_class: BTreeMap<FuelClass, SpectralPredicate>,
}

impl SpectralFilterConfig {
    /// No predicates: filtering is the identity.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Shipped defaults. The exact thresholds of the reference product
    /// pipeline are not published, so these are tunable starting points:
    /// vegetation classes require NDVI >= 0.3, water requires NDWI >= 0,
    /// bare and artificial surfaces require NDVI <= 0.3.
    pub fn recommended() -> Self {
        let mut cfg = Self::empty();
        let veg = SpectralPredicate {
            ndvi_min: Some(0.3),
            ..Default::default()
        };
        for class in [
            FuelClass::Grassland,
            FuelClass::Agricultural,
            FuelClass::Broadleaves,
            FuelClass::Coniferous,
            FuelClass::Shrubs,
        ] {
            cfg.set(class, veg).unwrap();
        }
        cfg.set(
            FuelClass::Water,
            SpectralPredicate {
                ndwi_min: Some(0.0),
                ..Default::default()
            },
        )
        .unwrap();
        let non_veg = SpectralPredicate {
            ndvi_max: Some(0.3),
            ..Default::default()
        };
        cfg.set(FuelClass::Bare, non_veg).unwrap();
        cfg.set(FuelClass::Artificial, non_veg).unwrap();
        cfg
    }

    pub fn set(&mut self, class: FuelClass, predicate: SpectralPredicate) -> Result<()> {
        predicate.validate()?;
        self.per_class.insert(class, predicate);
        Ok(())
    }

    pub fn predicate(&self, class: FuelClass) -> Option<&SpectralPredicate> {
        self.per_class.get(&class)
    }

    pub fn is_empty(&self) -> bool {
        self.per_class.is_empty()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, SpectralPredicate> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("spectral filter config: {e}")))?;
        let mut cfg = Self::empty();
        for (name, pred) in raw {
            let class = FuelClass::ALL
                .iter()
                .copied()
                .find(|c| c.name() == name)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown fuel class {name:?}")))?;
            cfg.set(class, pred)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        let raw: BTreeMap<&str, &SpectralPredicate> = self
            .per_class
            .iter()
            .map(|(c, p)| (c.name(), p))
            .collect();
        serde_json::to_string_pretty(&raw).expect("config serializes")
    }
}

/// Drops labels whose spectral indices violate their class predicate.
/// Surviving pixels keep their class; nothing is ever added.
pub fn spectral_filter(
    labels: &LabelRaster,
    image: &MultiSpectralImage,
    cfg: &SpectralFilterConfig,
) -> Result<LabelRaster> {
    if labels.height() != image.height() || labels.width() != image.width() {
        return Err(Error::ShapeMismatch(format!(
            "labels {}x{} vs image {}x{}",
            labels.height(),
            labels.width(),
            image.height(),
            image.width()
        )));
    }
    if cfg.is_empty() {
        return Ok(labels.clone());
    }
    let needs_ndvi = FuelClass::ALL
        .iter()
        .any(|&c| cfg.predicate(c).is_some_and(|p| p.uses_ndvi()));
    let needs_ndwi = FuelClass::ALL
        .iter()
        .any(|&c| cfg.predicate(c).is_some_and(|p| p.uses_ndwi()));
    let ndvi_map = if needs_ndvi { ndvi(image)? } else { Vec::new() };
    let ndwi_map = if needs_ndwi { ndwi(image)? } else { Vec::new() };

    let mut out = labels.values().to_vec();
    for (i, value) in out.iter_mut().enumerate() {
        if *value == UNLABELED {
            continue;
        }
        let class = FuelClass::from_id(*value).expect("label raster invariant");
        if let Some(pred) = cfg.predicate(class) {
            let v = if needs_ndvi { ndvi_map[i] } else { 0.0 };
            let w = if needs_ndwi { ndwi_map[i] } else { 0.0 };
            if !pred.holds(v, w) {
                *value = UNLABELED;
            }
        }
    }
    LabelRaster::new(out, labels.height(), labels.width())
}

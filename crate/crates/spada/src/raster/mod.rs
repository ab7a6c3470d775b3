//! Typed raster containers, the on-disk raster format, band arithmetic and
//! tiling.
//!
//! All rasters are immutable after construction and may be shared across
//! threads for reading. Pixel data is stored band-sequentially, row-major
//! within a band.

mod index;
mod io;
mod tile;

pub use index::{ndvi, ndwi, normalized_difference};
pub use io::{
    read_probability_map, read_raster, read_source_ids, write_probability_map, write_raster,
    write_source_ids, RasterHeader, SourceIdRaster, TypedRaster, SOURCE_NODATA,
};
pub use tile::tile_offsets;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel for pixels that carry no annotation at all. Distinct from
/// [`FuelClass::Ignored`], which is a real class excluded from every loss
/// and metric.
pub const UNLABELED: u8 = 255;

/// Number of fuel classes including `Ignored`.
pub const NUM_CLASSES: usize = 10;

/// Number of classes the model predicts (`Ignored` is never predicted).
pub const TRAINABLE_CLASSES: usize = 9;

/// The fixed fuel-map taxonomy. Ids are stable across all modules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FuelClass {
    Artificial = 0,
    Bare = 1,
    Wetlands = 2,
    Water = 3,
    Grassland = 4,
    Agricultural = 5,
    Broadleaves = 6,
    Coniferous = 7,
    Shrubs = 8,
    Ignored = 9,
}

impl FuelClass {
    pub const ALL: [FuelClass; NUM_CLASSES] = [
        FuelClass::Artificial,
        FuelClass::Bare,
        FuelClass::Wetlands,
        FuelClass::Water,
        FuelClass::Grassland,
        FuelClass::Agricultural,
        FuelClass::Broadleaves,
        FuelClass::Coniferous,
        FuelClass::Shrubs,
        FuelClass::Ignored,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<FuelClass> {
        FuelClass::ALL.get(id as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FuelClass::Artificial => "Artificial",
            FuelClass::Bare => "Bare",
            FuelClass::Wetlands => "Wetlands",
            FuelClass::Water => "Water",
            FuelClass::Grassland => "Grassland",
            FuelClass::Agricultural => "Agricultural",
            FuelClass::Broadleaves => "Broadleaves",
            FuelClass::Coniferous => "Coniferous",
            FuelClass::Shrubs => "Shrubs",
            FuelClass::Ignored => "Ignored",
        }
    }

    /// RGB used for map rendering.
    pub fn color(self) -> [u8; 3] {
        match self {
            FuelClass::Artificial => [214, 58, 61],
            FuelClass::Bare => [154, 154, 154],
            FuelClass::Wetlands => [150, 107, 196],
            FuelClass::Water => [43, 80, 198],
            FuelClass::Grassland => [249, 159, 39],
            FuelClass::Agricultural => [253, 211, 39],
            FuelClass::Broadleaves => [36, 152, 1],
            FuelClass::Coniferous => [8, 98, 0],
            FuelClass::Shrubs => [141, 140, 0],
            FuelClass::Ignored => [44, 44, 44],
        }
    }

    pub fn is_trainable(self) -> bool {
        self != FuelClass::Ignored
    }
}

/// A multi-spectral reflectance raster, band-sequential `B x H x W`.
///
/// Band names must include `Red`, `Green` and `NIR` so that spectral
/// indices are always computable, and every value must be finite.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiSpectralImage {
    data: Vec<f32>,
    band_names: Vec<String>,
    height: usize,
    width: usize,
}

pub const REQUIRED_BANDS: [&str; 3] = ["Red", "Green", "NIR"];

impl MultiSpectralImage {
    pub fn new(
        data: Vec<f32>,
        band_names: Vec<String>,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        let bands = band_names.len();
        if bands < 4 {
            return Err(Error::InvalidRaster(format!(
                "multi-spectral image needs at least 4 bands, got {bands}"
            )));
        }
        for required in REQUIRED_BANDS {
            if !band_names.iter().any(|n| n == required) {
                return Err(Error::MissingBand(required.to_string()));
            }
        }
        if data.len() != bands * height * width {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {bands}x{height}x{width}, got {}",
                bands * height * width,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let plane = height * width;
            return Err(Error::NonFinite {
                band: pos / plane,
                row: (pos % plane) / width,
                col: pos % width,
            });
        }
        Ok(Self {
            data,
            band_names,
            height,
            width,
        })
    }

    /// Default Sentinel-2-like 12-band layout.
    pub fn default_band_names() -> Vec<String> {
        [
            "CoastalAerosol",
            "Blue",
            "Green",
            "Red",
            "RedEdge1",
            "RedEdge2",
            "RedEdge3",
            "NIR",
            "NarrowNIR",
            "WaterVapour",
            "SWIR1",
            "SWIR2",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn band_count(&self) -> usize {
        self.band_names.len()
    }

    pub fn band_names(&self) -> &[String] {
        &self.band_names
    }

    pub fn band_index(&self, name: &str) -> Result<usize> {
        self.band_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingBand(name.to_string()))
    }

    pub fn band(&self, index: usize) -> &[f32] {
        let plane = self.height * self.width;
        &self.data[index * plane..(index + 1) * plane]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[(band * self.height + row) * self.width + col]
    }

    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if row0 + height > self.height || col0 + width > self.width {
            return Err(Error::ShapeMismatch(format!(
                "crop ({row0},{col0})+{height}x{width} exceeds raster {}x{}",
                self.height, self.width
            )));
        }
        let bands = self.band_count();
        let mut data = Vec::with_capacity(bands * height * width);
        for b in 0..bands {
            let plane = self.band(b);
            for r in row0..row0 + height {
                let start = r * self.width + col0;
                data.extend_from_slice(&plane[start..start + width]);
            }
        }
        Self::new(data, self.band_names.clone(), height, width)
    }

    /// Splits the image into `tile_size`-square tiles, row-major, the last
    /// row/column clamped to the border so every pixel is covered.
    pub fn tile(&self, tile_size: usize, stride: usize) -> Result<Vec<(usize, usize, Self)>> {
        let offsets = tile::grid_offsets(self.height, self.width, tile_size, stride)?;
        offsets
            .into_iter()
            .map(|(r, c)| Ok((r, c, self.crop(r, c, tile_size, tile_size)?)))
            .collect()
    }
}

/// Per-pixel class ids with an explicit [`UNLABELED`] sentinel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelRaster {
    classes: Vec<u8>,
    height: usize,
    width: usize,
}

impl LabelRaster {
    pub fn new(classes: Vec<u8>, height: usize, width: usize) -> Result<Self> {
        if classes.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {height}x{width}, got {}",
                height * width,
                classes.len()
            )));
        }
        if let Some(pos) = classes
            .iter()
            .position(|&c| c != UNLABELED && c as usize >= NUM_CLASSES)
        {
            return Err(Error::InvalidRaster(format!(
                "value {} at pixel ({}, {}) is neither a class id nor UNLABELED",
                classes[pos],
                pos / width,
                pos % width
            )));
        }
        Ok(Self {
            classes,
            height,
            width,
        })
    }

    pub fn filled(value: u8, height: usize, width: usize) -> Result<Self> {
        Self::new(vec![value; height * width], height, width)
    }

    pub fn unlabeled(height: usize, width: usize) -> Self {
        Self {
            classes: vec![UNLABELED; height * width],
            height,
            width,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u8] {
        &self.classes
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.classes[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        debug_assert!(value == UNLABELED || (value as usize) < NUM_CLASSES);
        self.classes[row * self.width + col] = value;
    }

    /// Number of pixels carrying any annotation (including `Ignored`).
    pub fn labeled_count(&self) -> usize {
        self.classes.iter().filter(|&&c| c != UNLABELED).count()
    }

    /// Number of pixels carrying a trainable (non-`Ignored`) annotation.
    pub fn trainable_count(&self) -> usize {
        self.classes
            .iter()
            .filter(|&&c| c != UNLABELED && c != FuelClass::Ignored.id())
            .count()
    }

    pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
        if row0 + height > self.height || col0 + width > self.width {
            return Err(Error::ShapeMismatch(format!(
                "crop ({row0},{col0})+{height}x{width} exceeds raster {}x{}",
                self.height, self.width
            )));
        }
        let mut classes = Vec::with_capacity(height * width);
        for r in row0..row0 + height {
            let start = r * self.width + col0;
            classes.extend_from_slice(&self.classes[start..start + width]);
        }
        Ok(Self {
            classes,
            height,
            width,
        })
    }

    pub fn tile(&self, tile_size: usize, stride: usize) -> Result<Vec<(usize, usize, Self)>> {
        let offsets = tile::grid_offsets(self.height, self.width, tile_size, stride)?;
        offsets
            .into_iter()
            .map(|(r, c)| Ok((r, c, self.crop(r, c, tile_size, tile_size)?)))
            .collect()
    }
}

/// Per-pixel class distribution over the trainable classes, `C x H x W`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    probs: Vec<f32>,
    height: usize,
    width: usize,
}

impl ProbabilityMap {
    pub const TOLERANCE: f32 = 1e-6;

    pub fn new(probs: Vec<f32>, height: usize, width: usize) -> Result<Self> {
        if probs.len() != TRAINABLE_CLASSES * height * width {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {TRAINABLE_CLASSES}x{height}x{width}, got {}",
                TRAINABLE_CLASSES * height * width,
                probs.len()
            )));
        }
        let plane = height * width;
        for i in 0..plane {
            let mut sum = 0.0f32;
            for c in 0..TRAINABLE_CLASSES {
                let p = probs[c * plane + i];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidRaster(format!(
                        "probability {p} out of [0,1] at class {c}, pixel ({}, {})",
                        i / width,
                        i % width
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > Self::TOLERANCE {
                return Err(Error::InvalidRaster(format!(
                    "probabilities sum to {sum} at pixel ({}, {})",
                    i / width,
                    i % width
                )));
            }
        }
        Ok(Self {
            probs,
            height,
            width,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.probs
    }

    pub fn get(&self, class: usize, row: usize, col: usize) -> f32 {
        self.probs[(class * self.height + row) * self.width + col]
    }

    /// Argmax class per pixel; ties resolved toward the lower class id.
    pub fn argmax_labels(&self) -> LabelRaster {
        let plane = self.height * self.width;
        let mut classes = vec![0u8; plane];
        for i in 0..plane {
            let mut best = self.probs[i];
            let mut best_c = 0u8;
            for c in 1..TRAINABLE_CLASSES {
                let p = self.probs[c * plane + i];
                if p > best {
                    best = p;
                    best_c = c as u8;
                }
            }
            classes[i] = best_c;
        }
        LabelRaster {
            classes,
            height: self.height,
            width: self.width,
        }
    }

    /// Maximum probability per pixel.
    pub fn confidence(&self) -> Vec<f32> {
        let plane = self.height * self.width;
        let mut out = vec![0.0f32; plane];
        for i in 0..plane {
            let mut best = self.probs[i];
            for c in 1..TRAINABLE_CLASSES {
                best = best.max(self.probs[c * plane + i]);
            }
            out[i] = best;
        }
        out
    }
}

/// Per-pixel loss weights in `[0, 1]`. Weights are zero exactly where the
/// paired label raster is [`UNLABELED`] or `Ignored`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMap {
    weights: Vec<f32>,
    height: usize,
    width: usize,
}

impl WeightMap {
    pub fn new(weights: Vec<f32>, height: usize, width: usize) -> Result<Self> {
        if weights.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "expected {} weights for {height}x{width}, got {}",
                height * width,
                weights.len()
            )));
        }
        if let Some(pos) = weights.iter().position(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidRaster(format!(
                "weight {} out of [0,1] at pixel ({}, {})",
                weights[pos],
                pos / width,
                pos % width
            )));
        }
        Ok(Self {
            weights,
            height,
            width,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            weights: vec![0.0; height * width],
            height,
            width,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.weights
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.weights[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        debug_assert!((0.0..=1.0).contains(&value));
        self.weights[row * self.width + col] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fuel_class_ids_are_stable() {
        for (i, class) in FuelClass::ALL.iter().enumerate() {
            assert_eq!(class.id() as usize, i);
            assert_eq!(FuelClass::from_id(i as u8), Some(*class));
        }
        assert_eq!(FuelClass::from_id(10), None);
        assert_eq!(FuelClass::Water.color(), [43, 80, 198]);
        assert!(!FuelClass::Ignored.is_trainable());
    }

    #[test]
    fn image_requires_index_bands() {
        let err = MultiSpectralImage::new(
            vec![0.0; 4 * 4],
            vec!["A".into(), "B".into(), "C".into(), "D".into()],
            2,
            2,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingBand(_)));
    }

    #[test]
    fn image_rejects_non_finite() {
        let mut data = vec![0.0f32; 12 * 4];
        data[13] = f32::NAN;
        let err =
            MultiSpectralImage::new(data, MultiSpectralImage::default_band_names(), 2, 2).unwrap_err();
        assert!(matches!(err, Error::NonFinite { band: 3, row: 0, col: 1 }));
    }

    #[test]
    fn label_raster_rejects_stray_values() {
        let err = LabelRaster::new(vec![0, 10, 255, 3], 2, 2).unwrap_err();
        assert!(matches!(err, Error::InvalidRaster(_)));
    }

    #[test]
    fn probability_map_must_normalize() {
        let plane = 4;
        let mut probs = vec![0.0f32; TRAINABLE_CLASSES * plane];
        for i in 0..plane {
            probs[i] = 0.5;
            probs[plane + i] = 0.5;
        }
        let pm = ProbabilityMap::new(probs.clone(), 2, 2).unwrap();
        assert_eq!(pm.argmax_labels().values(), &[0, 0, 0, 0]);

        probs[2 * plane] = 0.25;
        assert!(ProbabilityMap::new(probs, 2, 2).is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        let plane = 1;
        let mut probs = vec![0.0f32; TRAINABLE_CLASSES * plane];
        probs[3 * plane] = 0.5;
        probs[5 * plane] = 0.5;
        let pm = ProbabilityMap::new(probs, 1, 1).unwrap();
        assert_eq!(pm.argmax_labels().get(0, 0), 3);
    }
}

//! Normalized-difference band indices.

use super::MultiSpectralImage;
use crate::error::Result;

const DENOM_EPS: f32 = 1e-12;

/// `(a - b) / (a + b)` per pixel, with the degenerate denominator mapped
/// to zero. Output is row-major `H x W`.
pub fn normalized_difference(
    image: &MultiSpectralImage,
    band_a: &str,
    band_b: &str,
) -> Result<Vec<f32>> {
    let a = image.band(image.band_index(band_a)?);
    let b = image.band(image.band_index(band_b)?);
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let denom = x + y;
            if denom.abs() < DENOM_EPS {
                0.0
            } else {
                (x - y) / denom
            }
        })
        .collect())
}

/// Normalized Difference Vegetation Index, `(NIR - Red) / (NIR + Red)`.
pub fn ndvi(image: &MultiSpectralImage) -> Result<Vec<f32>> {
    normalized_difference(image, "NIR", "Red")
}

/// Normalized Difference Water Index, `(Green - NIR) / (Green + NIR)`.
pub fn ndwi(image: &MultiSpectralImage) -> Result<Vec<f32>> {
    normalized_difference(image, "Green", "NIR")
}

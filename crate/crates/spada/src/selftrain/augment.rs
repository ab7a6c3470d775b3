//! Geometric augmentation, Gaussian blur and test-time augmentation.
//!
//! Geometry is restricted to flips, quarter rotations and integer
//! translations, so applying the same transform to an image and its label
//! rasters is exact; blur only ever touches the image.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::net::SegModel;
use crate::raster::{
    LabelRaster, MultiSpectralImage, ProbabilityMap, TRAINABLE_CLASSES, UNLABELED,
};

/// An exact pixel-permutation transform: flips, then quarter turns, then
/// an integer translation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeoTransform {
    pub hflip: bool,
    pub vflip: bool,
    pub quarter_turns: u8,
    pub shift_rows: i32,
    pub shift_cols: i32,
}

impl GeoTransform {
    pub fn identity() -> Self {
        Self {
            hflip: false,
            vflip: false,
            quarter_turns: 0,
            shift_rows: 0,
            shift_cols: 0,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    /// Output dimensions and, per output pixel, the source index in the
    /// input (or -1 where the transform exposes no source pixel).
    fn index_map(&self, h: usize, w: usize) -> (usize, usize, Vec<i64>) {
        let mut map: Vec<i64> = (0..(h * w) as i64).collect();
        let (mut ch, mut cw) = (h, w);
        if self.hflip {
            let mut out = vec![0i64; map.len()];
            for r in 0..ch {
                for c in 0..cw {
                    out[r * cw + c] = map[r * cw + (cw - 1 - c)];
                }
            }
            map = out;
        }
        if self.vflip {
            let mut out = vec![0i64; map.len()];
            for r in 0..ch {
                for c in 0..cw {
                    out[r * cw + c] = map[(ch - 1 - r) * cw + c];
                }
            }
            map = out;
        }
        for _ in 0..self.quarter_turns % 4 {
            // One turn sends input (r, c) of an H x W frame to (c, H-1-r)
            // of the W x H frame.
            let mut out = vec![0i64; map.len()];
            for r in 0..cw {
                for c in 0..ch {
                    out[r * ch + c] = map[(ch - 1 - c) * cw + r];
                }
            }
            map = out;
            std::mem::swap(&mut ch, &mut cw);
        }
        if self.shift_rows != 0 || self.shift_cols != 0 {
            let mut out = vec![-1i64; map.len()];
            for r in 0..ch {
                let sr = r as i64 - self.shift_rows as i64;
                if sr < 0 || sr >= ch as i64 {
                    continue;
                }
                for c in 0..cw {
                    let sc = c as i64 - self.shift_cols as i64;
                    if sc < 0 || sc >= cw as i64 {
                        continue;
                    }
                    out[r * cw + c] = map[sr as usize * cw + sc as usize];
                }
            }
            map = out;
        }
        (ch, cw, map)
    }

    pub fn apply_labels(&self, labels: &LabelRaster) -> LabelRaster {
        let (h, w, map) = self.index_map(labels.height(), labels.width());
        let src = labels.values();
        let out = map
            .iter()
            .map(|&i| if i < 0 { UNLABELED } else { src[i as usize] })
            .collect();
        LabelRaster::new(out, h, w).expect("permutation of a valid raster")
    }

    pub fn apply_image(&self, image: &MultiSpectralImage) -> MultiSpectralImage {
        let (h, w, map) = self.index_map(image.height(), image.width());
        let bands = image.band_count();
        let mut out = Vec::with_capacity(bands * h * w);
        for b in 0..bands {
            let plane = image.band(b);
            out.extend(
                map.iter()
                    .map(|&i| if i < 0 { 0.0 } else { plane[i as usize] }),
            );
        }
        MultiSpectralImage::new(out, image.band_names().to_vec(), h, w)
            .expect("permutation of a valid image")
    }
}

/// One draw of the augmentation policy.
#[derive(Clone, Copy, Debug)]
pub struct AugmentParams {
    pub transform: GeoTransform,
    pub blur_sigma: Option<f64>,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            transform: GeoTransform::identity(),
            blur_sigma: None,
        }
    }
}

pub const MAX_SHIFT: i32 = 10;

/// Draws flips, a quarter rotation, a translation of at most
/// [`MAX_SHIFT`] pixels, and an optional Gaussian blur.
pub fn sample_augment(rng: &mut ChaCha8Rng) -> AugmentParams {
    let transform = GeoTransform {
        hflip: rng.gen_bool(0.5),
        vflip: rng.gen_bool(0.5),
        quarter_turns: rng.gen_range(0..4u8),
        shift_rows: rng.gen_range(-MAX_SHIFT..=MAX_SHIFT),
        shift_cols: rng.gen_range(-MAX_SHIFT..=MAX_SHIFT),
    };
    let blur_sigma = if rng.gen_bool(0.5) {
        Some(rng.gen_range(0.2..1.0))
    } else {
        None
    };
    AugmentParams {
        transform,
        blur_sigma,
    }
}

/// Separable Gaussian blur with clamp-to-edge padding; labels are never
/// blurred.
pub fn gaussian_blur(image: &MultiSpectralImage, sigma: f64) -> MultiSpectralImage {
    if sigma <= 0.0 {
        return image.clone();
    }
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for k in -radius..=radius {
        kernel.push((-(k as f64 * k as f64) / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    let kernel: Vec<f32> = kernel.iter().map(|v| (v / sum) as f32).collect();

    let (h, w) = (image.height(), image.width());
    let bands = image.band_count();
    let mut out = Vec::with_capacity(bands * h * w);
    let mut row_pass = vec![0.0f32; h * w];
    for b in 0..bands {
        let plane = image.band(b);
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0f32;
                for (ki, kv) in kernel.iter().enumerate() {
                    let cc = (c as isize + ki as isize - radius).clamp(0, w as isize - 1);
                    acc += kv * plane[r * w + cc as usize];
                }
                row_pass[r * w + c] = acc;
            }
        }
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0f32;
                for (ki, kv) in kernel.iter().enumerate() {
                    let rr = (r as isize + ki as isize - radius).clamp(0, h as isize - 1);
                    acc += kv * row_pass[rr as usize * w + c];
                }
                out.push(acc);
            }
        }
    }
    MultiSpectralImage::new(out, image.band_names().to_vec(), h, w)
        .expect("blur of a valid image")
}

/// Test-time augmentation: mean softmax over identity, horizontal flip,
/// vertical flip and 180 degrees, each view mapped back before averaging.
pub fn tta_infer(model: &SegModel, image: &MultiSpectralImage) -> Result<ProbabilityMap> {
    let (h, w) = (image.height(), image.width());
    let plane = h * w;
    let mut acc = vec![0.0f64; TRAINABLE_CLASSES * plane];
    for (hflip, vflip) in [(false, false), (true, false), (false, true), (true, true)] {
        let view = GeoTransform {
            hflip,
            vflip,
            ..GeoTransform::identity()
        };
        let probs = model.infer(&view.apply_image(image))?;
        // Flips are involutions, so the inverse view is the view itself.
        let (_, _, map) = view.index_map(h, w);
        for c in 0..TRAINABLE_CLASSES {
            let src = &probs.values()[c * plane..(c + 1) * plane];
            let dst = &mut acc[c * plane..(c + 1) * plane];
            for (o, &i) in map.iter().enumerate() {
                dst[i as usize] += src[o] as f64;
            }
        }
    }
    // Average and renormalize per pixel.
    let mut out = vec![0.0f32; TRAINABLE_CLASSES * plane];
    for i in 0..plane {
        let mut sum = 0.0f64;
        for c in 0..TRAINABLE_CLASSES {
            sum += acc[c * plane + i];
        }
        for c in 0..TRAINABLE_CLASSES {
            out[c * plane + i] = (acc[c * plane + i] / sum) as f32;
        }
    }
    ProbabilityMap::new(out, h, w)
}

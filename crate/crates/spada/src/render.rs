//! PNG rendering of label maps: class colors at 50% alpha over a
//! grayscale composite of the image.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::raster::{FuelClass, LabelRaster, MultiSpectralImage, UNLABELED};

/// Blends each labeled pixel's class color over the grayscale backdrop;
/// unlabeled pixels show the backdrop alone. Without an image the
/// backdrop is mid-gray.
pub fn render_map(labels: &LabelRaster, image: Option<&MultiSpectralImage>) -> RgbImage {
    let (h, w) = (labels.height(), labels.width());
    let gray = match image {
        Some(img) => {
            let bands = img.band_count();
            let mut g = vec![0.0f32; h * w];
            for b in 0..bands {
                for (acc, v) in g.iter_mut().zip(img.band(b)) {
                    *acc += v;
                }
            }
            g.iter()
                .map(|v| ((v / bands as f32).clamp(0.0, 1.0) * 255.0) as u8)
                .collect()
        }
        None => vec![128u8; h * w],
    };
    let mut out = RgbImage::new(w as u32, h as u32);
    for r in 0..h {
        for c in 0..w {
            let g = gray[r * w + c] as u16;
            let value = labels.get(r, c);
            let px = if value == UNLABELED {
                [g as u8; 3]
            } else {
                let color = FuelClass::from_id(value).expect("raster invariant").color();
                [
                    ((g + color[0] as u16) / 2) as u8,
                    ((g + color[1] as u16) / 2) as u8,
                    ((g + color[2] as u16) / 2) as u8,
                ]
            };
            out.put_pixel(c as u32, r as u32, Rgb(px));
        }
    }
    out
}

pub fn save_png(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    image.save(path).map_err(|e| Error::Png {
        path: path.to_path_buf(),
        source: e,
    })
}

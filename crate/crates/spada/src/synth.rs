//! Synthetic benchmark scenes: Voronoi-partitioned land cover with
//! per-class spectral signatures, degraded into scribbles and survey-style
//! points with known dense ground truth.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::annot::{buffer, skeletonize};
use crate::error::{Error, Result};
use crate::raster::{LabelRaster, MultiSpectralImage, TRAINABLE_CLASSES, UNLABELED};

/// Generator parameters. Scene layout, reflectance noise and the
/// scribble/point degradation are all seeded and deterministic.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    /// Number of Voronoi regions; the first nine carry one class each so
    /// every trainable class appears.
    pub n_regions: usize,
    /// Per-band Gaussian reflectance noise.
    pub noise_sigma: f64,
    /// Per-class 12-band mean reflectances; `None` uses the built-in
    /// signature table.
    pub signatures: Option<Vec<Vec<f64>>>,
    /// Survey-style points drawn uniformly over the scene.
    pub n_points: usize,
    /// Degradation switch: thin each region to its skeleton before
    /// buffering. Disabled, the scribbles are the dense ground truth.
    pub skeletonize_scribbles: bool,
    pub buffer_radius: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            height: 512,
            width: 512,
            n_regions: 12,
            noise_sigma: 0.05,
            signatures: None,
            n_points: 40,
            skeletonize_scribbles: true,
            buffer_radius: 5,
        }
    }
}

/// Built-in per-class mean reflectances over the default 12-band layout,
/// loosely shaped like real spectra (water dark in NIR, vegetation bright
/// in NIR). Grassland/Agricultural and the two forest classes are close
/// on purpose so per-pixel classification stays ambiguous under noise.
pub fn default_signatures() -> Vec<Vec<f64>> {
    vec![
        // Artificial: flat and bright.
        vec![0.30, 0.32, 0.33, 0.35, 0.34, 0.33, 0.33, 0.32, 0.32, 0.30, 0.35, 0.33],
        // Bare: bright, red-leaning.
        vec![0.35, 0.38, 0.42, 0.46, 0.47, 0.48, 0.48, 0.47, 0.46, 0.44, 0.50, 0.48],
        // Wetlands: damp vegetation, low SWIR.
        vec![0.09, 0.11, 0.16, 0.10, 0.18, 0.24, 0.28, 0.30, 0.30, 0.27, 0.12, 0.06],
        // Water: dark, NIR close to zero.
        vec![0.10, 0.12, 0.15, 0.10, 0.08, 0.06, 0.05, 0.04, 0.04, 0.03, 0.02, 0.01],
        // Grassland.
        vec![0.08, 0.10, 0.18, 0.12, 0.25, 0.35, 0.42, 0.45, 0.46, 0.40, 0.30, 0.20],
        // Agricultural: deliberately near grassland.
        vec![0.10, 0.12, 0.20, 0.16, 0.28, 0.38, 0.44, 0.48, 0.48, 0.42, 0.34, 0.25],
        // Broadleaves.
        vec![0.05, 0.06, 0.12, 0.08, 0.20, 0.35, 0.45, 0.50, 0.50, 0.45, 0.25, 0.15],
        // Coniferous: deliberately near broadleaves.
        vec![0.04, 0.05, 0.10, 0.06, 0.16, 0.29, 0.38, 0.43, 0.43, 0.38, 0.20, 0.11],
        // Shrubs: between grassland and forest.
        vec![0.07, 0.09, 0.14, 0.11, 0.22, 0.30, 0.36, 0.40, 0.40, 0.36, 0.28, 0.18],
    ]
}

pub struct SynthScene {
    pub image: MultiSpectralImage,
    pub dense: LabelRaster,
    pub scribbles: LabelRaster,
    pub points: LabelRaster,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_regions == 0 {
            return Err(Error::InvalidConfig("n_regions must be at least 1".into()));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise_sigma {}",
                self.noise_sigma
            )));
        }
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidConfig("degenerate scene size".into()));
        }
        if let Some(sigs) = &self.signatures {
            if sigs.len() != TRAINABLE_CLASSES || sigs.iter().any(|s| s.len() != 12) {
                return Err(Error::InvalidConfig(
                    "signatures must be 9 classes x 12 bands".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: SynthConfig = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Generates one scene. Distinct `scene_index` values give independent
/// layouts under the same config seed.
pub fn generate_scene(cfg: &SynthConfig, scene_index: u64) -> Result<SynthScene> {
    cfg.validate()?;
    let (h, w) = (cfg.height, cfg.width);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(scene_index.wrapping_add(1));

    // Voronoi seeds: the first nine on a jittered grid, one per class, so
    // every class is present and no region degenerates to a sliver.
    let mut seeds: Vec<(f64, f64, u8)> = Vec::with_capacity(cfg.n_regions);
    let grid = 3usize;
    let mut class_order: Vec<u8> = (0..TRAINABLE_CLASSES as u8).collect();
    for i in (1..class_order.len()).rev() {
        let j = rng.gen_range(0..=i);
        class_order.swap(i, j);
    }
    for k in 0..cfg.n_regions.min(TRAINABLE_CLASSES) {
        let (gr, gc) = (k / grid, k % grid);
        let r = (gr as f64 + rng.gen_range(0.2..0.8)) * h as f64 / grid as f64;
        let c = (gc as f64 + rng.gen_range(0.2..0.8)) * w as f64 / grid as f64;
        seeds.push((r, c, class_order[k]));
    }
    for _ in seeds.len()..cfg.n_regions {
        seeds.push((
            rng.gen_range(0.0..h as f64),
            rng.gen_range(0.0..w as f64),
            rng.gen_range(0..TRAINABLE_CLASSES as u8),
        ));
    }

    // Dense ground truth: nearest seed, ties to the lower seed index.
    let mut dense = LabelRaster::unlabeled(h, w);
    for r in 0..h {
        for c in 0..w {
            let mut best = f64::INFINITY;
            let mut best_class = 0u8;
            for &(sr, sc, class) in &seeds {
                let d = (sr - r as f64).powi(2) + (sc - c as f64).powi(2);
                if d < best {
                    best = d;
                    best_class = class;
                }
            }
            dense.set(r, c, best_class);
        }
    }

    // Reflectance: class signature plus Gaussian noise, clamped to [0, 1].
    let signatures = cfg.signatures.clone().unwrap_or_else(default_signatures);
    let names = MultiSpectralImage::default_band_names();
    let bands = names.len();
    let normal = Normal::new(0.0, cfg.noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut data = vec![0.0f32; bands * h * w];
    for i in 0..h * w {
        let class = dense.values()[i] as usize;
        for b in 0..bands {
            let noise = if cfg.noise_sigma > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            data[b * h * w + i] = (signatures[class][b] + noise).clamp(0.0, 1.0) as f32;
        }
    }
    let image = MultiSpectralImage::new(data, names, h, w)?;

    // Scribbles: thin every region to its skeleton, then thicken.
    let scribbles = if cfg.skeletonize_scribbles {
        buffer(&skeletonize(&dense), cfg.buffer_radius)
    } else {
        dense.clone()
    };

    // Points: uniform random pixels labeled from the dense truth.
    let mut points = LabelRaster::unlabeled(h, w);
    for _ in 0..cfg.n_points {
        let r = rng.gen_range(0..h);
        let c = rng.gen_range(0..w);
        points.set(r, c, dense.get(r, c));
    }

    Ok(SynthScene {
        image,
        dense,
        scribbles,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SynthConfig {
        SynthConfig {
            seed: 11,
            height: 96,
            width: 96,
            n_regions: 12,
            noise_sigma: 0.05,
            n_points: 30,
            ..Default::default()
        }
    }

    #[test]
    fn noiseless_scene_is_recoverable_by_nearest_signature() {
        let cfg = SynthConfig {
            noise_sigma: 0.0,
            ..small_cfg()
        };
        let scene = generate_scene(&cfg, 0).unwrap();
        let sigs = default_signatures();
        let (h, w) = (cfg.height, cfg.width);
        for i in 0..h * w {
            let mut best = f64::INFINITY;
            let mut best_class = 0u8;
            for (c, sig) in sigs.iter().enumerate() {
                let d: f64 = (0..12)
                    .map(|b| {
                        let v = scene.image.data()[b * h * w + i] as f64;
                        (v - sig[b]).powi(2)
                    })
                    .sum();
                if d < best {
                    best = d;
                    best_class = c as u8;
                }
            }
            assert_eq!(best_class, scene.dense.values()[i]);
        }
    }

    #[test]
    fn all_classes_present_and_deterministic() {
        let cfg = small_cfg();
        let a = generate_scene(&cfg, 3).unwrap();
        let b = generate_scene(&cfg, 3).unwrap();
        assert_eq!(a.dense, b.dense);
        assert_eq!(a.scribbles, b.scribbles);
        assert_eq!(a.points, b.points);
        for (x, y) in a.image.data().iter().zip(b.image.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let mut seen = [false; TRAINABLE_CLASSES];
        for &v in a.dense.values() {
            seen[v as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));

        let c = generate_scene(&cfg, 4).unwrap();
        assert_ne!(a.dense, c.dense);
    }

    #[test]
    fn scribbles_are_sparse_at_default_size() {
        let cfg = SynthConfig::default();
        let scene = generate_scene(&cfg, 0).unwrap();
        let fraction = scene.scribbles.labeled_count() as f64 / (cfg.height * cfg.width) as f64;
        assert!(fraction < 0.15, "scribble fraction {fraction}");
        // Buffering a skeleton can bleed a few pixels across region
        // boundaries, but almost all scribble labels match the truth.
        let labeled = scene.scribbles.labeled_count();
        let agree = scene
            .scribbles
            .values()
            .iter()
            .zip(scene.dense.values())
            .filter(|(&s, &d)| s != UNLABELED && s == d)
            .count();
        assert!(
            agree as f64 / labeled as f64 > 0.95,
            "agreement {agree}/{labeled}"
        );
    }

    #[test]
    fn points_match_dense_truth() {
        let scene = generate_scene(&small_cfg(), 1).unwrap();
        assert!(scene.points.labeled_count() > 0);
        assert!(scene.points.labeled_count() <= 30);
        for (p, d) in scene.points.values().iter().zip(scene.dense.values()) {
            assert!(*p == UNLABELED || p == d);
        }
    }
}

//! Implementations behind the CLI subcommands. They work on plain
//! argument structs so tests can drive them without a subprocess.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annot::{
    build_scribbles, points_from_labels, rasterize_points, read_points_csv, ClassMapping,
    PointAnnotation, ScribbleConfig, SpectralFilterConfig,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_run, Report, SectionEval};
use crate::net::{load_checkpoint, save_checkpoint, SegModel};
use crate::raster::{
    read_raster, read_source_ids, tile_offsets, write_probability_map, write_raster, LabelRaster,
    MultiSpectralImage, ProbabilityMap, TypedRaster, TRAINABLE_CLASSES,
};
use crate::render::{render_map, save_png};
use crate::selftrain::{train, tta_infer, Dataset, TrainConfig, TrainSample, ValSample};
use crate::synth::{generate_scene, SynthConfig};

/// Dataset manifest written by `synth` and `prepare`, consumed by `train`.
#[derive(Serialize, Deserialize)]
pub struct DatasetManifest {
    pub scenes: Vec<SceneEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
}

#[derive(Serialize, Deserialize)]
pub struct SceneEntry {
    pub name: String,
    /// Raster stems relative to the manifest directory.
    pub image: String,
    pub scribbles: String,
    /// Raster stem or CSV path with the point annotations.
    pub points: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dense: Option<String>,
}

fn read_labels(path: &Path) -> Result<LabelRaster> {
    match read_raster(path)? {
        TypedRaster::Labels(l) => Ok(l),
        TypedRaster::Image(_) => Err(Error::InvalidRaster(format!(
            "{} is a multi-spectral image, expected labels",
            path.display()
        ))),
    }
}

fn read_image(path: &Path) -> Result<MultiSpectralImage> {
    match read_raster(path)? {
        TypedRaster::Image(i) => Ok(i),
        TypedRaster::Labels(_) => Err(Error::InvalidRaster(format!(
            "{} is a label raster, expected a multi-spectral image",
            path.display()
        ))),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().and_then(|e| e.to_str()) == Some("csv")
}

fn read_points_any(path: &Path) -> Result<Vec<PointAnnotation>> {
    if is_csv(path) {
        read_points_csv(path, ClassMapping::lucas_default())
    } else {
        Ok(points_from_labels(&read_labels(path)?))
    }
}

// ---------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------

pub struct SynthArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub scenes: usize,
    pub out: PathBuf,
}

/// Generates `scenes` synthetic scenes plus a dataset manifest.
pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => SynthConfig::from_file(path)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let mut entries = Vec::new();
    for k in 0..args.scenes.max(1) {
        let scene = generate_scene(&cfg, k as u64)?;
        let name = format!("scene_{k:02}");
        let dir = args.out.join(&name);
        write_raster(&TypedRaster::Image(scene.image.clone()), dir.join("image"))?;
        write_raster(&TypedRaster::Labels(scene.dense.clone()), dir.join("dense"))?;
        write_raster(
            &TypedRaster::Labels(scene.scribbles.clone()),
            dir.join("scribbles"),
        )?;
        write_raster(&TypedRaster::Labels(scene.points.clone()), dir.join("points"))?;
        save_png(
            &render_map(&scene.dense, Some(&scene.image)),
            dir.join("dense.png"),
        )?;
        save_png(
            &render_map(&scene.scribbles, Some(&scene.image)),
            dir.join("scribbles.png"),
        )?;
        entries.push(SceneEntry {
            name: name.clone(),
            image: format!("{name}/image"),
            scribbles: format!("{name}/scribbles"),
            points: format!("{name}/points"),
            dense: Some(format!("{name}/dense")),
        });
    }
    let manifest = DatasetManifest {
        scenes: entries,
        synth: Some(cfg),
    };
    let mpath = args.out.join("dataset.json");
    fs::write(&mpath, serde_json::to_string_pretty(&manifest).unwrap())
        .map_err(|e| Error::io(&mpath, e))?;
    Ok(())
}

// ---------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------

pub struct PrepareArgs {
    pub clc: PathBuf,
    pub image: PathBuf,
    pub ua: Option<PathBuf>,
    pub hrl: Option<PathBuf>,
    pub points: Option<PathBuf>,
    pub filter_config: Option<PathBuf>,
    pub mapping_config: Option<PathBuf>,
    pub buffer_radius: usize,
    pub out: PathBuf,
}

/// Runs the scribble pipeline on pre-rasterized sources and rasterizes
/// survey points.
pub fn cmd_prepare(args: &PrepareArgs) -> Result<()> {
    let clc = read_source_ids(&args.clc)?;
    let image = read_image(&args.image)?;
    let ua = args.ua.as_deref().map(read_labels).transpose()?;
    let hrl = args.hrl.as_deref().map(read_labels).transpose()?;

    let (clc_mapping, lucas_mapping) = match &args.mapping_config {
        Some(path) => {
            let (c, l) = ClassMapping::from_file(path)?;
            (Some(c), Some(l))
        }
        None => (None, None),
    };
    let filter = match &args.filter_config {
        Some(path) => SpectralFilterConfig::from_file(path)?,
        None => SpectralFilterConfig::recommended(),
    };
    let cfg = ScribbleConfig {
        filter,
        buffer_radius: args.buffer_radius,
        ..Default::default()
    };

    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let scribbles = build_scribbles(
        &clc,
        &image,
        ua.as_ref(),
        hrl.as_ref(),
        clc_mapping.as_ref().unwrap_or_else(|| ClassMapping::clc_default()),
        &cfg,
    )?;
    write_raster(&TypedRaster::Labels(scribbles.clone()), args.out.join("scribbles"))?;
    save_png(
        &render_map(&scribbles, Some(&image)),
        args.out.join("scribbles.png"),
    )?;

    if let Some(points_path) = &args.points {
        let points = if is_csv(points_path) {
            let mapping = lucas_mapping
                .as_ref()
                .unwrap_or_else(|| ClassMapping::lucas_default());
            read_points_csv(points_path, mapping)?
        } else {
            points_from_labels(&read_labels(points_path)?)
        };
        let raster = rasterize_points(&points, image.height(), image.width())?;
        write_raster(&TypedRaster::Labels(raster), args.out.join("points"))?;
        if is_csv(points_path) {
            fs::copy(points_path, args.out.join("points.csv"))
                .map_err(|e| Error::io(points_path, e))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// train
// ---------------------------------------------------------------------

pub struct TrainArgs {
    pub config: PathBuf,
    pub data: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

pub fn load_dataset(data_dir: &Path) -> Result<Dataset> {
    let mpath = data_dir.join("dataset.json");
    if !mpath.exists() {
        return Err(Error::MissingFile(mpath));
    }
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: mpath.clone(),
        source: e,
    })?;
    let mut train = Vec::new();
    let mut val = Vec::new();
    for entry in &manifest.scenes {
        let image = read_image(&data_dir.join(&entry.image))?;
        let scribbles = read_labels(&data_dir.join(&entry.scribbles))?;
        let points_path = data_dir.join(&entry.points);
        let points = if is_csv(&points_path) {
            rasterize_points(
                &read_points_csv(&points_path, ClassMapping::lucas_default())?,
                image.height(),
                image.width(),
            )?
        } else {
            read_labels(&points_path)?
        };
        if let Some(dense) = &entry.dense {
            val.push(ValSample {
                name: entry.name.clone(),
                image: image.clone(),
                labels: read_labels(&data_dir.join(dense))?,
            });
        }
        train.push(TrainSample {
            name: entry.name.clone(),
            image,
            scribbles,
            points,
        });
    }
    Ok(Dataset { train, val })
}

fn metrics_csv(log: &[crate::selftrain::IterationLog]) -> String {
    let mut out = String::from("iter,lr,loss_scribble,loss_point,pseudo_cover,val_miou\n");
    for l in log {
        let miou = l.val_miou.map_or(String::new(), |v| format!("{v:.4}"));
        let _ = writeln!(
            out,
            "{},{:.8e},{:.6},{:.6},{:.6},{}",
            l.iter, l.lr, l.loss_scribble, l.loss_point, l.pseudo_cover, miou
        );
    }
    out
}

/// Trains on a prepared dataset directory; writes student and teacher
/// checkpoints, the metrics log and the resolved class weights.
pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = TrainConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let dataset = load_dataset(&args.data)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let output = train(&dataset, &cfg)?;
    save_checkpoint(&output.student, cfg.total_iters, args.out.join("student"))?;
    save_checkpoint(&output.teacher, cfg.total_iters, args.out.join("teacher"))?;
    let csv_path = args.out.join("metrics.csv");
    fs::write(&csv_path, metrics_csv(&output.log)).map_err(|e| Error::io(&csv_path, e))?;
    let cw_path = args.out.join("class_weights.json");
    fs::write(
        &cw_path,
        serde_json::to_string_pretty(&output.class_weights).unwrap(),
    )
    .map_err(|e| Error::io(&cw_path, e))?;
    let cfg_path = args.out.join("train_config.json");
    fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap())
        .map_err(|e| Error::io(&cfg_path, e))?;

    if let Some(last) = output.log.last() {
        if let Some(miou) = last.val_miou {
            eprintln!("final val mIoU: {miou:.2}");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------

pub struct InferArgs {
    pub checkpoint: PathBuf,
    pub image: PathBuf,
    pub out: PathBuf,
    pub tta: bool,
    pub tile: usize,
    pub overlap: usize,
}

impl InferArgs {
    pub fn new(checkpoint: PathBuf, image: PathBuf, out: PathBuf) -> Self {
        Self {
            checkpoint,
            image,
            out,
            tta: false,
            tile: 512,
            overlap: 32,
        }
    }
}

/// Tiled inference with probability averaging in tile overlaps.
pub fn infer_probabilities(
    model: &SegModel,
    image: &MultiSpectralImage,
    tile: usize,
    overlap: usize,
    tta: bool,
) -> Result<ProbabilityMap> {
    let stride = model.arch.stride();
    let (h, w) = (image.height(), image.width());
    let limit = (h.min(w) / stride) * stride;
    if limit == 0 {
        return Err(Error::ShapeMismatch(format!(
            "image {h}x{w} smaller than the model stride {stride}"
        )));
    }
    let tile = ((tile / stride) * stride).clamp(stride, limit);
    if overlap >= tile {
        return Err(Error::InvalidConfig(format!(
            "overlap {overlap} must be smaller than the tile {tile}"
        )));
    }
    let step = tile - overlap;
    let rows = tile_offsets(h, tile, step)?;
    let cols = tile_offsets(w, tile, step)?;

    let plane = h * w;
    let mut acc = vec![0.0f64; TRAINABLE_CLASSES * plane];
    let mut hits = vec![0.0f64; plane];
    for &r0 in &rows {
        for &c0 in &cols {
            let crop = image.crop(r0, c0, tile, tile)?;
            let probs = if tta {
                tta_infer(model, &crop)?
            } else {
                model.infer(&crop)?
            };
            for c in 0..TRAINABLE_CLASSES {
                let src = &probs.values()[c * tile * tile..(c + 1) * tile * tile];
                for tr in 0..tile {
                    let dst_row = (r0 + tr) * w + c0;
                    let src_row = tr * tile;
                    for tc in 0..tile {
                        acc[c * plane + dst_row + tc] += src[src_row + tc] as f64;
                    }
                }
            }
            for tr in 0..tile {
                let dst_row = (r0 + tr) * w + c0;
                for tc in 0..tile {
                    hits[dst_row + tc] += 1.0;
                }
            }
        }
    }
    let mut probs = vec![0.0f32; TRAINABLE_CLASSES * plane];
    for i in 0..plane {
        let mut sum = 0.0f64;
        for c in 0..TRAINABLE_CLASSES {
            sum += acc[c * plane + i];
        }
        for c in 0..TRAINABLE_CLASSES {
            probs[c * plane + i] = (acc[c * plane + i] / sum) as f32;
        }
        debug_assert!(hits[i] > 0.0);
    }
    ProbabilityMap::new(probs, h, w)
}

/// Runs a checkpoint over an image; writes the argmax label raster, the
/// probability map and a rendered PNG.
pub fn cmd_infer(args: &InferArgs) -> Result<()> {
    let (model, _) = load_checkpoint(&args.checkpoint)?;
    let image = read_image(&args.image)?;
    let probs = infer_probabilities(&model, &image, args.tile, args.overlap, args.tta)?;
    let labels = probs.argmax_labels();
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_raster(&TypedRaster::Labels(labels.clone()), args.out.join("pred_labels"))?;
    write_probability_map(&probs, args.out.join("pred_probs"))?;
    save_png(&render_map(&labels, Some(&image)), args.out.join("pred.png"))?;
    Ok(())
}

// ---------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------

pub struct EvalArgs {
    pub pred: PathBuf,
    pub gt_points: Option<PathBuf>,
    pub gt_dense: Option<PathBuf>,
    pub out: PathBuf,
}

fn section_stems(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut stems = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            let stem = path.with_extension("");
            let name = stem
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("section")
                .to_string();
            stems.push((name, stem));
        }
    }
    stems.sort();
    if stems.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no raster headers under {}",
            dir.display()
        )));
    }
    Ok(stems)
}

fn companion(path: &Path, name: &str) -> Option<PathBuf> {
    if path.is_dir() {
        let raster = path.join(name);
        let mut json = raster.clone().into_os_string();
        json.push(".json");
        if PathBuf::from(&json).exists() {
            return Some(raster);
        }
        let csv = path.join(format!("{name}.csv"));
        if csv.exists() {
            return Some(csv);
        }
        None
    } else {
        Some(path.to_path_buf())
    }
}

/// Evaluates predictions against point and/or dense ground truth.
/// `pred` may be a single raster stem or a directory of per-section
/// rasters matched to ground-truth files by name.
pub fn cmd_eval(args: &EvalArgs) -> Result<Report> {
    if args.gt_points.is_none() && args.gt_dense.is_none() {
        return Err(Error::InvalidConfig(
            "at least one of the ground truths is required".to_string(),
        ));
    }
    let mut sections = Vec::new();
    let pred_sections: Vec<(String, PathBuf)> = if args.pred.is_dir() {
        section_stems(&args.pred)?
    } else {
        let name = args
            .pred
            .file_stem()
            .and_then(|n| n.to_str())
            .unwrap_or("section")
            .to_string();
        vec![(name, args.pred.clone())]
    };
    for (name, stem) in pred_sections {
        let pred = read_labels(&stem)?;
        let gt_points = match &args.gt_points {
            Some(path) => {
                let p = companion(path, &name)
                    .ok_or_else(|| Error::MissingFile(path.join(&name)))?;
                Some(read_points_any(&p)?)
            }
            None => None,
        };
        let gt_dense = match &args.gt_dense {
            Some(path) => {
                let p = companion(path, &name)
                    .ok_or_else(|| Error::MissingFile(path.join(&name)))?;
                Some(read_labels(&p)?)
            }
            None => None,
        };
        sections.push(SectionEval {
            name,
            pred,
            gt_points,
            gt_dense,
        });
    }
    let report = evaluate_run(&sections)?;
    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let jpath = args.out.join("report.json");
    fs::write(&jpath, serde_json::to_string_pretty(&report).unwrap())
        .map_err(|e| Error::io(&jpath, e))?;
    let cpath = args.out.join("report.csv");
    fs::write(&cpath, report.to_csv()).map_err(|e| Error::io(&cpath, e))?;
    Ok(report)
}

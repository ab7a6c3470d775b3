//! Checkpoints: a JSON manifest plus one binary blob of f64
//! little-endian tensor data, encoded like raster payloads.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{Architecture, SegModel};
use super::tensor::{NamedTensor, ParamSet, Tensor};
use crate::error::{Error, Result};

const FORMAT: &str = "spada-checkpoint-v1";

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the blob, in f64 elements.
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    architecture: Architecture,
    seed: u64,
    iteration: u64,
    dtype: String,
    tensors: Vec<TensorEntry>,
}

fn stem_of(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = stem_of(path);
    let mut h = stem.clone().into_os_string();
    h.push(".json");
    let mut b = stem.into_os_string();
    b.push(".bin");
    (PathBuf::from(h), PathBuf::from(b))
}

pub fn save_checkpoint(model: &SegModel, iteration: u64, path: impl AsRef<Path>) -> Result<()> {
    let (hpath, bpath) = paths(path.as_ref());
    let mut entries = Vec::new();
    let mut blob = Vec::with_capacity(model.params.total_len() * 8);
    let mut offset = 0usize;
    for t in &model.params.tensors {
        entries.push(TensorEntry {
            name: t.name.clone(),
            shape: t.tensor.shape.clone(),
            offset,
        });
        for v in &t.tensor.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        offset += t.tensor.len();
    }
    let manifest = Manifest {
        format: FORMAT.to_string(),
        architecture: model.arch.clone(),
        seed: model.seed,
        iteration,
        dtype: "f64".to_string(),
        tensors: entries,
    };
    if let Some(parent) = hpath.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(&hpath, serde_json::to_string_pretty(&manifest).unwrap())
        .map_err(|e| Error::io(&hpath, e))?;
    fs::write(&bpath, blob).map_err(|e| Error::io(&bpath, e))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(SegModel, u64)> {
    let (hpath, bpath) = paths(path.as_ref());
    let text = fs::read_to_string(&hpath).map_err(|e| Error::io(&hpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: hpath.clone(),
        source: e,
    })?;
    if manifest.format != FORMAT || manifest.dtype != "f64" {
        return Err(Error::MalformedCheckpoint {
            path: hpath,
            reason: format!(
                "unsupported format {:?} / dtype {:?}",
                manifest.format, manifest.dtype
            ),
        });
    }
    let blob = fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;
    if blob.len() % 8 != 0 {
        return Err(Error::MalformedCheckpoint {
            path: bpath,
            reason: "blob is not a whole number of f64 values".to_string(),
        });
    }
    let values: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();

    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for entry in &manifest.tensors {
        let len: usize = entry.shape.iter().product();
        let end = entry.offset + len;
        if end > values.len() {
            return Err(Error::MalformedCheckpoint {
                path: bpath,
                reason: format!("tensor {} overruns the blob", entry.name),
            });
        }
        tensors.push(NamedTensor {
            name: entry.name.clone(),
            tensor: Tensor::from_data(entry.shape.clone(), values[entry.offset..end].to_vec()),
        });
    }
    let loaded = ParamSet { tensors };

    // Rebuild from the architecture to validate the layout, then adopt
    // the stored values.
    let reference = SegModel::new(manifest.architecture.clone(), manifest.seed)?;
    reference.params.check_congruent(&loaded, "checkpoint")?;
    let model = SegModel {
        arch: manifest.architecture,
        params: loaded,
        seed: manifest.seed,
    };
    Ok((model, manifest.iteration))
}

//! The on-disk raster format: a JSON sidecar header plus a raw
//! band-sequential little-endian payload in a paired file.
//!
//! A raster at stem `foo` occupies `foo.json` (header) and `foo.bin`
//! (payload). Read and write accept the stem or either file path.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{LabelRaster, MultiSpectralImage, ProbabilityMap, TRAINABLE_CLASSES, UNLABELED};
use crate::error::{Error, Result};
use crate::raster::FuelClass;

/// Nodata value for source-id rasters; no CLC or LUCAS scheme uses id 0.
pub const SOURCE_NODATA: u16 = 0;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RasterHeader {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: String,
    pub band_names: Vec<String>,
    pub nodata: Option<f64>,
    /// Opaque georeferencing blob, carried through but never interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geo: Option<serde_json::Value>,
}

/// Raster of land-cover scheme ids (e.g. CLC codes), prior to remapping
/// into the fuel taxonomy. Stored on disk as a single f32 band.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceIdRaster {
    ids: Vec<u16>,
    height: usize,
    width: usize,
}

impl SourceIdRaster {
    pub fn new(ids: Vec<u16>, height: usize, width: usize) -> Result<Self> {
        if ids.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "expected {} ids for {height}x{width}, got {}",
                height * width,
                ids.len()
            )));
        }
        Ok(Self { ids, height, width })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[u16] {
        &self.ids
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.ids[row * self.width + col]
    }
}

/// What [`read_raster`] found on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum TypedRaster {
    Image(MultiSpectralImage),
    Labels(LabelRaster),
}

fn stem_of(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn header_path(path: &Path) -> PathBuf {
    let mut p = stem_of(path).into_os_string();
    p.push(".json");
    PathBuf::from(p)
}

fn payload_path(path: &Path) -> PathBuf {
    let mut p = stem_of(path).into_os_string();
    p.push(".bin");
    PathBuf::from(p)
}

fn dtype_size(dtype: &str) -> Option<usize> {
    match dtype {
        "f32" => Some(4),
        "u8" => Some(1),
        _ => None,
    }
}

fn read_header(path: &Path) -> Result<RasterHeader> {
    let hpath = header_path(path);
    let text = fs::read_to_string(&hpath).map_err(|e| Error::io(&hpath, e))?;
    let header: RasterHeader = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: hpath.clone(),
        source: e,
    })?;
    if header.width == 0 || header.height == 0 || header.bands == 0 {
        return Err(Error::MalformedHeader {
            path: hpath,
            reason: format!(
                "degenerate dimensions {}x{}x{}",
                header.bands, header.height, header.width
            ),
        });
    }
    if header.band_names.len() != header.bands {
        return Err(Error::MalformedHeader {
            path: hpath,
            reason: format!(
                "{} band names for {} bands",
                header.band_names.len(),
                header.bands
            ),
        });
    }
    if dtype_size(&header.dtype).is_none() {
        return Err(Error::UnknownDtype {
            path: hpath,
            dtype: header.dtype,
        });
    }
    Ok(header)
}

fn read_payload(path: &Path, header: &RasterHeader) -> Result<Vec<u8>> {
    let ppath = payload_path(path);
    let bytes = fs::read(&ppath).map_err(|e| Error::io(&ppath, e))?;
    let expected =
        header.width * header.height * header.bands * dtype_size(&header.dtype).unwrap();
    if bytes.len() != expected {
        return Err(Error::PayloadLength {
            path: ppath,
            expected,
            actual: bytes.len(),
        });
    }
    Ok(bytes)
}

fn decode_f32(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn encode_f32(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn write_pair(path: &Path, header: &RasterHeader, payload: &[u8]) -> Result<()> {
    let hpath = header_path(path);
    if let Some(parent) = hpath.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let text = serde_json::to_string_pretty(header).expect("header serializes");
    fs::write(&hpath, text).map_err(|e| Error::io(&hpath, e))?;
    let ppath = payload_path(path);
    fs::write(&ppath, payload).map_err(|e| Error::io(&ppath, e))?;
    Ok(())
}

/// Reads a raster pair and types it: a single u8 band is a [`LabelRaster`],
/// a multi-band f32 stack is a [`MultiSpectralImage`].
pub fn read_raster(path: impl AsRef<Path>) -> Result<TypedRaster> {
    let path = path.as_ref();
    let header = read_header(path)?;
    let bytes = read_payload(path, &header)?;
    match (header.dtype.as_str(), header.bands) {
        ("u8", 1) => Ok(TypedRaster::Labels(LabelRaster::new(
            bytes,
            header.height,
            header.width,
        )?)),
        ("f32", bands) if bands >= 2 => Ok(TypedRaster::Image(MultiSpectralImage::new(
            decode_f32(&bytes),
            header.band_names,
            header.height,
            header.width,
        )?)),
        (dtype, bands) => Err(Error::UnsupportedLayout {
            path: header_path(path),
            dtype: dtype.to_string(),
            bands,
        }),
    }
}

/// Writes a raster pair; the round trip through [`read_raster`] is bit-exact.
pub fn write_raster(raster: &TypedRaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match raster {
        TypedRaster::Labels(labels) => {
            let header = RasterHeader {
                width: labels.width(),
                height: labels.height(),
                bands: 1,
                dtype: "u8".to_string(),
                band_names: vec!["labels".to_string()],
                nodata: Some(UNLABELED as f64),
                geo: None,
            };
            write_pair(path, &header, labels.values())
        }
        TypedRaster::Image(image) => {
            let header = RasterHeader {
                width: image.width(),
                height: image.height(),
                bands: image.band_count(),
                dtype: "f32".to_string(),
                band_names: image.band_names().to_vec(),
                nodata: None,
                geo: None,
            };
            write_pair(path, &header, &encode_f32(image.data()))
        }
    }
}

/// Reads a single-band f32 raster of integral scheme ids.
pub fn read_source_ids(path: impl AsRef<Path>) -> Result<SourceIdRaster> {
    let path = path.as_ref();
    let header = read_header(path)?;
    if header.dtype != "f32" || header.bands != 1 {
        return Err(Error::UnsupportedLayout {
            path: header_path(path),
            dtype: header.dtype,
            bands: header.bands,
        });
    }
    let values = decode_f32(&read_payload(path, &header)?);
    let mut ids = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() || v.fract() != 0.0 || *v < 0.0 || *v > u16::MAX as f32 {
            return Err(Error::InvalidRaster(format!(
                "source id {v} at pixel ({}, {}) is not an integer in [0, {}]",
                i / header.width,
                i % header.width,
                u16::MAX
            )));
        }
        ids.push(*v as u16);
    }
    SourceIdRaster::new(ids, header.height, header.width)
}

pub fn write_source_ids(raster: &SourceIdRaster, path: impl AsRef<Path>) -> Result<()> {
    let header = RasterHeader {
        width: raster.width(),
        height: raster.height(),
        bands: 1,
        dtype: "f32".to_string(),
        band_names: vec!["source_ids".to_string()],
        nodata: Some(SOURCE_NODATA as f64),
        geo: None,
    };
    let values: Vec<f32> = raster.values().iter().map(|&v| v as f32).collect();
    write_pair(path.as_ref(), &header, &encode_f32(&values))
}

/// Writes a probability map as a 9-band f32 raster named by class.
pub fn write_probability_map(map: &ProbabilityMap, path: impl AsRef<Path>) -> Result<()> {
    let band_names = FuelClass::ALL[..TRAINABLE_CLASSES]
        .iter()
        .map(|c| format!("prob_{}", c.name()))
        .collect();
    let header = RasterHeader {
        width: map.width(),
        height: map.height(),
        bands: TRAINABLE_CLASSES,
        dtype: "f32".to_string(),
        band_names,
        nodata: None,
        geo: None,
    };
    write_pair(path.as_ref(), &header, &encode_f32(map.values()))
}

pub fn read_probability_map(path: impl AsRef<Path>) -> Result<ProbabilityMap> {
    let path = path.as_ref();
    let header = read_header(path)?;
    if header.dtype != "f32" || header.bands != TRAINABLE_CLASSES {
        return Err(Error::UnsupportedLayout {
            path: header_path(path),
            dtype: header.dtype,
            bands: header.bands,
        });
    }
    let values = decode_f32(&read_payload(path, &header)?);
    ProbabilityMap::new(values, header.height, header.width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn temp_stem(dir: &tempfile::TempDir, name: &str) -> PathBuf {
        dir.path().join(name)
    }

    #[test]
    fn decodes_small_label_raster() {
        let dir = tempfile::tempdir().unwrap();
        let stem = temp_stem(&dir, "labels");
        let header = RasterHeader {
            width: 2,
            height: 2,
            bands: 1,
            dtype: "u8".to_string(),
            band_names: vec!["labels".to_string()],
            nodata: Some(255.0),
            geo: None,
        };
        write_pair(&stem, &header, &[0, 1, 255, 8]).unwrap();
        match read_raster(&stem).unwrap() {
            TypedRaster::Labels(l) => {
                assert_eq!(l.get(0, 0), FuelClass::Artificial.id());
                assert_eq!(l.get(0, 1), FuelClass::Bare.id());
                assert_eq!(l.get(1, 0), UNLABELED);
                assert_eq!(l.get(1, 1), FuelClass::Shrubs.id());
            }
            other => panic!("expected labels, got {other:?}"),
        }
    }

    #[test]
    fn image_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let stem = temp_stem(&dir, "image");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<f32> = (0..12 * 16 * 16).map(|_| rng.gen::<f32>()).collect();
        let image =
            MultiSpectralImage::new(data, MultiSpectralImage::default_band_names(), 16, 16)
                .unwrap();
        write_raster(&TypedRaster::Image(image.clone()), &stem).unwrap();
        match read_raster(stem.with_extension("json")).unwrap() {
            TypedRaster::Image(back) => {
                assert_eq!(back.data().len(), image.data().len());
                for (a, b) in back.data().iter().zip(image.data()) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
            }
            other => panic!("expected image, got {other:?}"),
        }
    }

    #[test]
    fn short_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = temp_stem(&dir, "short");
        let header = RasterHeader {
            width: 2,
            height: 2,
            bands: 1,
            dtype: "u8".to_string(),
            band_names: vec!["labels".to_string()],
            nodata: None,
            geo: None,
        };
        fs::write(header_path(&stem), serde_json::to_string(&header).unwrap()).unwrap();
        fs::write(payload_path(&stem), [0u8, 1, 2]).unwrap();
        let err = read_raster(&stem).unwrap_err();
        assert!(matches!(err, Error::PayloadLength { expected: 4, actual: 3, .. }));
    }

    #[test]
    fn unknown_dtype_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let stem = temp_stem(&dir, "odd");
        fs::write(
            header_path(&stem),
            r#"{"width":1,"height":1,"bands":1,"dtype":"i64","band_names":["x"],"nodata":null}"#,
        )
        .unwrap();
        fs::write(payload_path(&stem), [0u8; 8]).unwrap();
        assert!(matches!(read_raster(&stem).unwrap_err(), Error::UnknownDtype { .. }));
    }

    #[test]
    fn unlabeled_raster_payload_is_all_ff() {
        let dir = tempfile::tempdir().unwrap();
        let stem = temp_stem(&dir, "blank");
        let labels = LabelRaster::unlabeled(3, 3);
        write_raster(&TypedRaster::Labels(labels), &stem).unwrap();
        let bytes = fs::read(payload_path(&stem)).unwrap();
        assert_eq!(bytes, vec![0xFFu8; 9]);
    }

    #[test]
    fn source_ids_round_trip_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let stem = temp_stem(&dir, "clc");
        let raster = SourceIdRaster::new(vec![111, 999, 0, 312], 2, 2).unwrap();
        write_source_ids(&raster, &stem).unwrap();
        assert_eq!(read_source_ids(&stem).unwrap(), raster);

        // Fractional values are not ids.
        let header = read_header(&stem).unwrap();
        fs::write(payload_path(&stem), encode_f32(&[1.5, 0.0, 0.0, 0.0])).unwrap();
        let _ = header;
        assert!(read_source_ids(&stem).is_err());
    }

    #[test]
    fn geo_field_survives_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = temp_stem(&dir, "geo");
        let header = RasterHeader {
            width: 1,
            height: 1,
            bands: 1,
            dtype: "u8".to_string(),
            band_names: vec!["labels".to_string()],
            nodata: None,
            geo: Some(serde_json::json!({"crs": "EPSG:3035", "origin": [0, 0]})),
        };
        write_pair(&stem, &header, &[3]).unwrap();
        let back = read_header(&stem).unwrap();
        assert_eq!(back.geo, header.geo);
    }
}

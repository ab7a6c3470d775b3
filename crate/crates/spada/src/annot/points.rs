//! Point-wise annotations: CSV ingestion and rasterization.

use std::path::Path;

use serde::Deserialize;

use super::mapping::{ClassMapping, MapTarget};
use crate::error::{Error, Result};
use crate::raster::{FuelClass, LabelRaster, UNLABELED};

/// Class of a point annotation. Survey id 4 covers both forest classes,
/// so the super-class is kept: evaluation accepts either forest
/// prediction for such points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointClass {
    Class(FuelClass),
    Forest,
}

impl PointClass {
    /// The class written into rasters (`Forest` is stored as `Broadleaves`).
    pub fn stored_class(self) -> FuelClass {
        match self {
            PointClass::Class(c) => c,
            PointClass::Forest => FuelClass::Broadleaves,
        }
    }

    pub fn matches(self, prediction: FuelClass) -> bool {
        match self {
            PointClass::Class(c) => c == prediction,
            PointClass::Forest => {
                prediction == FuelClass::Broadleaves || prediction == FuelClass::Coniferous
            }
        }
    }

    pub fn describe(self) -> String {
        match self {
            PointClass::Class(c) => c.name().to_string(),
            PointClass::Forest => "Forest".to_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointAnnotation {
    pub row: usize,
    pub col: usize,
    pub class: PointClass,
}

#[derive(Deserialize)]
struct PointRecord {
    row: usize,
    col: usize,
    lucas_id: u16,
}

/// Reads `row,col,lucas_id` records (header optional) and maps survey ids
/// through the given LUCAS mapping.
pub fn read_points_csv(path: impl AsRef<Path>, mapping: &ClassMapping) -> Result<Vec<PointAnnotation>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let has_header = text
        .lines()
        .next()
        .is_some_and(|l| l.split(',').any(|f| f.trim().parse::<u64>().is_err()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (i, record) in reader.deserialize::<PointRecord>().enumerate() {
        let line = i + 1 + usize::from(has_header);
        let record = record.map_err(|e| Error::MalformedPoints {
            path: path.to_path_buf(),
            line,
            reason: e.to_string(),
        })?;
        let class = match mapping.lookup(record.lucas_id) {
            Some(MapTarget::Class(c)) => PointClass::Class(c),
            Some(MapTarget::ForestSuperClass) => PointClass::Forest,
            None => {
                return Err(Error::MalformedPoints {
                    path: path.to_path_buf(),
                    line,
                    reason: format!("unmapped survey id {}", record.lucas_id),
                })
            }
        };
        points.push(PointAnnotation {
            row: record.row,
            col: record.col,
            class,
        });
    }
    Ok(points)
}

/// Recovers point annotations from a sparse label raster (one point per
/// labeled pixel). Super-class information cannot be represented in a
/// raster, so every point is a concrete class.
pub fn points_from_labels(labels: &LabelRaster) -> Vec<PointAnnotation> {
    let mut points = Vec::new();
    for r in 0..labels.height() {
        for c in 0..labels.width() {
            let v = labels.get(r, c);
            if v != UNLABELED {
                points.push(PointAnnotation {
                    row: r,
                    col: c,
                    class: PointClass::Class(FuelClass::from_id(v).expect("raster invariant")),
                });
            }
        }
    }
    points
}

/// Burns points into an otherwise-unlabeled raster. Duplicate points on
/// one pixel must agree; out-of-bounds coordinates are errors.
pub fn rasterize_points(
    points: &[PointAnnotation],
    height: usize,
    width: usize,
) -> Result<LabelRaster> {
    let mut seen: Vec<Option<PointClass>> = vec![None; height * width];
    let mut out = LabelRaster::unlabeled(height, width);
    for p in points {
        if p.row >= height || p.col >= width {
            return Err(Error::PointOutOfBounds {
                row: p.row,
                col: p.col,
                height,
                width,
            });
        }
        let slot = &mut seen[p.row * width + p.col];
        match slot {
            Some(existing) if *existing != p.class => {
                return Err(Error::PointConflict {
                    row: p.row,
                    col: p.col,
                    first: existing.describe(),
                    second: p.class.describe(),
                })
            }
            _ => *slot = Some(p.class),
        }
        out.set(p.row, p.col, p.class.stored_class().id());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn survey_ids_map_to_fuel_classes() {
        let mapping = ClassMapping::lucas_default();
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "row,col,lucas_id").unwrap();
        writeln!(file, "3,4,7").unwrap();
        writeln!(file, "0,0,8").unwrap();
        writeln!(file, "1,1,9").unwrap();
        writeln!(file, "2,2,4").unwrap();
        let points = read_points_csv(file.path(), mapping).unwrap();
        assert_eq!(points[0].class, PointClass::Class(FuelClass::Artificial));
        assert_eq!(points[1].class, PointClass::Class(FuelClass::Water));
        assert_eq!(points[2].class, PointClass::Class(FuelClass::Water));
        assert_eq!(points[3].class, PointClass::Forest);

        let raster = rasterize_points(&points, 8, 8).unwrap();
        assert_eq!(raster.get(3, 4), FuelClass::Artificial.id());
        assert_eq!(raster.get(2, 2), FuelClass::Broadleaves.id());
        assert_eq!(raster.labeled_count(), 4);
    }

    #[test]
    fn headerless_csv_is_accepted() {
        let mapping = ClassMapping::lucas_default();
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "0,1,5").unwrap();
        let points = read_points_csv(file.path(), mapping).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].class, PointClass::Class(FuelClass::Shrubs));
    }

    #[test]
    fn unknown_survey_id_is_reported() {
        let mapping = ClassMapping::lucas_default();
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "0,0,12").unwrap();
        let err = read_points_csv(file.path(), mapping).unwrap_err();
        assert!(matches!(err, Error::MalformedPoints { line: 1, .. }));
    }

    #[test]
    fn empty_point_list_gives_unlabeled_raster() {
        let raster = rasterize_points(&[], 4, 4).unwrap();
        assert_eq!(raster.labeled_count(), 0);
    }

    #[test]
    fn out_of_bounds_point_is_rejected() {
        let points = [PointAnnotation {
            row: 4,
            col: 0,
            class: PointClass::Class(FuelClass::Bare),
        }];
        assert!(matches!(
            rasterize_points(&points, 4, 4).unwrap_err(),
            Error::PointOutOfBounds { row: 4, .. }
        ));
    }

    #[test]
    fn conflicting_points_are_rejected() {
        let points = [
            PointAnnotation {
                row: 1,
                col: 1,
                class: PointClass::Class(FuelClass::Water),
            },
            PointAnnotation {
                row: 1,
                col: 1,
                class: PointClass::Class(FuelClass::Bare),
            },
        ];
        assert!(matches!(
            rasterize_points(&points, 4, 4).unwrap_err(),
            Error::PointConflict { .. }
        ));
        // A Forest point and its stored class are still distinct annotations.
        let points = [
            PointAnnotation {
                row: 0,
                col: 0,
                class: PointClass::Forest,
            },
            PointAnnotation {
                row: 0,
                col: 0,
                class: PointClass::Class(FuelClass::Broadleaves),
            },
        ];
        assert!(rasterize_points(&points, 4, 4).is_err());
        // Identical duplicates are fine.
        let points = [
            PointAnnotation {
                row: 0,
                col: 0,
                class: PointClass::Forest,
            };
            2
        ];
        assert!(rasterize_points(&points, 4, 4).is_ok());
    }
}

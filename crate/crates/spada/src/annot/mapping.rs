//! Source-scheme to fuel-class mappings and label remapping.
//!
//! The default CLC and LUCAS tables ship as an embedded JSON resource;
//! custom mappings may be loaded from a file of the same shape.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::raster::{FuelClass, LabelRaster, SourceIdRaster, SOURCE_NODATA, UNLABELED};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceScheme {
    Clc,
    Lucas,
}

/// Where a source id lands in the fuel taxonomy. LUCAS id 4 covers both
/// forest classes and is kept as a super-class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapTarget {
    Class(FuelClass),
    ForestSuperClass,
}

impl MapTarget {
    /// The class written into rasters; the forest super-class is stored as
    /// `Broadleaves` and its flag is kept on point annotations.
    pub fn stored_class(self) -> FuelClass {
        match self {
            MapTarget::Class(c) => c,
            MapTarget::ForestSuperClass => FuelClass::Broadleaves,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ClassMapping {
    scheme: SourceScheme,
    entries: BTreeMap<u16, MapTarget>,
}

#[derive(Deserialize)]
struct RawMappingFile {
    clc: BTreeMap<String, Vec<u16>>,
    lucas: BTreeMap<String, Vec<String>>,
}

const DEFAULT_MAPPING_JSON: &str = include_str!("default_mapping.json");

fn class_by_name(name: &str) -> Result<FuelClass> {
    FuelClass::ALL
        .iter()
        .copied()
        .find(|c| c.name() == name)
        .ok_or_else(|| Error::InvalidMapping(format!("unknown fuel class {name:?}")))
}

fn parse_mapping_file(text: &str, origin: &str) -> Result<(ClassMapping, ClassMapping)> {
    let raw: RawMappingFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidMapping(format!("{origin}: {e}")))?;

    let mut clc_entries = BTreeMap::new();
    for (class_name, ids) in &raw.clc {
        let class = class_by_name(class_name)?;
        for &id in ids {
            if clc_entries.insert(id, MapTarget::Class(class)).is_some() {
                return Err(Error::InvalidMapping(format!(
                    "{origin}: CLC id {id} listed more than once"
                )));
            }
        }
    }
    let clc = ClassMapping {
        scheme: SourceScheme::Clc,
        entries: clc_entries,
    };

    let mut lucas_entries = BTreeMap::new();
    for (key, targets) in &raw.lucas {
        let id: u16 = key
            .parse()
            .map_err(|_| Error::InvalidMapping(format!("{origin}: LUCAS id {key:?}")))?;
        let target = match targets.as_slice() {
            [single] => MapTarget::Class(class_by_name(single)?),
            [a, b] => {
                let mut pair = [class_by_name(a)?, class_by_name(b)?];
                pair.sort();
                if pair != [FuelClass::Broadleaves, FuelClass::Coniferous] {
                    return Err(Error::InvalidMapping(format!(
                        "{origin}: LUCAS id {id} maps to an unsupported class pair"
                    )));
                }
                MapTarget::ForestSuperClass
            }
            other => {
                return Err(Error::InvalidMapping(format!(
                    "{origin}: LUCAS id {id} maps to {} targets",
                    other.len()
                )))
            }
        };
        if lucas_entries.insert(id, target).is_some() {
            return Err(Error::InvalidMapping(format!(
                "{origin}: LUCAS id {id} listed more than once"
            )));
        }
    }
    let lucas = ClassMapping {
        scheme: SourceScheme::Lucas,
        entries: lucas_entries,
    };
    lucas.validate_lucas()?;

    Ok((clc, lucas))
}

fn defaults() -> &'static (ClassMapping, ClassMapping) {
    static DEFAULTS: OnceLock<(ClassMapping, ClassMapping)> = OnceLock::new();
    DEFAULTS.get_or_init(|| {
        parse_mapping_file(DEFAULT_MAPPING_JSON, "embedded default mapping")
            .expect("embedded mapping is valid")
    })
}

impl ClassMapping {
    /// The shipped CLC table: every CLC level-3 id plus the 999 nodata row.
    pub fn clc_default() -> &'static ClassMapping {
        &defaults().0
    }

    /// The shipped LUCAS table over survey ids 1-9.
    pub fn lucas_default() -> &'static ClassMapping {
        &defaults().1
    }

    /// Loads both mappings from a JSON file shaped like the embedded
    /// default. The CLC side must cover at least the shipped id set.
    pub fn from_file(path: impl AsRef<Path>) -> Result<(ClassMapping, ClassMapping)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let (clc, lucas) = parse_mapping_file(&text, &path.display().to_string())?;
        clc.validate_clc_coverage()?;
        Ok((clc, lucas))
    }

    pub fn scheme(&self) -> SourceScheme {
        self.scheme
    }

    pub fn lookup(&self, id: u16) -> Option<MapTarget> {
        self.entries.get(&id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = u16> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn validate_clc_coverage(&self) -> Result<()> {
        for id in ClassMapping::clc_default().ids() {
            if !self.entries.contains_key(&id) {
                return Err(Error::InvalidMapping(format!(
                    "CLC mapping is missing id {id}"
                )));
            }
        }
        Ok(())
    }

    fn validate_lucas(&self) -> Result<()> {
        for id in 1..=9u16 {
            match self.entries.get(&id) {
                None => {
                    return Err(Error::InvalidMapping(format!(
                        "LUCAS mapping is missing id {id}"
                    )))
                }
                Some(MapTarget::ForestSuperClass) if id != 4 => {
                    return Err(Error::InvalidMapping(format!(
                        "only LUCAS id 4 may map to the forest super-class, got id {id}"
                    )))
                }
                _ => {}
            }
        }
        if self.entries.get(&4) != Some(&MapTarget::ForestSuperClass) {
            return Err(Error::InvalidMapping(
                "LUCAS id 4 must map to the forest super-class".to_string(),
            ));
        }
        Ok(())
    }
}

/// Rewrites a raster of source-scheme ids into fuel-class labels. Nodata
/// pixels become [`UNLABELED`]; any id absent from the mapping is an error
/// reporting the id and its pixel count.
pub fn remap(src: &SourceIdRaster, mapping: &ClassMapping) -> Result<LabelRaster> {
    let mut classes = vec![UNLABELED; src.height() * src.width()];
    let mut unmapped: BTreeMap<u16, usize> = BTreeMap::new();
    for (i, &id) in src.values().iter().enumerate() {
        if id == SOURCE_NODATA {
            continue;
        }
        match mapping.lookup(id) {
            Some(target) => classes[i] = target.stored_class().id(),
            None => *unmapped.entry(id).or_insert(0) += 1,
        }
    }
    if let Some((&id, &pixels)) = unmapped.iter().next() {
        return Err(Error::UnmappedSourceId {
            id,
            pixels,
            other_ids: unmapped.len() - 1,
        });
    }
    LabelRaster::new(classes, src.height(), src.width())
}

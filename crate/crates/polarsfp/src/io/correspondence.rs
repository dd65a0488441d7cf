//! Cross-view pixel correspondences emitted by the renderer.
//!
//! For each reference-view pixel that lies on the scene, the map lists where
//! the same surface point appears in every view (sub-pixel coordinates).
//! Correspondences are always produced analytically from known geometry,
//! never estimated from images.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::Grid;

use super::IoFormatError;

/// A surface point's location in one view, in pixel coordinates (pixel
/// centers at integers).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub view: usize,
    pub x: f64,
    pub y: f64,
}

/// Per reference-view-pixel correspondence lists.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceMap {
    pub reference_view: usize,
    entries: Grid<Option<Vec<Location>>>,
}

impl CorrespondenceMap {
    pub fn new(reference_view: usize, width: usize, height: usize) -> Self {
        Self {
            reference_view,
            entries: Grid::filled(width, height, None),
        }
    }

    pub fn width(&self) -> usize {
        self.entries.width()
    }

    pub fn height(&self) -> usize {
        self.entries.height()
    }

    /// Sets the correspondence list for one reference pixel. The list must
    /// include the reference pixel itself and stay within image bounds.
    pub fn set(
        &mut self,
        x: usize,
        y: usize,
        locations: Vec<Location>,
    ) -> Result<(), IoFormatError> {
        self.validate_entry(x, y, &locations)?;
        *self.entries.get_mut(x, y) = Some(locations);
        Ok(())
    }

    pub fn get(&self, x: usize, y: usize) -> Option<&[Location]> {
        self.entries.get(x, y).as_deref()
    }

    /// Iterates `(x, y, locations)` over populated reference pixels.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &[Location])> {
        self.entries
            .iter_pixels()
            .filter_map(|(x, y, e)| e.as_deref().map(|locs| (x, y, locs)))
    }

    pub fn len(&self) -> usize {
        self.iter().count()
    }

    pub fn is_empty(&self) -> bool {
        self.iter().next().is_none()
    }

    fn validate_entry(
        &self,
        x: usize,
        y: usize,
        locations: &[Location],
    ) -> Result<(), IoFormatError> {
        let path = format!("entries[{x},{y}]");
        let in_bounds = |l: &Location| {
            l.x >= 0.0
                && l.x <= (self.width() - 1) as f64
                && l.y >= 0.0
                && l.y <= (self.height() - 1) as f64
        };
        if let Some(bad) = locations.iter().find(|l| !in_bounds(l)) {
            return Err(IoFormatError::schema(
                path,
                format!("location ({}, {}) outside image bounds", bad.x, bad.y),
            ));
        }
        let has_self = locations.iter().any(|l| {
            l.view == self.reference_view && l.x == x as f64 && l.y == y as f64
        });
        if !has_self {
            return Err(IoFormatError::schema(
                path,
                "reference pixel must appear in its own correspondence list",
            ));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    schema_version: u32,
    reference_view: usize,
    width: usize,
    height: usize,
    entries: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    x: usize,
    y: usize,
    locs: Vec<(usize, f64, f64)>,
}

const SCHEMA_VERSION: u32 = 1;

pub fn write_correspondences(
    map: &CorrespondenceMap,
    path: impl AsRef<Path>,
) -> Result<(), IoFormatError> {
    let doc = Doc {
        schema_version: SCHEMA_VERSION,
        reference_view: map.reference_view,
        width: map.width(),
        height: map.height(),
        entries: map
            .iter()
            .map(|(x, y, locs)| Entry {
                x,
                y,
                locs: locs.iter().map(|l| (l.view, l.x, l.y)).collect(),
            })
            .collect(),
    };
    fs::write(path, serde_json::to_string(&doc)?)?;
    Ok(())
}

pub fn read_correspondences(path: impl AsRef<Path>) -> Result<CorrespondenceMap, IoFormatError> {
    let doc: Doc = serde_json::from_str(&fs::read_to_string(path)?)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(IoFormatError::schema(
            "schema_version",
            format!("expected {SCHEMA_VERSION}, got {}", doc.schema_version),
        ));
    }
    if doc.width == 0 || doc.height == 0 {
        return Err(IoFormatError::schema("width/height", "zero dimension"));
    }
    let mut map = CorrespondenceMap::new(doc.reference_view, doc.width, doc.height);
    for e in doc.entries {
        if e.x >= doc.width || e.y >= doc.height {
            return Err(IoFormatError::schema(
                "entries",
                format!("reference pixel ({}, {}) outside image", e.x, e.y),
            ));
        }
        map.set(
            e.x,
            e.y,
            e.locs
                .into_iter()
                .map(|(view, x, y)| Location { view, x, y })
                .collect(),
        )?;
    }
    Ok(map)
}

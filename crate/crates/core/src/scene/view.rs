use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{OccupancyGrid, Scene};
use crate::geometry::Point2;

/// How much semantic labeling the top-down view exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationMode {
    /// Room-level and sub-area labels.
    Full,
    /// Sub-area labels only.
    NoRoomLevel,
    /// Geometry without labels.
    None,
    /// Region ids only, no geometry at all.
    NoMap,
}

impl AnnotationMode {
    pub const ALL: [AnnotationMode; 4] = [Self::Full, Self::NoRoomLevel, Self::None, Self::NoMap];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::NoRoomLevel => "no_room_level",
            Self::None => "none",
            Self::NoMap => "no_map",
        }
    }
}

impl fmt::Display for AnnotationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnnotationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown annotation mode `{s}` (expected full, no_room_level, none or no_map)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub id: String,
    pub label: Option<String>,
    pub parent: Option<String>,
    pub polygon: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewPayload {
    Map {
        regions: Vec<RegionSummary>,
        /// Occupancy rows in picture order.
        raster: Vec<String>,
        origin: Point2,
        cell_size: f64,
    },
    RegionIds(Vec<String>),
}

/// What a reasoning backend gets to see of the scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopDownView {
    pub scene_id: String,
    pub mode: AnnotationMode,
    pub payload: ViewPayload,
}

impl TopDownView {
    pub(super) fn render(scene: &Scene, mode: AnnotationMode) -> Self {
        let payload = match mode {
            AnnotationMode::NoMap => ViewPayload::RegionIds(scene.regions().iter().map(|r| r.id.clone()).collect()),
            _ => {
                let regions = scene
                    .regions()
                    .iter()
                    .map(|r| {
                        let label = match mode {
                            AnnotationMode::Full => r.annotation.clone(),
                            AnnotationMode::NoRoomLevel if !r.is_room_level() => r.annotation.clone(),
                            _ => None,
                        };
                        RegionSummary { id: r.id.clone(), label, parent: r.parent.clone(), polygon: r.polygon.clone() }
                    })
                    .collect();
                ViewPayload::Map {
                    regions,
                    raster: scene.grid().to_rows(),
                    origin: scene.grid().origin(),
                    cell_size: scene.cell_size(),
                }
            }
        };
        Self { scene_id: scene.id().to_string(), mode, payload }
    }

    pub fn region_ids(&self) -> Vec<&str> {
        match &self.payload {
            ViewPayload::Map { regions, .. } => regions.iter().map(|r| r.id.as_str()).collect(),
            ViewPayload::RegionIds(ids) => ids.iter().map(String::as_str).collect(),
        }
    }

    pub fn has_region(&self, id: &str) -> bool {
        self.region_ids().contains(&id)
    }

    pub fn polygon_count(&self) -> usize {
        match &self.payload {
            ViewPayload::Map { regions, .. } => regions.len(),
            ViewPayload::RegionIds(_) => 0,
        }
    }

    /// Region summaries when geometry is available.
    pub fn regions(&self) -> Option<&[RegionSummary]> {
        match &self.payload {
            ViewPayload::Map { regions, .. } => Some(regions),
            ViewPayload::RegionIds(_) => None,
        }
    }

    pub fn label(&self, id: &str) -> Option<&str> {
        self.regions()?.iter().find(|r| r.id == id)?.label.as_deref()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.regions()
            .map(|rs| rs.iter().filter_map(|r| r.label.as_deref()).collect())
            .unwrap_or_default()
    }

    /// Textual region list substituted into reasoning prompts.
    pub fn describe(&self) -> String {
        let items: Vec<String> = match &self.payload {
            ViewPayload::RegionIds(ids) => ids.clone(),
            ViewPayload::Map { regions, .. } => regions
                .iter()
                .map(|r| {
                    let mut s = r.id.clone();
                    if let Some(label) = &r.label {
                        s.push_str(&format!(" \"{label}\""));
                    }
                    if let Some(parent) = &r.parent {
                        s.push_str(&format!(" within {parent}"));
                    }
                    let pts: Vec<String> = r.polygon.iter().map(|p| format!("({:.2}, {:.2})", p.x, p.y)).collect();
                    s.push_str(&format!(" polygon {}", pts.join(" ")));
                    s
                })
                .collect(),
        };
        if items.is_empty() {
            "[(no regions)]".to_string()
        } else {
            format!("[{}]", items.join("; "))
        }
    }

    /// PNG raster of the map: one pixel per cell, occupied black, free white,
    /// region interiors tinted. `None` for views without a map.
    pub fn to_png(&self) -> Option<Vec<u8>> {
        let ViewPayload::Map { regions, raster, origin, cell_size } = &self.payload else {
            return None;
        };
        let h = raster.len() as u32;
        let w = raster.first().map(|r| r.len()).unwrap_or(0) as u32;
        if w == 0 || h == 0 {
            return None;
        }
        let mut img = image::RgbImage::new(w, h);
        for (r, row) in raster.iter().enumerate() {
            for (i, ch) in row.chars().enumerate() {
                let px = if ch == '#' { [0, 0, 0] } else { [255, 255, 255] };
                img.put_pixel(i as u32, r as u32, image::Rgb(px));
            }
        }
        for (k, region) in regions.iter().enumerate() {
            let tint = palette(k);
            for r in 0..h {
                for i in 0..w {
                    if img.get_pixel(i, r).0 == [0, 0, 0] {
                        continue;
                    }
                    let j = h - 1 - r;
                    let p = Point2::new(origin.x + (i as f64 + 0.5) * cell_size, origin.y + (j as f64 + 0.5) * cell_size);
                    if super::polygon::contains(&region.polygon, p) {
                        img.put_pixel(i, r, image::Rgb(tint));
                    }
                }
            }
        }
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, image::ImageFormat::Png).ok()?;
        Some(out.into_inner())
    }

    /// Grid reconstructed from the raster, when the view has one.
    pub fn grid(&self) -> Option<OccupancyGrid> {
        let ViewPayload::Map { raster, origin, cell_size, .. } = &self.payload else {
            return None;
        };
        super::grid_from_rows(raster, *origin, *cell_size).ok()
    }
}

fn palette(k: usize) -> [u8; 3] {
    const P: [[u8; 3]; 8] = [
        [230, 159, 0],
        [86, 180, 233],
        [0, 158, 115],
        [240, 228, 66],
        [0, 114, 178],
        [213, 94, 0],
        [204, 121, 167],
        [170, 170, 170],
    ];
    P[k % P.len()]
}

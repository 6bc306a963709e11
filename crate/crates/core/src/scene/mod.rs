//! Scene model: annotated regions, objects and the occupancy grid they live on.
//!
//! Scenes are authored as JSON documents (see `schemas/scene.schema.json`).
//! A loaded [`Scene`] is immutable and validated; it can be shared freely
//! between concurrently running episodes.

mod grid;
pub mod polygon;
mod view;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, Point3};

pub use grid::{Cell, OccupancyGrid};
pub use view::{AnnotationMode, RegionSummary, TopDownView, ViewPayload};

/// Default grid resolution in meters per cell.
pub const DEFAULT_CELL_SIZE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse { line: usize, column: usize, field: String, message: String },
    #[error("invalid {entity}: {message}")]
    Invariant { entity: String, message: String },
    #[error("point ({x}, {y}) is outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("region `{0}` has no free cell")]
    NoFreeSpace(String),
    #[error("unknown region `{0}`")]
    UnknownRegion(String),
}

impl SceneError {
    fn invariant(entity: impl Into<String>, message: impl Into<String>) -> Self {
        SceneError::Invariant { entity: entity.into(), message: message.into() }
    }

    pub(crate) fn out_of_bounds(p: Point2) -> Self {
        SceneError::OutOfBounds { x: p.x, y: p.y }
    }
}

/// Maps a `serde_path_to_error` failure onto [`SceneError::Parse`]-style fields.
pub(crate) fn parse_error_parts(err: &serde_path_to_error::Error<serde_json::Error>) -> (usize, usize, String, String) {
    let inner = err.inner();
    let field = err.path().to_string();
    (inner.line(), inner.column(), field, inner.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub polygon: Vec<Point2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl Region {
    pub fn area(&self) -> f64 {
        polygon::area(&self.polygon)
    }

    pub fn contains(&self, p: Point2) -> bool {
        polygon::contains(&self.polygon, p)
    }

    pub fn centroid(&self) -> Point2 {
        polygon::centroid(&self.polygon)
    }

    /// Room-level regions have no parent.
    pub fn is_room_level(&self) -> bool {
        self.parent.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub category: String,
    /// Box center in world coordinates.
    pub position: Point3,
    /// Axis-aligned size (x, y, z).
    pub extent: Point3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub containing_region: Option<String>,
    #[serde(default)]
    pub attributes: Vec<String>,
}

impl SceneObject {
    /// The eight box corners followed by the center.
    pub fn sample_points(&self) -> [Point3; 9] {
        let p = self.position;
        let h = Point3::new(self.extent.x / 2.0, self.extent.y / 2.0, self.extent.z / 2.0);
        let mut out = [p; 9];
        let mut k = 0;
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    out[k] = Point3::new(p.x + sx * h.x, p.y + sy * h.y, p.z + sz * h.z);
                    k += 1;
                }
            }
        }
        out
    }

    /// Planar footprint as `(min, max)`.
    pub fn footprint(&self) -> (Point2, Point2) {
        let (hx, hy) = (self.extent.x / 2.0, self.extent.y / 2.0);
        (
            Point2::new(self.position.x - hx, self.position.y - hy),
            Point2::new(self.position.x + hx, self.position.y + hy),
        )
    }
}

/// On-disk scene document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<u32>,
    id: String,
    cell_size: f64,
    origin: Point2,
    grid: Vec<String>,
    regions: Vec<Region>,
    objects: Vec<SceneObject>,
}

pub const SCENE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    id: String,
    regions: Vec<Region>,
    objects: Vec<SceneObject>,
    grid: OccupancyGrid,
    /// Free cells whose centers lie inside each region, in cell-index order.
    region_cells: Vec<Vec<Cell>>,
}

impl Scene {
    pub fn new(id: impl Into<String>, grid: OccupancyGrid, regions: Vec<Region>, objects: Vec<SceneObject>) -> Result<Self, SceneError> {
        let id = id.into();
        validate(&grid, &regions, &objects)?;
        let region_cells = regions.iter().map(|r| free_cells_inside(&grid, r)).collect();
        Ok(Self { id, regions, objects, grid, region_cells })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn cell_size(&self) -> f64 {
        self.grid.cell_size()
    }

    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn region_index(&self, id: &str) -> Result<usize, SceneError> {
        self.regions
            .iter()
            .position(|r| r.id == id)
            .ok_or_else(|| SceneError::UnknownRegion(id.to_string()))
    }

    /// Free cells whose centers fall inside the region polygon.
    pub fn region_free_cells(&self, region_id: &str) -> Result<&[Cell], SceneError> {
        Ok(&self.region_cells[self.region_index(region_id)?])
    }

    /// The region that contains `p`, preferring sub-areas over rooms.
    pub fn region_at(&self, p: Point2) -> Option<&Region> {
        let mut hits = self.regions.iter().filter(|r| r.contains(p));
        let first = hits.next()?;
        Some(std::iter::once(first).chain(hits).find(|r| !r.is_room_level()).unwrap_or(first))
    }

    pub fn line_of_sight(&self, a: Point2, b: Point2) -> Result<bool, SceneError> {
        for p in [a, b] {
            if !self.grid.contains_point(p) {
                return Err(SceneError::out_of_bounds(p));
            }
        }
        Ok(self.grid.line_of_sight(a, b).expect("endpoints checked"))
    }

    /// Line of sight from `from` to the object's center, where occupied cells
    /// covered by the object's own footprint do not occlude it.
    pub fn line_of_sight_to_object(&self, from: Point2, object: &SceneObject) -> Result<bool, SceneError> {
        let target = object.position.planar();
        for p in [from, target] {
            if !self.grid.contains_point(p) {
                return Err(SceneError::out_of_bounds(p));
            }
        }
        let (lo, hi) = object.footprint();
        let own = self.grid.cell_of(target);
        let cs = self.grid.cell_size();
        let origin = self.grid.origin();
        let transparent = |c: Cell| {
            if Some(c) == own {
                return true;
            }
            let cx0 = origin.x + c.i as f64 * cs;
            let cy0 = origin.y + c.j as f64 * cs;
            cx0 < hi.x && cx0 + cs > lo.x && cy0 < hi.y && cy0 + cs > lo.y
        };
        Ok(self.grid.line_of_sight_except(from, target, transparent).expect("endpoints checked"))
    }

    /// Uniformly samples a free cell inside the region and returns its center.
    pub fn sample_waypoint(&self, region_id: &str, seed: u64) -> Result<Point2, SceneError> {
        let cells = self.region_free_cells(region_id)?;
        if cells.is_empty() {
            return Err(SceneError::NoFreeSpace(region_id.to_string()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = cells[rng.random_range(0..cells.len())];
        Ok(self.grid.cell_center(pick))
    }

    pub fn render_top_down(&self, mode: AnnotationMode) -> TopDownView {
        TopDownView::render(self, mode)
    }

    /// Serializes to the on-disk JSON document.
    pub fn to_json(&self) -> String {
        let file = SceneFile {
            version: Some(SCENE_FORMAT_VERSION),
            id: self.id.clone(),
            cell_size: self.grid.cell_size(),
            origin: self.grid.origin(),
            grid: self.grid.to_rows(),
            regions: self.regions.clone(),
            objects: self.objects.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("scene serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SceneError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: SceneFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let (line, column, field, message) = parse_error_parts(&e);
            SceneError::Parse { line, column, field, message }
        })?;
        if let Some(v) = file.version {
            if v != SCENE_FORMAT_VERSION {
                return Err(SceneError::invariant("scene", format!("unsupported version {v}")));
            }
        }
        let grid = grid_from_rows(&file.grid, file.origin, file.cell_size)?;
        Scene::new(file.id, grid, file.regions, file.objects)
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io { path: path.to_path_buf(), source })?;
    Scene::from_json(&text)
}

/// Builds a grid from picture-ordered rows (first row is the highest y).
pub fn grid_from_rows(rows: &[String], origin: Point2, cell_size: f64) -> Result<OccupancyGrid, SceneError> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(SceneError::invariant("grid", format!("cell_size must be positive, got {cell_size}")));
    }
    let height = rows.len();
    let width = rows.first().map(|r| r.chars().count()).unwrap_or(0);
    if height == 0 || width == 0 {
        return Err(SceneError::invariant("grid", "grid must have at least one cell"));
    }
    let mut occupied = vec![false; width * height];
    for (r, row) in rows.iter().enumerate() {
        let j = height - 1 - r;
        let chars: Vec<char> = row.chars().collect();
        if chars.len() != width {
            return Err(SceneError::invariant("grid", format!("row {r} has {} cells, expected {width}", chars.len())));
        }
        for (i, ch) in chars.into_iter().enumerate() {
            occupied[j * width + i] = match ch {
                '.' => false,
                '#' => true,
                other => return Err(SceneError::invariant("grid", format!("row {r} column {i}: unexpected {other:?}"))),
            };
        }
    }
    Ok(OccupancyGrid::new(width, height, occupied, origin, cell_size).expect("dimensions checked"))
}

fn free_cells_inside(grid: &OccupancyGrid, region: &Region) -> Vec<Cell> {
    let (lo, hi) = polygon::bounds(&region.polygon);
    let cs = grid.cell_size();
    let origin = grid.origin();
    let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n.saturating_sub(1));
    let i0 = clamp(((lo.x - origin.x) / cs).floor(), grid.width());
    let i1 = clamp(((hi.x - origin.x) / cs).floor(), grid.width());
    let j0 = clamp(((lo.y - origin.y) / cs).floor(), grid.height());
    let j1 = clamp(((hi.y - origin.y) / cs).floor(), grid.height());
    let mut out = Vec::new();
    for j in j0..=j1 {
        for i in i0..=i1 {
            let c = Cell::new(i, j);
            if grid.is_free(c) && region.contains(grid.cell_center(c)) {
                out.push(c);
            }
        }
    }
    out
}

fn validate(grid: &OccupancyGrid, regions: &[Region], objects: &[SceneObject]) -> Result<(), SceneError> {
    let mut region_ids = BTreeMap::new();
    for r in regions {
        let entity = format!("region `{}`", r.id);
        if region_ids.insert(r.id.as_str(), r).is_some() {
            return Err(SceneError::invariant(entity, "duplicate region id"));
        }
        if r.polygon.len() < 3 {
            return Err(SceneError::invariant(entity, "polygon needs at least 3 vertices"));
        }
        if r.polygon.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(SceneError::invariant(entity, "non-finite vertex"));
        }
        if !polygon::is_simple(&r.polygon) {
            return Err(SceneError::invariant(entity, "polygon is self-intersecting"));
        }
        if !(r.area() > 0.0) {
            return Err(SceneError::invariant(entity, "polygon has zero area"));
        }
    }
    for r in regions {
        if let Some(parent) = &r.parent {
            let entity = format!("region `{}`", r.id);
            let Some(p) = region_ids.get(parent.as_str()) else {
                return Err(SceneError::invariant(entity, format!("parent `{parent}` does not exist")));
            };
            if p.id == r.id {
                return Err(SceneError::invariant(entity, "region is its own parent"));
            }
            if p.parent.is_some() {
                return Err(SceneError::invariant(entity, "region hierarchy is limited to room -> sub-area"));
            }
        }
    }
    let mut object_ids = BTreeSet::new();
    for o in objects {
        let entity = format!("object `{}`", o.id);
        if !object_ids.insert(o.id.as_str()) {
            return Err(SceneError::invariant(entity, "duplicate object id"));
        }
        let e = o.extent;
        if !(e.x >= 0.0 && e.y >= 0.0 && e.z >= 0.0) {
            return Err(SceneError::invariant(entity, "extent components must be non-negative"));
        }
        if !(o.position.z >= 0.0) {
            return Err(SceneError::invariant(entity, "position.z must be non-negative"));
        }
        let (lo, hi) = o.footprint();
        if !grid.contains_point(lo) || !grid.contains_point(hi) {
            return Err(SceneError::invariant(entity, "footprint leaves the grid"));
        }
        if let Some(region) = &o.containing_region {
            if !region_ids.contains_key(region.as_str()) {
                return Err(SceneError::invariant(entity, format!("containing_region `{region}` does not exist")));
            }
        }
        if o.category.trim().is_empty() {
            return Err(SceneError::invariant(entity, "empty category"));
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2> {
        vec![Point2::new(x0, y0), Point2::new(x1, y0), Point2::new(x1, y1), Point2::new(x0, y1)]
    }

    const MINIMAL: &str = r#"{
      "id": "mini",
      "cell_size": 1.0,
      "origin": [0.0, 0.0],
      "grid": ["....", "....", "....", "...."],
      "regions": [{"id": "tea_room", "polygon": [[0,0],[4,0],[4,4],[0,4]], "annotation": "tea room"}],
      "objects": [{"id": "cup", "category": "cup", "position": [1.5, 1.5, 0.8], "extent": [0.1, 0.1, 0.1],
                   "containing_region": "tea_room", "attributes": ["red"]}]
    }"#;

    #[test]
    fn minimal_file_loads() {
        let s = Scene::from_json(MINIMAL).unwrap();
        assert_eq!(s.regions().len(), 1);
        assert_eq!(s.objects().len(), 1);
        assert_eq!(s.grid().len(), 16);
        assert_eq!(s.object("cup").unwrap().attributes, vec!["red"]);
    }

    #[test]
    fn missing_containing_region_is_rejected() {
        let bad = MINIMAL.replace("\"containing_region\": \"tea_room\"", "\"containing_region\": \"kitchen\"");
        match Scene::from_json(&bad) {
            Err(SceneError::Invariant { entity, .. }) => assert!(entity.contains("cup")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_location_and_field() {
        let bad = MINIMAL.replace("\"cell_size\": 1.0", "\"cell_size\": \"big\"");
        match Scene::from_json(&bad) {
            Err(SceneError::Parse { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "cell_size");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_regions() {
        let g = OccupancyGrid::empty(4, 4, Point2::new(0.0, 0.0), 1.0).unwrap();
        let region = |id: &str, poly: Vec<Point2>, parent: Option<&str>| Region {
            id: id.into(),
            polygon: poly,
            annotation: None,
            parent: parent.map(Into::into),
        };
        let dup = vec![region("a", rect(0.0, 0.0, 1.0, 1.0), None), region("a", rect(1.0, 1.0, 2.0, 2.0), None)];
        assert!(Scene::new("s", g.clone(), dup, vec![]).is_err());
        let deep = vec![
            region("a", rect(0.0, 0.0, 4.0, 4.0), None),
            region("b", rect(0.0, 0.0, 2.0, 2.0), Some("a")),
            region("c", rect(0.0, 0.0, 1.0, 1.0), Some("b")),
        ];
        assert!(Scene::new("s", g.clone(), deep, vec![]).is_err());
        let flat = vec![region("a", vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)], None)];
        assert!(Scene::new("s", g, flat, vec![]).is_err());
    }

    #[test]
    fn rejects_object_outside_grid() {
        let g = OccupancyGrid::empty(4, 4, Point2::new(0.0, 0.0), 1.0).unwrap();
        let o = SceneObject {
            id: "o".into(),
            category: "box".into(),
            position: Point3::new(3.9, 1.0, 0.0),
            extent: Point3::new(0.5, 0.5, 0.5),
            containing_region: None,
            attributes: vec![],
        };
        assert!(Scene::new("s", g, vec![], vec![o]).is_err());
    }

    #[test]
    fn round_trip() {
        let s = Scene::from_json(MINIMAL).unwrap();
        let again = Scene::from_json(&s.to_json()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn single_free_cell_region() {
        let rows: Vec<String> = vec!["####".into(), "#.##".into(), "####".into(), "####".into()];
        let g = grid_from_rows(&rows, Point2::new(0.0, 0.0), 1.0).unwrap();
        let r = Region { id: "r".into(), polygon: rect(0.0, 0.0, 4.0, 4.0), annotation: None, parent: None };
        let s = Scene::new("s", g, vec![r], vec![]).unwrap();
        for seed in 0..20 {
            assert_eq!(s.sample_waypoint("r", seed).unwrap(), Point2::new(1.5, 2.5));
        }
    }

    #[test]
    fn fully_occupied_region_has_no_free_space() {
        let rows: Vec<String> = vec!["##".into(), "##".into()];
        let g = grid_from_rows(&rows, Point2::new(0.0, 0.0), 1.0).unwrap();
        let r = Region { id: "r".into(), polygon: rect(0.0, 0.0, 2.0, 2.0), annotation: None, parent: None };
        let s = Scene::new("s", g, vec![r], vec![]).unwrap();
        assert!(matches!(s.sample_waypoint("r", 1), Err(SceneError::NoFreeSpace(_))));
        assert!(matches!(s.sample_waypoint("zz", 1), Err(SceneError::UnknownRegion(_))));
    }

    #[test]
    fn object_own_cell_does_not_occlude() {
        let rows: Vec<String> = vec!["....".into(), "..#.".into(), "....".into(), "....".into()];
        let g = grid_from_rows(&rows, Point2::new(0.0, 0.0), 1.0).unwrap();
        let o = SceneObject {
            id: "m".into(),
            category: "coffee machine".into(),
            position: Point3::new(2.5, 2.5, 1.0),
            extent: Point3::new(0.4, 0.4, 0.4),
            containing_region: None,
            attributes: vec![],
        };
        let s = Scene::new("s", g, vec![], vec![o]).unwrap();
        let o = s.object("m").unwrap();
        assert!(!s.line_of_sight(Point2::new(0.5, 2.5), o.position.planar()).unwrap());
        assert!(s.line_of_sight_to_object(Point2::new(0.5, 2.5), o).unwrap());
    }
}

//! Spatial-affordance dataset pipeline: directional relations between
//! annotated instances, a small relational query grammar, QA sample
//! generation and point accuracy scoring.

mod coco;
mod generate;
mod phrase;
mod relations;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;
use crate::scene::polygon;

pub use coco::{load_frames, parse_frames, read_samples, write_samples, SampleRecord};
pub use generate::{generate_samples, generate_all, AffordanceKind, AffordanceSample, SAMPLE_POINTS_MAX, SAMPLE_POINTS_MIN};
pub use phrase::{normalize, object_query, parse_phrase, resolve_phrase, spatial_query, ParsedPhrase, Target};
pub use relations::{compute_relations, depth_relation, image_relation, DirectionalRelation, Relation, RelationConfig};

#[derive(Debug, Error)]
pub enum AffordanceError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("schema error at line {line}, column {column} (field `{field}`): {message}")]
    Schema { line: usize, column: usize, field: String, message: String },
    #[error("frame {frame}: {message}")]
    InvalidFrame { frame: String, message: String },
    #[error("query does not match the phrase grammar: {0:?}")]
    Grammar(String),
    #[error("no candidate matches {0:?}")]
    NoMatch(String),
    #[error("{count} candidates match {phrase:?}")]
    Ambiguous { phrase: String, count: usize },
    #[error("accuracy needs at least one predicted point")]
    EmptyPredictions,
}

/// Pixel-space box `(x1, y1, x2, y2)` with `x1 < x2`, `y1 < y2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    /// From COCO `[x, y, w, h]`.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self::new(x, y, x + w, y + h)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center(&self) -> Point2 {
        Point2::new((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn contains_strict(&self, p: Point2) -> bool {
        p.x > self.x1 && p.x < self.x2 && p.y > self.y1 && p.y < self.y2
    }

    pub fn of_points(points: &[Point2]) -> Self {
        let (lo, hi) = polygon::bounds(points);
        Self::new(lo.x, lo.y, hi.x, hi.y)
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: u64,
    pub category: String,
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<Point2>>,
    /// Mean depth in meters, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<f64>,
}

impl Instance {
    pub fn truth_region(&self) -> TruthRegion {
        match &self.mask {
            Some(m) => TruthRegion::Polygon(m.clone()),
            None => TruthRegion::Box(self.bbox),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedFrame {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub instances: Vec<Instance>,
    #[serde(default)]
    pub free_regions: Vec<Vec<Point2>>,
}

impl AnnotatedFrame {
    pub fn validate(&self) -> Result<(), AffordanceError> {
        let bad = |message: String| AffordanceError::InvalidFrame { frame: self.id.clone(), message };
        let (w, h) = (self.width as f64, self.height as f64);
        for inst in &self.instances {
            let b = inst.bbox;
            if !(b.x1 < b.x2 && b.y1 < b.y2) {
                return Err(bad(format!("instance {}: degenerate box {:?}", inst.id, b)));
            }
            if b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > w || b.y2 > h {
                return Err(bad(format!("instance {}: box {:?} leaves the {}x{} frame", inst.id, b, self.width, self.height)));
            }
            if let Some(mask) = &inst.mask {
                const TOL: f64 = 1e-6;
                if mask.len() < 3 || polygon::area(mask) <= 0.0 {
                    return Err(bad(format!("instance {}: mask needs 3+ vertices and positive area", inst.id)));
                }
                if mask.iter().any(|p| p.x < b.x1 - TOL || p.x > b.x2 + TOL || p.y < b.y1 - TOL || p.y > b.y2 + TOL) {
                    return Err(bad(format!("instance {}: mask leaves its box", inst.id)));
                }
            }
        }
        for (k, region) in self.free_regions.iter().enumerate() {
            if region.len() < 3 || !polygon::is_simple(region) || polygon::area(region) <= 0.0 {
                return Err(bad(format!("free region {k}: not a simple polygon with positive area")));
            }
            for inst in &self.instances {
                let b = inst.bbox;
                let clipped = polygon::clip_to_box(region, Point2::new(b.x1, b.y1), Point2::new(b.x2, b.y2));
                if polygon::area(&clipped) > 1e-9 {
                    return Err(bad(format!("free region {k} overlaps instance {}", inst.id)));
                }
            }
        }
        Ok(())
    }

    pub fn instance(&self, id: u64) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }
}

/// Region that answer points must fall in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthRegion {
    Box(BBox),
    Polygon(Vec<Point2>),
}

impl TruthRegion {
    pub fn contains_strict(&self, p: Point2) -> bool {
        match self {
            TruthRegion::Box(b) => b.contains_strict(p),
            TruthRegion::Polygon(poly) => polygon::contains_strict(poly, p),
        }
    }

    pub fn bbox(&self) -> BBox {
        match self {
            TruthRegion::Box(b) => *b,
            TruthRegion::Polygon(poly) => BBox::of_points(poly),
        }
    }
}

/// Fraction of predicted points strictly inside the truth region.
pub fn accuracy(predictions: &[Point2], truth: &TruthRegion) -> Result<f64, AffordanceError> {
    if predictions.is_empty() {
        return Err(AffordanceError::EmptyPredictions);
    }
    let hits = predictions.iter().filter(|p| truth.contains_strict(**p)).count();
    Ok(hits as f64 / predictions.len() as f64)
}

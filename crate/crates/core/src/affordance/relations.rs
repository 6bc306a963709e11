use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AnnotatedFrame, BBox};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Up,
    Down,
    Left,
    Right,
    Front,
    Back,
}

impl Relation {
    pub const ALL: [Relation; 6] = [Self::Up, Self::Down, Self::Left, Self::Right, Self::Front, Self::Back];

    pub fn inverse(self) -> Self {
        match self {
            Self::Up => Self::Down,
            Self::Down => Self::Up,
            Self::Left => Self::Right,
            Self::Right => Self::Left,
            Self::Front => Self::Back,
            Self::Back => Self::Front,
        }
    }

    pub fn is_depth(self) -> bool {
        matches!(self, Self::Front | Self::Back)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Up => "up",
            Self::Down => "down",
            Self::Left => "left",
            Self::Right => "right",
            Self::Front => "front",
            Self::Back => "back",
        };
        f.write_str(s)
    }
}

/// `subject` stands in `relation` to `reference` (e.g. subject left-of reference).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectionalRelation {
    pub subject: u64,
    pub reference: u64,
    pub relation: Relation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationConfig {
    /// Image-plane gap must exceed `margin * min(box size)` along the dominant axis.
    pub margin: f64,
    /// Depth gap in meters required for front/back.
    pub depth_margin: f64,
}

impl Default for RelationConfig {
    fn default() -> Self {
        Self { margin: 0.5, depth_margin: 0.5 }
    }
}

/// Left/right or up/down relation of `a` with respect to `b`, along whichever
/// image axis separates their centers more. `None` when that gap is within the margin.
pub fn image_relation(a: &BBox, b: &BBox, cfg: &RelationConfig) -> Option<Relation> {
    let (ca, cb) = (a.center(), b.center());
    let du = cb.x - ca.x;
    let dv = cb.y - ca.y;
    if du.abs() >= dv.abs() {
        let threshold = cfg.margin * a.width().min(b.width());
        (du.abs() > threshold).then_some(if du > 0.0 { Relation::Left } else { Relation::Right })
    } else {
        let threshold = cfg.margin * a.height().min(b.height());
        (dv.abs() > threshold).then_some(if dv > 0.0 { Relation::Up } else { Relation::Down })
    }
}

/// Front means closer to the camera.
pub fn depth_relation(da: f64, db: f64, cfg: &RelationConfig) -> Option<Relation> {
    let gap = db - da;
    (gap.abs() > cfg.depth_margin).then_some(if gap > 0.0 { Relation::Front } else { Relation::Back })
}

/// All directional relations between ordered instance pairs, in instance order.
pub fn compute_relations(frame: &AnnotatedFrame, cfg: &RelationConfig) -> Vec<DirectionalRelation> {
    let mut out = Vec::new();
    for a in &frame.instances {
        for b in &frame.instances {
            if a.id == b.id {
                continue;
            }
            let mut push = |relation| out.push(DirectionalRelation { subject: a.id, reference: b.id, relation });
            if let Some(r) = image_relation(&a.bbox, &b.bbox, cfg) {
                push(r);
            }
            if let (Some(da), Some(db)) = (a.depth, b.depth) {
                if let Some(r) = depth_relation(da, db, cfg) {
                    push(r);
                }
            }
        }
    }
    out
}

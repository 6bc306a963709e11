use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::phrase::{normalize, object_query, spatial_query, Target};
use super::relations::{compute_relations, image_relation, Relation, RelationConfig};
use super::{AffordanceError, AnnotatedFrame, BBox, TruthRegion};
use crate::exec::Execution;
use crate::geometry::Point2;
use crate::seed;

pub const SAMPLE_POINTS_MIN: usize = 5;
pub const SAMPLE_POINTS_MAX: usize = 8;

// rejection sampling gives up after this many draws per point
const MAX_REJECTIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AffordanceKind {
    Object,
    Spatial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffordanceSample {
    pub frame: String,
    pub kind: AffordanceKind,
    pub query: String,
    pub points: Vec<Point2>,
    pub truth: TruthRegion,
    pub target: Target,
}

/// QA samples for one frame. Deterministic per `(frame id, seed)`.
pub fn generate_samples(frame: &AnnotatedFrame, seed: u64, cfg: &RelationConfig) -> Vec<AffordanceSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::SeedHasher::new().u64(seed).str(&frame.id).finish());
    let mut out = Vec::new();

    let category = |id: u64| normalize(&frame.instance(id).expect("relation ids come from the frame").category);
    let relations = compute_relations(frame, cfg);
    let mut seen = BTreeSet::new();
    for rel in &relations {
        let (subject_cat, reference_cat) = (category(rel.subject), category(rel.reference));
        if !seen.insert((rel.subject, rel.relation, reference_cat.clone())) {
            continue;
        }
        // instances of the subject's category that stand in this relation to
        // some instance of the reference category
        let holders: BTreeSet<u64> = relations
            .iter()
            .filter(|r| r.relation == rel.relation && category(r.subject) == subject_cat && category(r.reference) == reference_cat)
            .map(|r| r.subject)
            .collect();
        if holders.len() != 1 {
            continue;
        }
        let inst = frame.instance(rel.subject).expect("subject exists");
        let truth = inst.truth_region();
        let Some(points) = sample_points(&truth, &mut rng) else { continue };
        out.push(AffordanceSample {
            frame: frame.id.clone(),
            kind: AffordanceKind::Object,
            query: object_query(&inst.category, rel.relation, &reference_cat),
            points,
            truth,
            target: Target::Instance(rel.subject),
        });
    }

    let free_boxes: Vec<BBox> = frame.free_regions.iter().map(|p| BBox::of_points(p)).collect();
    let spatial: Vec<(usize, Relation, String)> = free_boxes
        .iter()
        .enumerate()
        .flat_map(|(k, fb)| {
            frame
                .instances
                .iter()
                .filter_map(move |inst| image_relation(fb, &inst.bbox, cfg).map(|r| (k, r, normalize(&inst.category))))
        })
        .collect();
    let mut seen = BTreeSet::new();
    for (k, relation, reference_cat) in &spatial {
        if !seen.insert((*k, *relation, reference_cat.clone())) {
            continue;
        }
        let holders: BTreeSet<usize> = spatial
            .iter()
            .filter(|(_, r, c)| r == relation && c == reference_cat)
            .map(|(k2, _, _)| *k2)
            .collect();
        if holders.len() != 1 {
            continue;
        }
        let truth = TruthRegion::Polygon(frame.free_regions[*k].clone());
        let Some(points) = sample_points(&truth, &mut rng) else { continue };
        out.push(AffordanceSample {
            frame: frame.id.clone(),
            kind: AffordanceKind::Spatial,
            query: spatial_query(*relation, reference_cat),
            points,
            truth,
            target: Target::FreeRegion(*k),
        });
    }
    out
}

/// Generates over many frames, validating each; output keeps frame order.
pub fn generate_all(
    frames: &[AnnotatedFrame],
    seed: u64,
    cfg: &RelationConfig,
    exec: Execution,
) -> Result<Vec<AffordanceSample>, AffordanceError> {
    for f in frames {
        f.validate()?;
    }
    Ok(exec.map(frames, |f| generate_samples(f, seed, cfg)).into_iter().flatten().collect())
}

/// 5 to 8 points drawn uniformly inside the region (strictly).
fn sample_points(truth: &TruthRegion, rng: &mut ChaCha8Rng) -> Option<Vec<Point2>> {
    let count = rng.random_range(SAMPLE_POINTS_MIN..=SAMPLE_POINTS_MAX);
    let b = truth.bbox();
    if !(b.x1 < b.x2 && b.y1 < b.y2) {
        return None;
    }
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut accepted = None;
        for _ in 0..MAX_REJECTIONS {
            let p = Point2::new(rng.random_range(b.x1..b.x2), rng.random_range(b.y1..b.y2));
            if truth.contains_strict(p) {
                accepted = Some(p);
                break;
            }
        }
        points.push(accepted?);
    }
    Some(points)
}

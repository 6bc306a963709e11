//! Synthetic egocentric observations and the pointing backends that localize
//! a queried object in them.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affordance::{self, AnnotatedFrame, BBox, Instance, RelationConfig, Target};
use crate::backend::BackendError;
use crate::geometry::{project, wrap_angle, world_to_camera, AgentPose, CameraIntrinsics, PixelPoint};
use crate::scene::{Scene, SceneError};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("scan pose ({x}, {y}) is not on a free cell")]
    PoseNotFree { x: f64, y: f64 },
    #[error("n_headings must be at least 1")]
    NoHeadings,
    #[error("centroid of an empty point list")]
    EmptyPoints,
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionConfig {
    pub intrinsics: CameraIntrinsics,
    pub n_headings: usize,
    /// Planar detection horizon in meters.
    pub max_range: f64,
    /// Camera height above the floor; only affects vertical pixel placement.
    pub camera_height: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self { intrinsics: CameraIntrinsics::default(), n_headings: 12, max_range: 10.0, camera_height: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub object_id: String,
    pub category: String,
    /// In-frame projections of the box corners and center.
    pub points: Vec<PixelPoint>,
    pub mean_depth: f64,
}

impl Detection {
    /// Pixel bounds of the points, padded so single-point detections keep a
    /// non-degenerate box, clamped to the image.
    pub fn bbox(&self, k: &CameraIntrinsics) -> BBox {
        const PAD: f64 = 0.5;
        let (mut x1, mut y1, mut x2, mut y2) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.points {
            x1 = x1.min(p.u);
            y1 = y1.min(p.v);
            x2 = x2.max(p.u);
            y2 = y2.max(p.v);
        }
        BBox::new(
            (x1 - PAD).max(0.0),
            (y1 - PAD).max(0.0),
            (x2 + PAD).min(k.width as f64),
            (y2 + PAD).min(k.height as f64),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Base pose of the scan; the camera looks along `heading()`.
    pub pose: AgentPose,
    pub heading_index: usize,
    pub n_headings: usize,
    pub intrinsics: CameraIntrinsics,
    pub detections: Vec<Detection>,
}

impl Observation {
    pub fn heading(&self) -> f64 {
        wrap_angle(self.pose.theta_r + self.heading_index as f64 * TAU / self.n_headings as f64)
    }

    pub fn camera_pose(&self) -> AgentPose {
        AgentPose::new(self.pose.x_r, self.pose.y_r, self.heading())
    }

    pub fn detection(&self, object_id: &str) -> Option<&Detection> {
        self.detections.iter().find(|d| d.object_id == object_id)
    }

    /// Detections as an annotated frame; instance ids are detection indices.
    pub fn to_frame(&self) -> AnnotatedFrame {
        AnnotatedFrame {
            id: format!("heading-{}", self.heading_index),
            width: self.intrinsics.width,
            height: self.intrinsics.height,
            instances: self
                .detections
                .iter()
                .enumerate()
                .map(|(k, d)| Instance {
                    id: k as u64,
                    category: d.category.clone(),
                    bbox: d.bbox(&self.intrinsics),
                    mask: None,
                    depth: Some(d.mean_depth),
                })
                .collect(),
            free_regions: vec![],
        }
    }

    /// Depth of the detection with the point nearest to `(u, v)`.
    pub fn depth_near(&self, u: f64, v: f64) -> Option<f64> {
        self.detections
            .iter()
            .flat_map(|d| d.points.iter().map(move |p| ((p.u - u).powi(2) + (p.v - v).powi(2), d.mean_depth)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, depth)| depth)
    }
}

/// One egocentric frame at `pose` rotated by `heading_index` steps.
pub fn observe(scene: &Scene, pose: &AgentPose, heading_index: usize, cfg: &PerceptionConfig) -> Result<Observation, PerceptionError> {
    if cfg.n_headings == 0 {
        return Err(PerceptionError::NoHeadings);
    }
    let here = pose.position();
    if !scene.grid().is_free_point(here) {
        return Err(PerceptionError::PoseNotFree { x: here.x, y: here.y });
    }
    let mut obs = Observation {
        pose: *pose,
        heading_index,
        n_headings: cfg.n_headings,
        intrinsics: cfg.intrinsics,
        detections: vec![],
    };
    let camera = obs.camera_pose();
    for object in scene.objects() {
        if here.distance(object.position.planar()) > cfg.max_range {
            continue;
        }
        let points: Vec<PixelPoint> = object
            .sample_points()
            .iter()
            .filter_map(|p| project(world_to_camera(*p, &camera, cfg.camera_height), &cfg.intrinsics).ok())
            .filter(|proj| proj.in_frame)
            .map(|proj| proj.pixel)
            .collect();
        if points.is_empty() || !scene.line_of_sight_to_object(here, object)? {
            continue;
        }
        let mean_depth = points.iter().map(|p| p.d).sum::<f64>() / points.len() as f64;
        obs.detections.push(Detection {
            object_id: object.id.clone(),
            category: object.category.clone(),
            points,
            mean_depth,
        });
    }
    // canonical order so scene-file object order does not leak into observations
    obs.detections.sort_by(|a, b| a.object_id.cmp(&b.object_id));
    Ok(obs)
}

/// Observations at `theta_r + i * 2pi / n_headings` for every heading.
pub fn panoramic_scan(scene: &Scene, pose: &AgentPose, cfg: &PerceptionConfig) -> Result<Vec<Observation>, PerceptionError> {
    if cfg.n_headings == 0 {
        return Err(PerceptionError::NoHeadings);
    }
    (0..cfg.n_headings).map(|i| observe(scene, pose, i, cfg)).collect()
}

/// Component-wise mean. Summation runs over sorted values so the result does
/// not depend on input order.
pub fn centroid(points: &[PixelPoint]) -> Result<PixelPoint, PerceptionError> {
    if points.is_empty() {
        return Err(PerceptionError::EmptyPoints);
    }
    let mean = |f: fn(&PixelPoint) -> f64| {
        let mut v: Vec<f64> = points.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v.iter().sum::<f64>() / v.len() as f64
    };
    Ok(PixelPoint::new(mean(|p| p.u), mean(|p| p.v), mean(|p| p.d)))
}

pub struct PointingQuery<'a> {
    pub target_phrase: &'a str,
    pub observation: &'a Observation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointingResult {
    pub found: bool,
    pub points: Vec<PixelPoint>,
}

impl PointingResult {
    pub fn not_found() -> Self {
        Self { found: false, points: vec![] }
    }

    pub fn found(points: Vec<PixelPoint>) -> Self {
        Self { found: !points.is_empty(), points }
    }
}

/// Pointing-model role: pixel points on the queried object, if visible.
///
/// `seed` drives any randomness so calls are reproducible independent of
/// thread scheduling.
pub trait PointingBackend: Send + Sync {
    fn point(&self, query: &PointingQuery<'_>, seed: u64) -> Result<PointingResult, BackendError>;

    fn name(&self) -> String;
}

/// Resolves the phrase against the observation's detections with the
/// affordance grammar; a bare category is read as `the <category>`.
#[derive(Debug, Clone, Default)]
pub struct OraclePointer {
    pub relations: RelationConfig,
}

impl OraclePointer {
    fn resolve(&self, query: &PointingQuery<'_>) -> Result<Option<usize>, BackendError> {
        let phrase = query.target_phrase.trim();
        if phrase.is_empty() {
            return Err(BackendError::InvalidQuery("empty target phrase".into()));
        }
        let phrase = if affordance::parse_phrase(phrase).is_ok() { phrase.to_string() } else { format!("the {phrase}") };
        let frame = query.observation.to_frame();
        match affordance::resolve_phrase(&frame, &phrase, &self.relations) {
            Ok(Target::Instance(k)) => Ok(Some(k as usize)),
            Ok(Target::FreeRegion(_)) => Ok(None),
            Err(affordance::AffordanceError::Grammar(p)) => Err(BackendError::InvalidQuery(p)),
            Err(_) => Ok(None),
        }
    }
}

impl PointingBackend for OraclePointer {
    fn point(&self, query: &PointingQuery<'_>, _seed: u64) -> Result<PointingResult, BackendError> {
        Ok(match self.resolve(query)? {
            Some(k) => PointingResult::found(query.observation.detections[k].points.clone()),
            None => PointingResult::not_found(),
        })
    }

    fn name(&self) -> String {
        "oracle".into()
    }
}

/// Oracle output with Gaussian pixel jitter, whole-detection misses and
/// spurious detections.
#[derive(Debug, Clone)]
pub struct NoisyPointer {
    pub oracle: OraclePointer,
    /// Pixel noise standard deviation.
    pub sigma: f64,
    /// Probability of reporting something when the target is not visible.
    pub p_fp: f64,
    /// Probability of missing a visible target.
    pub p_fn: f64,
}

impl NoisyPointer {
    pub fn new(sigma: f64, p_fp: f64, p_fn: f64) -> Result<Self, BackendError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(BackendError::Config(format!("sigma must be finite and non-negative, got {sigma}")));
        }
        for (name, p) in [("p_fp", p_fp), ("p_fn", p_fn)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(BackendError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(Self { oracle: OraclePointer::default(), sigma, p_fp, p_fn })
    }

    fn jitter(&self, points: &[PixelPoint], k: &CameraIntrinsics, rng: &mut ChaCha8Rng) -> Vec<PixelPoint> {
        if self.sigma == 0.0 {
            return points.to_vec();
        }
        let normal = Normal::new(0.0, self.sigma).expect("sigma validated");
        let max_u = (k.width as f64).next_down();
        let max_v = (k.height as f64).next_down();
        points
            .iter()
            .map(|p| {
                let u = (p.u + normal.sample(rng)).clamp(0.0, max_u);
                let v = (p.v + normal.sample(rng)).clamp(0.0, max_v);
                PixelPoint::new(u, v, p.d)
            })
            .collect()
    }
}

impl PointingBackend for NoisyPointer {
    fn point(&self, query: &PointingQuery<'_>, seed: u64) -> Result<PointingResult, BackendError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs = query.observation;
        let k = &obs.intrinsics;
        let flip = rng.random::<f64>();
        match self.oracle.resolve(query)? {
            Some(idx) => {
                if flip < self.p_fn {
                    return Ok(PointingResult::not_found());
                }
                Ok(PointingResult::found(self.jitter(&obs.detections[idx].points, k, &mut rng)))
            }
            None => {
                if flip >= self.p_fp {
                    return Ok(PointingResult::not_found());
                }
                let spurious = if obs.detections.is_empty() {
                    let depth = rng.random_range(0.5..5.0);
                    (0..5)
                        .map(|_| PixelPoint::new(rng.random_range(0.0..k.width as f64), rng.random_range(0.0..k.height as f64), depth))
                        .collect()
                } else {
                    let d = &obs.detections[rng.random_range(0..obs.detections.len())];
                    self.jitter(&d.points, k, &mut rng)
                };
                Ok(PointingResult::found(spurious))
            }
        }
    }

    fn name(&self) -> String {
        format!("noisy(sigma={}, p_fp={}, p_fn={})", self.sigma, self.p_fp, self.p_fn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, Point2, Point3};
    use crate::scene::{grid_from_rows, SceneObject};
    use std::f64::consts::FRAC_PI_2;

    fn open_scene(objects: Vec<SceneObject>) -> Scene {
        let rows: Vec<String> = (0..100).map(|_| ".".repeat(100)).collect();
        let g = grid_from_rows(&rows, Point2::new(0.0, 0.0), 0.1).unwrap();
        Scene::new("open", g, vec![], objects).unwrap()
    }

    pub(crate) fn object(id: &str, cat: &str, x: f64, y: f64) -> SceneObject {
        SceneObject {
            id: id.into(),
            category: cat.into(),
            position: Point3::new(x, y, 0.8),
            extent: Point3::new(0.2, 0.2, 0.2),
            containing_region: None,
            attributes: vec![],
        }
    }

    fn cfg4() -> PerceptionConfig {
        PerceptionConfig {
            intrinsics: CameraIntrinsics::from_hfov(640, 480, FRAC_PI_2).unwrap(),
            n_headings: 4,
            ..Default::default()
        }
    }

    #[test]
    fn empty_scene_scans_are_empty() {
        let s = open_scene(vec![]);
        let obs = panoramic_scan(&s, &AgentPose::new(5.0, 5.0, 0.0), &cfg4()).unwrap();
        assert_eq!(obs.len(), 4);
        assert!(obs.iter().all(|o| o.detections.is_empty()));
    }

    #[test]
    fn object_ahead_seen_in_exactly_one_heading() {
        let s = open_scene(vec![object("cup", "cup", 7.0, 5.0)]);
        let obs = panoramic_scan(&s, &AgentPose::new(5.0, 5.0, 0.0), &cfg4()).unwrap();
        let seen: Vec<usize> = obs.iter().filter(|o| !o.detections.is_empty()).map(|o| o.heading_index).collect();
        assert_eq!(seen, vec![0]);
        assert_eq!(obs[0].detections[0].points.len(), 9);
    }

    #[test]
    fn walled_off_object_is_never_seen() {
        let mut rows: Vec<String> = (0..100).map(|_| ".".repeat(100)).collect();
        for row in rows.iter_mut() {
            row.replace_range(60..61, "#");
        }
        let g = grid_from_rows(&rows, Point2::new(0.0, 0.0), 0.1).unwrap();
        let s = Scene::new("w", g, vec![], vec![object("cup", "cup", 7.0, 5.0)]).unwrap();
        let obs = panoramic_scan(&s, &AgentPose::new(5.0, 5.0, 0.0), &cfg4()).unwrap();
        assert!(obs.iter().all(|o| o.detections.is_empty()));
    }

    #[test]
    fn scanning_from_occupied_cell_fails() {
        let mut rows: Vec<String> = (0..10).map(|_| ".".repeat(10)).collect();
        rows[9].replace_range(0..1, "#");
        let g = grid_from_rows(&rows, Point2::new(0.0, 0.0), 1.0).unwrap();
        let s = Scene::new("w", g, vec![], vec![]).unwrap();
        assert!(matches!(
            panoramic_scan(&s, &AgentPose::new(0.5, 0.5, 0.0), &cfg4()),
            Err(PerceptionError::PoseNotFree { .. })
        ));
    }

    #[test]
    fn centroid_mean_identity_and_symmetry() {
        let c = centroid(&[PixelPoint::new(10.0, 10.0, 1.0), PixelPoint::new(20.0, 20.0, 3.0)]).unwrap();
        assert_eq!(c, PixelPoint::new(15.0, 15.0, 2.0));
        let p = PixelPoint::new(1.25, 7.5, 0.3);
        assert_eq!(centroid(&[p]).unwrap(), p);
        let pts: Vec<PixelPoint> = (0..9).map(|i| PixelPoint::new(0.1 * i as f64, 1.0 / (i + 1) as f64, 0.7 + i as f64)).collect();
        let mut rev = pts.clone();
        rev.reverse();
        rev.swap(2, 5);
        assert_eq!(centroid(&pts).unwrap(), centroid(&rev).unwrap());
        assert!(matches!(centroid(&[]), Err(PerceptionError::EmptyPoints)));
    }

    #[test]
    fn oracle_finds_visible_and_misses_occluded() {
        let s = open_scene(vec![object("m", "coffee machine", 7.0, 5.0), object("b", "book", 3.0, 5.0)]);
        let obs = panoramic_scan(&s, &AgentPose::new(5.0, 5.0, 0.0), &cfg4()).unwrap();
        let oracle = OraclePointer::default();
        let hit = oracle.point(&PointingQuery { target_phrase: "coffee machine", observation: &obs[0] }, 0).unwrap();
        assert!(hit.found);
        assert_eq!(hit.points, obs[0].detection("m").unwrap().points);
        let miss = oracle.point(&PointingQuery { target_phrase: "the coffee machine", observation: &obs[1] }, 0).unwrap();
        assert_eq!(miss, PointingResult::not_found());
        let book = oracle.point(&PointingQuery { target_phrase: "the book", observation: &obs[2] }, 0).unwrap();
        assert!(book.found);
    }

    #[test]
    fn noisy_points_stay_in_frame_and_repeat() {
        let s = open_scene(vec![object("m", "mug", 7.0, 5.0)]);
        let obs = observe(&s, &AgentPose::new(5.0, 5.0, 0.0), 0, &cfg4()).unwrap();
        let noisy = NoisyPointer::new(400.0, 0.0, 0.0).unwrap();
        let q = PointingQuery { target_phrase: "mug", observation: &obs };
        let a = noisy.point(&q, 17).unwrap();
        assert_eq!(a, noisy.point(&q, 17).unwrap());
        assert!(a.points.iter().all(|p| obs.intrinsics.contains(p.u, p.v)));
        let always_miss = NoisyPointer::new(0.0, 0.0, 1.0).unwrap();
        assert!(!always_miss.point(&q, 1).unwrap().found);
        assert!(NoisyPointer::new(-1.0, 0.0, 0.0).is_err());
        assert!(NoisyPointer::new(1.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn spurious_detection_when_enabled() {
        let s = open_scene(vec![object("m", "mug", 7.0, 5.0)]);
        let obs = observe(&s, &AgentPose::new(5.0, 5.0, 0.0), 2, &cfg4()).unwrap();
        let fp = NoisyPointer::new(0.0, 1.0, 0.0).unwrap();
        let r = fp.point(&PointingQuery { target_phrase: "mug", observation: &obs }, 3).unwrap();
        assert!(r.found);
    }

    #[test]
    fn depth_lookup_uses_nearest_detection() {
        let s = open_scene(vec![object("m", "mug", 7.0, 5.0)]);
        let obs = observe(&s, &AgentPose::new(5.0, 5.0, 0.0), 0, &cfg4()).unwrap();
        let d = obs.depth_near(320.0, 240.0).unwrap();
        assert!((d - 2.0).abs() < 0.2);
        let empty = observe(&open_scene(vec![]), &AgentPose::new(5.0, 5.0, 0.0), 0, &cfg4()).unwrap();
        assert!(empty.depth_near(1.0, 1.0).is_none());
    }
}

//! Waypoint exploration: grid navigation, panoramic scanning with pointing
//! queries, pixel-to-world goal localization and the continue/switch
//! fallback, plus the line-delimited episode trace.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::geometry::{backproject, camera_to_robot, robot_to_world, AgentPose, Point2};
use crate::perception::{centroid, panoramic_scan, Observation, PerceptionConfig, PerceptionError, PointingBackend, PointingQuery, PointingResult};
use crate::policy_global::{ExplorationQuery, Instruction, ReasoningBackend, StageOne};
use crate::scene::{Cell, OccupancyGrid, RegionSummary, Scene, SceneError, TopDownView};
use crate::seed;

#[derive(Debug, Error)]
pub enum LocalError {
    #[error("point ({x}, {y}) is not on a free cell")]
    NotFree { x: f64, y: f64 },
    #[error("no path from ({}, {}) to ({}, {})", from.x, from.y, to.x, to.y)]
    Unreachable { from: Point2, to: Point2 },
    #[error("pointing result has no points")]
    NotFound,
    #[error("no free cell within {radius} m of ({}, {})", at.x, at.y)]
    NoFreeCell { at: Point2, radius: f64 },
    #[error("back-projection failed: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalConfig {
    pub perception: PerceptionConfig,
    pub step_budget: usize,
    /// Waypoints closer than this to a visited one count as visited.
    pub visited_snap: f64,
    /// Search radius when moving a goal off occupied cells.
    pub clamp_radius: f64,
}

impl Default for LocalConfig {
    fn default() -> Self {
        Self { perception: PerceptionConfig::default(), step_budget: 500, visited_snap: 0.2, clamp_radius: 1.0 }
    }
}

// ---------------------------------------------------------------- navigation

#[derive(PartialEq)]
struct Open {
    f: f64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then on cell index
        other.f.total_cmp(&self.f).then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Free 8-neighbours reachable in one move; diagonals may not cut an
/// occupied corner. Yields `(cell, cost in cells)`.
pub fn moves(grid: &OccupancyGrid, c: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
    grid.neighbours(c).filter_map(move |n| {
        if grid.is_occupied(n) {
            return None;
        }
        if n.i != c.i && n.j != c.j {
            if grid.is_occupied(Cell::new(n.i, c.j)) || grid.is_occupied(Cell::new(c.i, n.j)) {
                return None;
            }
            return Some((n, std::f64::consts::SQRT_2));
        }
        Some((n, 1.0))
    })
}

fn free_cell(grid: &OccupancyGrid, p: Point2) -> Result<Cell, LocalError> {
    grid.cell_of(p).filter(|c| grid.is_free(*c)).ok_or(LocalError::NotFree { x: p.x, y: p.y })
}

/// Cells reachable from `start` under the same move rules as `navigate_to`.
pub fn reachable_from(grid: &OccupancyGrid, start: Cell) -> Vec<bool> {
    let mut seen = vec![false; grid.len()];
    if grid.is_occupied(start) {
        return seen;
    }
    let mut stack = vec![start];
    seen[grid.index(start)] = true;
    while let Some(c) = stack.pop() {
        for (n, _) in moves(grid, c) {
            let k = grid.index(n);
            if !seen[k] {
                seen[k] = true;
                stack.push(n);
            }
        }
    }
    seen
}

/// Shortest 8-connected cell path from `from` to `to` as poses. The first pose
/// is `from`; later poses sit on cell centers facing the direction of motion.
pub fn navigate_to(scene: &Scene, from: &AgentPose, to: Point2) -> Result<Vec<AgentPose>, LocalError> {
    let grid = scene.grid();
    let start = free_cell(grid, from.position())?;
    let goal = free_cell(grid, to)?;
    if start == goal {
        return Ok(vec![*from]);
    }
    let h = |c: Cell| ((c.i as f64 - goal.i as f64).powi(2) + (c.j as f64 - goal.j as f64).powi(2)).sqrt();
    let mut g = vec![f64::INFINITY; grid.len()];
    let mut parent = vec![usize::MAX; grid.len()];
    let mut closed = vec![false; grid.len()];
    let mut open = BinaryHeap::new();
    g[grid.index(start)] = 0.0;
    open.push(Open { f: h(start), idx: grid.index(start) });
    let goal_idx = grid.index(goal);
    while let Some(Open { idx, .. }) = open.pop() {
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        if idx == goal_idx {
            break;
        }
        let c = grid.cell_at(idx);
        for (n, cost) in moves(grid, c) {
            let k = grid.index(n);
            let cand = g[idx] + cost;
            if !closed[k] && cand < g[k] {
                g[k] = cand;
                parent[k] = idx;
                open.push(Open { f: cand + h(n), idx: k });
            }
        }
    }
    if !closed[goal_idx] {
        return Err(LocalError::Unreachable { from: from.position(), to });
    }
    let mut cells = vec![goal_idx];
    while *cells.last().expect("nonempty") != grid.index(start) {
        cells.push(parent[*cells.last().expect("nonempty")]);
    }
    cells.reverse();
    let mut poses = vec![*from];
    for w in cells.windows(2) {
        let a = grid.cell_center(grid.cell_at(w[0]));
        let b = grid.cell_center(grid.cell_at(w[1]));
        poses.push(AgentPose::new(b.x, b.y, (b.y - a.y).atan2(b.x - a.x)));
    }
    Ok(poses)
}

/// Cost of a pose path in cell units, as A* measures it.
pub fn path_cost(poses: &[AgentPose], cell_size: f64) -> f64 {
    poses.windows(2).map(|w| w[0].position().distance(w[1].position())).sum::<f64>() / cell_size
}

// -------------------------------------------------------------- localization

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalEstimate {
    /// World point recovered from the pixels, before clamping.
    pub raw: Point2,
    /// Nearest free cell center to `raw`.
    pub goal: Point2,
}

/// Centroid → back-projection → robot frame → world frame, using the scan
/// heading of the observation.
pub fn localize_raw(result: &PointingResult, obs: &Observation) -> Result<Point2, LocalError> {
    if !result.found || result.points.is_empty() {
        return Err(LocalError::NotFound);
    }
    let c = centroid(&result.points)?;
    let cam = backproject(c, &obs.intrinsics)?;
    Ok(robot_to_world(camera_to_robot(cam), &obs.camera_pose()))
}

/// Nearest free cell center within `radius` of `p`; ties go to the smaller
/// cell index.
pub fn clamp_to_free(grid: &OccupancyGrid, p: Point2, radius: f64) -> Option<Point2> {
    let cs = grid.cell_size();
    let o = grid.origin();
    let span = |v: f64, o: f64, n: usize| {
        let lo = ((v - radius - o) / cs).floor().max(0.0) as usize;
        let hi = (((v + radius - o) / cs).floor().max(-1.0) as isize).min(n as isize - 1);
        (lo, hi)
    };
    let (i0, i1) = span(p.x, o.x, grid.width());
    let (j0, j1) = span(p.y, o.y, grid.height());
    let mut best: Option<(f64, usize, Point2)> = None;
    for j in j0 as isize..=j1 {
        for i in i0 as isize..=i1 {
            let c = Cell::new(i as usize, j as usize);
            if grid.is_occupied(c) {
                continue;
            }
            let center = grid.cell_center(c);
            let d = center.distance(p);
            if d > radius {
                continue;
            }
            let idx = grid.index(c);
            if best.is_none_or(|(bd, bi, _)| d < bd || (d == bd && idx < bi)) {
                best = Some((d, idx, center));
            }
        }
    }
    best.map(|(_, _, c)| c)
}

pub fn localize_goal(result: &PointingResult, obs: &Observation, scene: &Scene, clamp_radius: f64) -> Result<GoalEstimate, LocalError> {
    let raw = localize_raw(result, obs)?;
    let goal = clamp_to_free(scene.grid(), raw, clamp_radius).ok_or(LocalError::NoFreeCell { at: raw, radius: clamp_radius })?;
    Ok(GoalEstimate { raw, goal })
}

// --------------------------------------------------------------- exploration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationState {
    pub current_region_id: String,
    pub visited_waypoints: Vec<Point2>,
    pub scans_without_detection: usize,
    pub regions_tried: Vec<String>,
    pub step_budget_remaining: usize,
}

impl ExplorationState {
    pub fn new(region: impl Into<String>, budget: usize) -> Self {
        let region = region.into();
        Self {
            current_region_id: region.clone(),
            visited_waypoints: vec![],
            scans_without_detection: 0,
            regions_tried: vec![region],
            step_budget_remaining: budget,
        }
    }

    /// Records a scan position unless it snaps onto an earlier one.
    pub fn visit(&mut self, p: Point2, snap: f64) {
        if !self.visited_waypoints.iter().any(|v| v.distance(p) < snap) {
            self.visited_waypoints.push(p);
        }
    }

    pub fn spend(&mut self, steps: usize) {
        self.step_budget_remaining = self.step_budget_remaining.saturating_sub(steps);
    }
}

/// Everything a step needs besides the mutable state.
pub struct StepContext<'a> {
    pub scene: &'a Scene,
    pub view: &'a TopDownView,
    pub instruction: &'a Instruction,
    pub target_phrase: &'a str,
    pub pointing: &'a dyn PointingBackend,
    pub reasoning: &'a dyn ReasoningBackend,
    pub config: &'a LocalConfig,
    /// Cells reachable from the episode start.
    pub reachable: &'a [bool],
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum StepOutcome {
    GoalFound { goal: GoalEstimate, heading_index: usize },
    Continue { waypoint: Point2 },
    SwitchRegion { region: String, waypoint: Point2 },
    Exhausted,
}

/// Farthest reachable free cell of the region from all visited waypoints,
/// ties to the smaller cell. `None` once every cell is within `snap`.
pub fn next_waypoint(scene: &Scene, region: &str, visited: &[Point2], reachable: &[bool], snap: f64) -> Result<Option<Point2>, SceneError> {
    let grid = scene.grid();
    let mut best: Option<(f64, Cell)> = None;
    for &c in scene.region_free_cells(region)? {
        if !reachable[grid.index(c)] {
            continue;
        }
        let p = grid.cell_center(c);
        let d = visited.iter().map(|v| v.distance(p)).fold(f64::INFINITY, f64::min);
        if d <= snap {
            continue;
        }
        if best.is_none_or(|(bd, bc)| d > bd || (d == bd && c < bc)) {
            best = Some((d, c));
        }
    }
    Ok(best.map(|(_, c)| grid.cell_center(c)))
}

/// A seeded waypoint in the region that the agent can reach: the sample
/// itself, or the reachable region cell nearest to it.
pub fn reachable_waypoint(scene: &Scene, region: &str, reachable: &[bool], seed: u64) -> Result<Option<Point2>, SceneError> {
    let sample = match scene.sample_waypoint(region, seed) {
        Ok(p) => p,
        Err(SceneError::NoFreeSpace(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let grid = scene.grid();
    if grid.cell_of(sample).is_some_and(|c| reachable[grid.index(c)]) {
        return Ok(Some(sample));
    }
    let mut best: Option<(f64, Cell)> = None;
    for &c in scene.region_free_cells(region)? {
        if !reachable[grid.index(c)] {
            continue;
        }
        let d = grid.cell_center(c).distance(sample);
        if best.is_none_or(|(bd, bc)| d < bd || (d == bd && c < bc)) {
            best = Some((d, c));
        }
    }
    Ok(best.map(|(_, c)| grid.cell_center(c)))
}

/// Scan at `pose` and query every heading. Returns the best hit, if any:
/// most points, then closest to the image center, then lowest heading.
pub fn scan_for_target(
    pose: &AgentPose,
    ctx: &StepContext<'_>,
    scan_index: usize,
    events: &mut Vec<Event>,
) -> Result<Option<(Observation, PointingResult)>, LocalError> {
    let observations = panoramic_scan(ctx.scene, pose, &ctx.config.perception)?;
    events.push(Event::Scan {
        pose: *pose,
        headings: observations.len(),
        visible: observations.iter().map(|o| o.detections.len()).sum(),
    });
    let mut best: Option<(Observation, PointingResult, f64)> = None;
    for obs in observations {
        let query = PointingQuery { target_phrase: ctx.target_phrase, observation: &obs };
        let s = seed::derive(ctx.seed, "point", (scan_index * obs.n_headings + obs.heading_index) as u64);
        let result = ctx.pointing.point(&query, s)?;
        if !result.found {
            continue;
        }
        let off = centroid(&result.points)?.u - obs.intrinsics.cx;
        let better = match &best {
            None => true,
            Some((_, r, o)) => result.points.len() > r.points.len() || (result.points.len() == r.points.len() && off.abs() < o.abs()),
        };
        if better {
            best = Some((obs, result, off));
        }
    }
    if let Some((obs, result, _)) = &best {
        events.push(Event::Detection { heading_index: obs.heading_index, points: result.points.len() });
    }
    Ok(best.map(|(o, r, _)| (o, r)))
}

/// One waypoint of exploration at the agent's current pose. Costs one step.
pub fn step_waypoint(
    state: &mut ExplorationState,
    pose: &AgentPose,
    ctx: &StepContext<'_>,
    events: &mut Vec<Event>,
) -> Result<StepOutcome, LocalError> {
    if state.step_budget_remaining == 0 {
        return Ok(StepOutcome::Exhausted);
    }
    state.spend(1);
    let scan_index = state.visited_waypoints.len();
    state.visit(pose.position(), ctx.config.visited_snap);
    if let Some((obs, result)) = scan_for_target(pose, ctx, scan_index, events)? {
        let goal = localize_goal(&result, &obs, ctx.scene, ctx.config.clamp_radius)?;
        return Ok(StepOutcome::GoalFound { goal, heading_index: obs.heading_index });
    }
    fallback(state, pose, ctx, events)
}

fn query<'a>(state: &'a ExplorationState, pose: &AgentPose, ctx: &StepContext<'a>) -> ExplorationQuery<'a> {
    ExplorationQuery {
        instruction: ctx.instruction,
        target_phrase: ctx.target_phrase,
        view: ctx.view,
        current_region: &state.current_region_id,
        scans_without_detection: state.scans_without_detection,
        regions_tried: &state.regions_tried,
        position: pose.position(),
    }
}

/// Two-stage decision after a miss: continue in the region, or switch.
pub fn fallback(state: &mut ExplorationState, pose: &AgentPose, ctx: &StepContext<'_>, events: &mut Vec<Event>) -> Result<StepOutcome, LocalError> {
    let n = state.visited_waypoints.len() as u64;
    let decision = ctx.reasoning.continue_or_switch(&query(state, pose, ctx), seed::derive(ctx.seed, "stage1", n))?;
    events.push(Event::Fallback { decision, scans_without_detection: state.scans_without_detection });
    state.scans_without_detection += 1;
    if decision == StageOne::Continue {
        let next = next_waypoint(ctx.scene, &state.current_region_id, &state.visited_waypoints, ctx.reachable, ctx.config.visited_snap)?;
        if let Some(waypoint) = next {
            return Ok(StepOutcome::Continue { waypoint });
        }
    }
    switch_region(state, pose, ctx, events)
}

/// Asks for untried regions until one has a reachable waypoint.
pub fn switch_region(state: &mut ExplorationState, pose: &AgentPose, ctx: &StepContext<'_>, events: &mut Vec<Event>) -> Result<StepOutcome, LocalError> {
    loop {
        let k = state.regions_tried.len() as u64;
        let Some(region) = ctx.reasoning.next_region(&query(state, pose, ctx), seed::derive(ctx.seed, "stage2", k))? else {
            return Ok(StepOutcome::Exhausted);
        };
        if state.regions_tried.contains(&region) || ctx.scene.region(&region).is_none() {
            // a backend repeating itself would otherwise loop forever
            return Err(BackendError::InvalidQuery(format!("next region {region:?} is unknown or already tried")).into());
        }
        events.push(Event::RegionSwitch { from: state.current_region_id.clone(), to: region.clone() });
        state.regions_tried.push(region.clone());
        state.current_region_id = region.clone();
        state.scans_without_detection = 0;
        if let Some(waypoint) = reachable_waypoint(ctx.scene, &region, ctx.reachable, seed::derive(ctx.seed, "waypoint", k))? {
            return Ok(StepOutcome::SwitchRegion { region, waypoint });
        }
    }
}

// --------------------------------------------------------------------- trace

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMap {
    pub raster: Vec<String>,
    pub origin: Point2,
    pub cell_size: f64,
    pub regions: Vec<RegionSummary>,
}

impl TraceMap {
    pub fn of(scene: &Scene) -> Self {
        let crate::scene::ViewPayload::Map { regions, raster, origin, cell_size } =
            scene.render_top_down(crate::scene::AnnotationMode::Full).payload
        else {
            unreachable!("full mode always carries a map")
        };
        Self { raster, origin, cell_size, regions }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminateReason {
    Success,
    Exhausted,
    Budget,
    Unreachable,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Header {
        task_id: String,
        scene_id: String,
        target_id: String,
        target: Point2,
        start: AgentPose,
        success_radius: f64,
        map: TraceMap,
    },
    GlobalDecision { object: String, region: String, rationale: String },
    Waypoint { region: String, point: Point2 },
    Path { poses: Vec<AgentPose> },
    Scan { pose: AgentPose, headings: usize, visible: usize },
    Detection { heading_index: usize, points: usize },
    Goal { raw: Point2, goal: Point2, reached: bool },
    Fallback { decision: StageOne, scans_without_detection: usize },
    RegionSwitch { from: String, to: String },
    Terminate {
        reason: TerminateReason,
        final_pose: AgentPose,
        ne: f64,
        success: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace is missing its {0} record")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub records: Vec<TraceRecord>,
}

impl EpisodeTrace {
    pub fn push(&mut self, step: usize, event: Event) {
        self.records.push(TraceRecord { step, event });
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().map(|r| &r.event)
    }

    pub fn task_id(&self) -> Option<&str> {
        self.events().find_map(|e| match e {
            Event::Header { task_id, .. } => Some(task_id.as_str()),
            _ => None,
        })
    }

    /// Start pose followed by every path pose after the first of its path.
    pub fn poses(&self) -> Vec<AgentPose> {
        let mut out = Vec::new();
        for e in self.events() {
            match e {
                Event::Header { start, .. } => out.push(*start),
                Event::Path { poses } => out.extend(poses.iter().skip(1).copied()),
                _ => {}
            }
        }
        out
    }

    pub fn final_pose(&self) -> Option<AgentPose> {
        self.events().find_map(|e| match e {
            Event::Terminate { final_pose, .. } => Some(*final_pose),
            _ => None,
        })
    }

    /// Navigation error recomputed from the header target and final pose.
    pub fn replay_ne(&self) -> Result<f64, TraceError> {
        let target = self
            .events()
            .find_map(|e| match e {
                Event::Header { target, .. } => Some(*target),
                _ => None,
            })
            .ok_or(TraceError::Missing("header"))?;
        let last = self.poses().last().copied().ok_or(TraceError::Missing("header"))?;
        Ok(last.position().distance(target))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let mut trace = Self::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: TraceRecord = serde_json::from_str(line).map_err(|e| TraceError::Parse { line: n + 1, message: e.to_string() })?;
            trace.records.push(r);
        }
        if trace.task_id().is_none() {
            return Err(TraceError::Missing("header"));
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraIntrinsics, PixelPoint};
    use crate::scene::grid_from_rows;

    fn scene_from(rows: &[&str], cs: f64) -> Scene {
        let rows: Vec<String> = rows.iter().map(|s| s.to_string()).collect();
        Scene::new("t", grid_from_rows(&rows, Point2::new(0.0, 0.0), cs).unwrap(), vec![], vec![]).unwrap()
    }

    #[test]
    fn same_cell_is_single_pose() {
        let s = scene_from(&["....", "...."], 1.0);
        let from = AgentPose::new(0.5, 0.5, 0.3);
        assert_eq!(navigate_to(&s, &from, Point2::new(0.7, 0.2)).unwrap(), vec![from]);
    }

    #[test]
    fn corridor_of_ten_cells() {
        let s = scene_from(&["###########", "...........", "###########"], 1.0);
        let path = navigate_to(&s, &AgentPose::new(0.5, 1.5, 0.0), Point2::new(10.5, 1.5)).unwrap();
        assert_eq!(path.len(), 11);
        assert!((path_cost(&path, 1.0) - 10.0).abs() < 1e-12);
        assert!(path.iter().skip(1).all(|p| p.theta_r == 0.0));
    }

    #[test]
    fn no_corner_cutting_and_unreachable() {
        let s = scene_from(&[".#", "#."], 1.0);
        assert!(matches!(
            navigate_to(&s, &AgentPose::new(0.5, 1.5, 0.0), Point2::new(1.5, 0.5)),
            Err(LocalError::Unreachable { .. })
        ));
        assert!(matches!(navigate_to(&s, &AgentPose::new(1.5, 1.5, 0.0), Point2::new(0.5, 0.5)), Err(LocalError::NotFree { .. })));
    }

    #[test]
    fn axis_case_localizes_two_meters_ahead() {
        let k = CameraIntrinsics::default();
        let obs = Observation { pose: AgentPose::new(0.0, 0.0, 0.0), heading_index: 0, n_headings: 12, intrinsics: k, detections: vec![] };
        let r = PointingResult::found(vec![PixelPoint::new(k.cx, k.cy, 2.0)]);
        let p = localize_raw(&r, &obs).unwrap();
        assert!((p.x - 2.0).abs() < 1e-12 && p.y.abs() < 1e-12);
        assert!(matches!(localize_raw(&PointingResult::not_found(), &obs), Err(LocalError::NotFound)));
    }

    #[test]
    fn clamp_finds_nearest_free_cell() {
        let g = grid_from_rows(&["...".into(), ".#.".into(), "...".into()], Point2::new(0.0, 0.0), 1.0).unwrap();
        let c = clamp_to_free(&g, Point2::new(1.5, 1.5), 1.0).unwrap();
        assert_eq!(c.distance(Point2::new(1.5, 1.5)), 1.0);
        // (i=1, j=0) has the smallest index among the four ties
        assert_eq!(c, Point2::new(1.5, 0.5));
        assert!(clamp_to_free(&g, Point2::new(1.5, 1.5), 0.5).is_none());
        assert_eq!(clamp_to_free(&g, Point2::new(0.2, 0.2), 1.0), Some(Point2::new(0.5, 0.5)));
    }

    #[test]
    fn farthest_point_progresses() {
        let rows: Vec<String> = (0..10).map(|_| ".".repeat(10)).collect();
        let g = grid_from_rows(&rows, Point2::new(0.0, 0.0), 1.0).unwrap();
        let region = crate::scene::Region {
            id: "r".into(),
            polygon: crate::scene::tests::rect(0.0, 0.0, 10.0, 10.0),
            annotation: None,
            parent: None,
        };
        let s = Scene::new("t", g, vec![region], vec![]).unwrap();
        let reach = reachable_from(s.grid(), Cell::new(0, 0));
        let first = next_waypoint(&s, "r", &[Point2::new(0.5, 0.5)], &reach, 0.2).unwrap().unwrap();
        assert_eq!(first, Point2::new(9.5, 9.5));
        let all: Vec<Point2> = (0..10).flat_map(|j| (0..10).map(move |i| Point2::new(i as f64 + 0.5, j as f64 + 0.5))).collect();
        assert_eq!(next_waypoint(&s, "r", &all, &reach, 0.2).unwrap(), None);
    }

    #[test]
    fn visited_snap() {
        let mut st = ExplorationState::new("r", 10);
        st.visit(Point2::new(0.0, 0.0), 0.2);
        st.visit(Point2::new(0.1, 0.0), 0.2);
        st.visit(Point2::new(0.3, 0.0), 0.2);
        assert_eq!(st.visited_waypoints.len(), 2);
    }
}

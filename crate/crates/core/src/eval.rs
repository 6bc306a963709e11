//! Benchmark harness: task suites, seeded rollouts, NE/SR aggregation,
//! ablation sweeps and report tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affordance::normalize;
use crate::backend::BackendError;
use crate::exec::Execution;
use crate::geometry::{success, AgentPose};
use crate::perception::{NoisyPointer, OraclePointer, PointingBackend};
use crate::policy_global::{self, Instruction, MissPolicy, OracleReasoner, OracleTable, PolicyError, ReasoningBackend, RemoteReasoner};
use crate::policy_local::{
    navigate_to, reachable_from, reachable_waypoint, step_waypoint, switch_region, fallback, EpisodeTrace, Event, ExplorationState, LocalConfig,
    LocalError, StepContext, StepOutcome, TerminateReason, TraceMap,
};
use crate::remote::{RemoteConfig, RemotePointer};
use crate::scene::{load_scene, parse_error_parts, AnnotationMode, Scene, SceneError, SceneObject, TopDownView};
use crate::seed::{derive, rollout_seed};

pub const DEFAULT_ROLLOUTS: usize = 10;
pub const DEFAULT_SUCCESS_RADIUS: f64 = 1.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: line {line}, column {column}, field `{field}`: {message}")]
    Schema { path: String, line: usize, column: usize, field: String, message: String },
    #[error("{path}: {source}")]
    Scene { path: String, source: SceneError },
    #[error("task {task}: {message}")]
    InvalidTask { task: String, message: String },
    #[error("invalid suite: {0}")]
    InvalidSuite(String),
    #[error("invalid sweep value {value:?} for {axis}: {message}")]
    SweepValue { axis: &'static str, value: String, message: String },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("backend setup: {0}")]
    Backend(#[from] BackendError),
}

fn default_radius() -> f64 {
    DEFAULT_SUCCESS_RADIUS
}

fn default_rollouts() -> usize {
    DEFAULT_ROLLOUTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Task {
    pub id: String,
    pub scene: String,
    pub instruction: Instruction,
    pub target_object: String,
    pub start_poses: Vec<AgentPose>,
    #[serde(default = "default_radius")]
    pub success_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuiteFile {
    #[serde(default)]
    version: Option<u32>,
    name: String,
    /// Scene file paths, relative to the suite file.
    scenes: Vec<String>,
    #[serde(default)]
    oracle_table: Option<String>,
    #[serde(default = "default_rollouts")]
    rollouts: usize,
    #[serde(default)]
    master_seed: u64,
    tasks: Vec<Task>,
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub name: String,
    pub scenes: BTreeMap<String, Scene>,
    pub oracle_table: Option<OracleTable>,
    pub rollouts: usize,
    pub master_seed: u64,
    pub tasks: Vec<Task>,
}

fn read(path: &Path) -> Result<String, EvalError> {
    fs::read_to_string(path).map_err(|e| EvalError::Io { path: path.display().to_string(), message: e.to_string() })
}

impl Suite {
    /// Validates tasks against their scenes.
    pub fn new(
        name: impl Into<String>,
        scenes: Vec<Scene>,
        oracle_table: Option<OracleTable>,
        rollouts: usize,
        master_seed: u64,
        tasks: Vec<Task>,
    ) -> Result<Self, EvalError> {
        if rollouts == 0 {
            return Err(EvalError::InvalidSuite("rollouts must be at least 1".into()));
        }
        let mut map = BTreeMap::new();
        for s in scenes {
            let id = s.id().to_string();
            if map.insert(id.clone(), s).is_some() {
                return Err(EvalError::InvalidSuite(format!("duplicate scene id {id:?}")));
            }
        }
        let mut ids = BTreeSet::new();
        for t in &tasks {
            let bad = |message: String| EvalError::InvalidTask { task: t.id.clone(), message };
            if !ids.insert(t.id.as_str()) {
                return Err(bad("duplicate task id".into()));
            }
            let scene = map.get(&t.scene).ok_or_else(|| bad(format!("unknown scene {:?}", t.scene)))?;
            let target = scene.object(&t.target_object).ok_or_else(|| bad(format!("unknown target object {:?}", t.target_object)))?;
            let category = normalize(&target.category);
            let same = scene.objects().iter().filter(|o| normalize(&o.category) == category).count();
            if same != 1 {
                return Err(bad(format!("target category {category:?} occurs {same} times in the scene; the goal must be unique")));
            }
            if !(t.success_radius > 0.0 && t.success_radius.is_finite()) {
                return Err(bad(format!("success_radius must be positive, got {}", t.success_radius)));
            }
            if t.start_poses.is_empty() {
                return Err(bad("no start poses".into()));
            }
            for p in &t.start_poses {
                if !scene.grid().is_free_point(p.position()) {
                    return Err(bad(format!("start pose ({}, {}) is not on a free cell", p.x_r, p.y_r)));
                }
            }
        }
        Ok(Self { name: name.into(), scenes: map, oracle_table, rollouts, master_seed, tasks })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = read(path)?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let file: SuiteFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let (line, column, field, message) = parse_error_parts(&e);
            EvalError::Schema { path: path.display().to_string(), line, column, field, message }
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let scenes = file
            .scenes
            .iter()
            .map(|p| {
                let full = base.join(p);
                load_scene(&full).map_err(|source| EvalError::Scene { path: full.display().to_string(), source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let table = file.oracle_table.as_ref().map(|p| OracleTable::load(base.join(p))).transpose()?;
        Self::new(file.name, scenes, table, file.rollouts, file.master_seed, file.tasks)
    }

    pub fn scene_of(&self, task: &Task) -> &Scene {
        &self.scenes[&task.scene]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReasoningSpec {
    Oracle {
        #[serde(default)]
        miss: MissPolicy,
    },
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointingSpec {
    Oracle,
    Noisy { sigma: f64, p_fp: f64, p_fn: f64 },
    Remote(RemoteConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub mode: AnnotationMode,
    pub local: LocalConfig,
    /// Continue threshold for the oracle reasoner.
    pub k: usize,
    pub reasoning: ReasoningSpec,
    pub pointing: PointingSpec,
    /// Replaces the suite's oracle table when set.
    pub oracle_table: Option<OracleTable>,
    pub rollouts: Option<usize>,
    pub master_seed: Option<u64>,
    pub exec: Execution,
    pub keep_traces: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            mode: AnnotationMode::Full,
            local: LocalConfig::default(),
            k: 3,
            reasoning: ReasoningSpec::Oracle { miss: MissPolicy::Error },
            pointing: PointingSpec::Oracle,
            oracle_table: None,
            rollouts: None,
            master_seed: None,
            exec: Execution::default(),
            keep_traces: false,
        }
    }
}

pub struct Backends {
    pub reasoning: Box<dyn ReasoningBackend>,
    pub pointing: Box<dyn PointingBackend>,
}

impl Backends {
    pub fn build(config: &EvalConfig, suite_table: Option<&OracleTable>) -> Result<Self, EvalError> {
        let reasoning: Box<dyn ReasoningBackend> = match &config.reasoning {
            ReasoningSpec::Oracle { miss } => {
                let table = config
                    .oracle_table
                    .clone()
                    .or_else(|| suite_table.cloned())
                    .ok_or_else(|| BackendError::Config("the oracle reasoner needs an oracle table".into()))?;
                Box::new(OracleReasoner { table, k: config.k, miss: *miss })
            }
            ReasoningSpec::Remote(rc) => Box::new(RemoteReasoner::new(rc.clone())?),
        };
        let pointing: Box<dyn PointingBackend> = match &config.pointing {
            PointingSpec::Oracle => Box::new(OraclePointer::default()),
            PointingSpec::Noisy { sigma, p_fp, p_fn } => Box::new(NoisyPointer::new(*sigma, *p_fp, *p_fn)?),
            PointingSpec::Remote(rc) => Box::new(RemotePointer::new(rc.clone())?),
        };
        Ok(Self { reasoning, pointing })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub ne: f64,
    pub success: bool,
    pub steps: usize,
    pub reason: TerminateReason,
    pub error: Option<String>,
    pub trace: EpisodeTrace,
}

struct Episode<'a> {
    scene: &'a Scene,
    target: &'a SceneObject,
    radius: f64,
    budget: usize,
    pose: AgentPose,
    trace: EpisodeTrace,
}

impl Episode<'_> {
    fn step(&self, state: &ExplorationState) -> usize {
        self.budget - state.step_budget_remaining
    }

    fn log(&mut self, state: &ExplorationState, events: Vec<Event>) {
        let step = self.step(state);
        for e in events {
            self.trace.push(step, e);
        }
    }

    /// Walks the path within the remaining budget; false when cut short.
    fn travel(&mut self, state: &mut ExplorationState, path: Vec<AgentPose>) -> bool {
        let moves = path.len() - 1;
        let allowed = moves.min(state.step_budget_remaining);
        let walked: Vec<AgentPose> = path[..=allowed].to_vec();
        self.pose = *walked.last().expect("path starts at the current pose");
        state.spend(allowed);
        if allowed > 0 {
            let step = self.step(state);
            self.trace.push(step, Event::Path { poses: walked });
        }
        allowed == moves
    }

    fn finish(mut self, state: &ExplorationState, reason: TerminateReason, error: Option<String>) -> EpisodeResult {
        let ne = self.pose.position().distance(self.target.position.planar());
        let ok = success(&self.pose, self.target, self.scene, self.radius).expect("poses stay on the grid");
        let steps = self.step(state);
        self.trace.push(steps, Event::Terminate { reason, final_pose: self.pose, ne, success: ok, error: error.clone() });
        EpisodeResult { ne, success: ok, steps, reason, error, trace: self.trace }
    }
}

fn failure_tag(e: &LocalError) -> (TerminateReason, String) {
    match e {
        LocalError::Backend(b) => (TerminateReason::BackendError, b.tag().to_string()),
        LocalError::Unreachable { .. } => (TerminateReason::Unreachable, "unreachable".into()),
        other => (TerminateReason::BackendError, format!("local:{other}")),
    }
}

/// One rollout: global decision, dispatch, then waypoints until the target is
/// reached, regions run out, or the step budget does.
pub fn run_episode(
    task: &Task,
    scene: &Scene,
    view: &TopDownView,
    backends: &Backends,
    local: &LocalConfig,
    start: AgentPose,
    seed: u64,
) -> EpisodeResult {
    let target = scene.object(&task.target_object).expect("suite validation checked the target");
    let mut ep = Episode { scene, target, radius: task.success_radius, budget: local.step_budget, pose: start, trace: EpisodeTrace::default() };
    ep.trace.push(
        0,
        Event::Header {
            task_id: task.id.clone(),
            scene_id: scene.id().to_string(),
            target_id: target.id.clone(),
            target: target.position.planar(),
            start,
            success_radius: task.success_radius,
            map: TraceMap::of(scene),
        },
    );
    let mut state = ExplorationState::new("", local.step_budget);

    let decision = match policy_global::decide(backends.reasoning.as_ref(), &task.instruction, view, derive(seed, "decide", 0)) {
        Ok(d) => d,
        Err(e) => {
            let tag = match &e {
                PolicyError::Backend(b) => b.tag().to_string(),
                PolicyError::RegionNotInView(_) => "region_not_in_view".to_string(),
                other => other.to_string(),
            };
            return ep.finish(&state, TerminateReason::BackendError, Some(tag));
        }
    };
    ep.trace.push(
        0,
        Event::GlobalDecision {
            object: decision.target_object_phrase.clone(),
            region: decision.target_region_id.clone(),
            rationale: decision.rationale.clone(),
        },
    );
    state = ExplorationState::new(decision.target_region_id.clone(), local.step_budget);

    let grid = scene.grid();
    let reachable = reachable_from(grid, grid.cell_of(start.position()).expect("start validated"));
    let ctx = StepContext {
        scene,
        view,
        instruction: &task.instruction,
        target_phrase: &decision.target_object_phrase,
        pointing: backends.pointing.as_ref(),
        reasoning: backends.reasoning.as_ref(),
        config: local,
        reachable: &reachable,
        seed,
    };

    let first = reachable_waypoint(scene, &decision.target_region_id, &reachable, derive(seed, "dispatch", 0)).expect("region exists");
    let mut events = vec![];
    let mut next = match first {
        Some(waypoint) => Ok(StepOutcome::Continue { waypoint }),
        None => switch_region(&mut state, &ep.pose, &ctx, &mut events),
    };
    ep.log(&state, std::mem::take(&mut events));

    loop {
        let outcome = match next {
            Ok(o) => o,
            Err(e) => {
                let (reason, tag) = failure_tag(&e);
                return ep.finish(&state, reason, Some(tag));
            }
        };
        let waypoint = match outcome {
            StepOutcome::Continue { waypoint } | StepOutcome::SwitchRegion { waypoint, .. } => waypoint,
            StepOutcome::Exhausted => {
                let reason = if state.step_budget_remaining == 0 { TerminateReason::Budget } else { TerminateReason::Exhausted };
                return ep.finish(&state, reason, None);
            }
            StepOutcome::GoalFound { .. } => unreachable!("goals are handled below"),
        };
        ep.trace.push(ep.step(&state), Event::Waypoint { region: state.current_region_id.clone(), point: waypoint });
        match navigate_to(scene, &ep.pose, waypoint) {
            Ok(path) => {
                if !ep.travel(&mut state, path) {
                    return ep.finish(&state, TerminateReason::Budget, None);
                }
            }
            Err(e) => {
                let (reason, tag) = failure_tag(&e);
                return ep.finish(&state, reason, Some(tag));
            }
        }
        let pose = ep.pose;
        let step = step_waypoint(&mut state, &pose, &ctx, &mut events);
        ep.log(&state, std::mem::take(&mut events));
        next = match step {
            Ok(StepOutcome::GoalFound { goal, .. }) => {
                let reached = match navigate_to(scene, &ep.pose, goal.goal) {
                    Ok(path) => {
                        if !ep.travel(&mut state, path) {
                            ep.trace.push(ep.step(&state), Event::Goal { raw: goal.raw, goal: goal.goal, reached: false });
                            return ep.finish(&state, TerminateReason::Budget, None);
                        }
                        success(&ep.pose, target, scene, task.success_radius).expect("poses stay on the grid")
                    }
                    Err(_) => false,
                };
                ep.trace.push(ep.step(&state), Event::Goal { raw: goal.raw, goal: goal.goal, reached });
                if reached {
                    return ep.finish(&state, TerminateReason::Success, None);
                }
                let pose = ep.pose;
                let r = fallback(&mut state, &pose, &ctx, &mut events);
                ep.log(&state, std::mem::take(&mut events));
                r
            }
            other => other,
        };
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRow {
    pub task_id: String,
    pub scene_id: String,
    pub rollout: usize,
    pub seed: u64,
    pub ne: f64,
    pub success: bool,
    pub steps: usize,
    pub reason: TerminateReason,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub trials: usize,
    pub successes: usize,
    pub sr: f64,
    pub mean_ne: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub reasoning: String,
    pub pointing: String,
    pub mode: AnnotationMode,
    pub master_seed: u64,
    pub rollouts: usize,
    pub rows: Vec<RolloutRow>,
    pub scenes: BTreeMap<String, SceneSummary>,
    /// Mean of the per-scene success rates.
    pub avg_sr: f64,
}

pub struct SuiteRun {
    pub result: SuiteResult,
    /// Traces in row order; empty unless `keep_traces` was set.
    pub traces: Vec<EpisodeTrace>,
}

/// Per-scene and overall aggregates from the rows alone.
pub fn aggregate(rows: &[RolloutRow]) -> (BTreeMap<String, SceneSummary>, f64) {
    let mut scenes: BTreeMap<String, (usize, usize, f64)> = BTreeMap::new();
    for r in rows {
        let e = scenes.entry(r.scene_id.clone()).or_default();
        e.0 += 1;
        e.1 += r.success as usize;
        e.2 += r.ne;
    }
    let scenes: BTreeMap<String, SceneSummary> = scenes
        .into_iter()
        .map(|(id, (trials, successes, ne))| {
            (id, SceneSummary { trials, successes, sr: successes as f64 / trials as f64, mean_ne: ne / trials as f64 })
        })
        .collect();
    let avg_sr = if scenes.is_empty() { 0.0 } else { scenes.values().map(|s| s.sr).sum::<f64>() / scenes.len() as f64 };
    (scenes, avg_sr)
}

impl SuiteResult {
    /// True when the stored aggregates equal a fresh recomputation.
    pub fn is_consistent(&self) -> bool {
        let (scenes, avg) = aggregate(&self.rows);
        scenes == self.scenes && avg == self.avg_sr
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    /// Per-scene NE and SR columns plus the average SR.
    pub fn to_text_table(&self) -> String {
        let names: Vec<&String> = self.scenes.keys().collect();
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(9);
        let mut out = String::new();
        let _ = writeln!(out, "suite: {}  reasoning: {}  pointing: {}  mode: {}", self.suite, self.reasoning, self.pointing, self.mode);
        let _ = writeln!(out, "rollouts per task: {}  master seed: {}", self.rollouts, self.master_seed);
        let _ = write!(out, "{:<6}", "");
        for n in &names {
            let _ = write!(out, " {n:>width$}");
        }
        let _ = writeln!(out, " {:>9}", "Avg. SR");
        let _ = write!(out, "{:<6}", "NE(m)");
        for s in self.scenes.values() {
            let _ = write!(out, " {:>width$.2}", s.mean_ne);
        }
        let _ = writeln!(out, " {:>9}", "");
        let _ = write!(out, "{:<6}", "SR(%)");
        for s in self.scenes.values() {
            let _ = write!(out, " {:>width$.1}", 100.0 * s.sr);
        }
        let _ = writeln!(out, " {:>9.1}", 100.0 * self.avg_sr);
        out
    }
}

/// All rollouts of all tasks; rows come back in (task, rollout) order
/// whatever the execution mode.
pub fn run_suite(suite: &Suite, config: &EvalConfig) -> Result<SuiteRun, EvalError> {
    let backends = Backends::build(config, suite.oracle_table.as_ref())?;
    run_suite_with(suite, config, &backends)
}

pub fn run_suite_with(suite: &Suite, config: &EvalConfig, backends: &Backends) -> Result<SuiteRun, EvalError> {
    let rollouts = config.rollouts.unwrap_or(suite.rollouts);
    if rollouts == 0 {
        return Err(EvalError::InvalidSuite("rollouts must be at least 1".into()));
    }
    let master = config.master_seed.unwrap_or(suite.master_seed);
    let views: BTreeMap<&str, TopDownView> = suite.scenes.iter().map(|(id, s)| (id.as_str(), s.render_top_down(config.mode))).collect();
    let jobs: Vec<(usize, usize)> = (0..suite.tasks.len()).flat_map(|t| (0..rollouts).map(move |r| (t, r))).collect();
    let results = config.exec.map(&jobs, |&(t, r)| {
        let task = &suite.tasks[t];
        let scene = suite.scene_of(task);
        let seed = rollout_seed(&task.id, r, master);
        let start = task.start_poses[r % task.start_poses.len()];
        let ep = run_episode(task, scene, &views[task.scene.as_str()], backends, &config.local, start, seed);
        let row = RolloutRow {
            task_id: task.id.clone(),
            scene_id: task.scene.clone(),
            rollout: r,
            seed,
            ne: ep.ne,
            success: ep.success,
            steps: ep.steps,
            reason: ep.reason,
            error: ep.error,
            trace: None,
        };
        (row, config.keep_traces.then_some(ep.trace))
    });
    let (rows, traces): (Vec<RolloutRow>, Vec<Option<EpisodeTrace>>) = results.into_iter().unzip();
    let (scenes, avg_sr) = aggregate(&rows);
    Ok(SuiteRun {
        result: SuiteResult {
            suite: suite.name.clone(),
            reasoning: backends.reasoning.name(),
            pointing: backends.pointing.name(),
            mode: config.mode,
            master_seed: master,
            rollouts,
            rows,
            scenes,
            avg_sr,
        },
        traces: traces.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    AnnotationMode,
    PointingNoise,
    ContinueThresholdK,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::AnnotationMode => "annotation_mode",
            Self::PointingNoise => "pointing_noise",
            Self::ContinueThresholdK => "continue_threshold_k",
        }
    }

    /// Config for one sweep value, everything else taken from `base`.
    pub fn apply(self, base: &EvalConfig, value: &str) -> Result<EvalConfig, EvalError> {
        let bad = |message: String| EvalError::SweepValue { axis: self.as_str(), value: value.to_string(), message };
        let mut c = base.clone();
        match self {
            Self::AnnotationMode => c.mode = AnnotationMode::from_str(value).map_err(bad)?,
            Self::PointingNoise => {
                let sigma: f64 = value.parse().map_err(|e| bad(format!("{e}")))?;
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(bad("sigma must be finite and non-negative".into()));
                }
                let (p_fp, p_fn) = match base.pointing {
                    PointingSpec::Noisy { p_fp, p_fn, .. } => (p_fp, p_fn),
                    _ => (0.0, 0.0),
                };
                c.pointing = PointingSpec::Noisy { sigma, p_fp, p_fn };
            }
            Self::ContinueThresholdK => c.k = value.parse().map_err(|e| bad(format!("{e}")))?,
        }
        Ok(c)
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "annotation_mode" => Ok(Self::AnnotationMode),
            "pointing_noise" => Ok(Self::PointingNoise),
            "continue_threshold_k" | "k" => Ok(Self::ContinueThresholdK),
            other => Err(format!("unknown sweep axis {other:?} (expected annotation_mode, pointing_noise or continue_threshold_k)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub result: SuiteResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tables serialize");
        s.push('\n');
        s
    }

    pub fn to_text_table(&self) -> String {
        let scenes: Vec<&String> = self.rows.first().map(|r| r.result.scenes.keys().collect()).unwrap_or_default();
        let width = scenes.iter().map(|n| n.len()).max().unwrap_or(0).max(9);
        let vw = self.rows.iter().map(|r| r.value.len()).max().unwrap_or(0).max(self.axis.as_str().len());
        let mut out = String::new();
        let _ = write!(out, "{:<vw$}", self.axis.as_str());
        for n in &scenes {
            let _ = write!(out, " {n:>width$}");
        }
        let _ = writeln!(out, " {:>9} {:>9}", "Avg. SR", "mean NE");
        for row in &self.rows {
            let _ = write!(out, "{:<vw$}", row.value);
            for s in row.result.scenes.values() {
                let _ = write!(out, " {:>width$.1}", 100.0 * s.sr);
            }
            let ne = row.result.rows.iter().map(|r| r.ne).sum::<f64>() / row.result.rows.len().max(1) as f64;
            let _ = writeln!(out, " {:>9.1} {:>9.2}", 100.0 * row.result.avg_sr, ne);
        }
        out
    }
}

/// One suite run per value of the axis.
pub fn sweep(suite: &Suite, axis: SweepAxis, values: &[String], base: &EvalConfig) -> Result<SweepTable, EvalError> {
    let configs = values.iter().map(|v| axis.apply(base, v)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (value, config) in values.iter().zip(configs) {
        let config = EvalConfig { keep_traces: false, ..config };
        rows.push(SweepRow { value: value.clone(), result: run_suite(suite, &config)?.result });
    }
    Ok(SweepTable { axis, rows })
}

/// Writes the traces of a run as `<dir>/<task>_r<rollout>.jsonl` and records
/// the relative paths in the rows.
pub fn write_traces(run: &mut SuiteRun, dir: &Path) -> Result<(), EvalError> {
    fs::create_dir_all(dir).map_err(|e| EvalError::Io { path: dir.display().to_string(), message: e.to_string() })?;
    for (row, trace) in run.result.rows.iter_mut().zip(&run.traces) {
        let name = format!("{}_r{}.jsonl", row.task_id, row.rollout);
        let path: PathBuf = dir.join(&name);
        fs::write(&path, trace.to_jsonl()).map_err(|e| EvalError::Io { path: path.display().to_string(), message: e.to_string() })?;
        row.trace = Some(format!("traces/{name}"));
    }
    Ok(())
}

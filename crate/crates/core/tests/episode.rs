use std::fs;
use std::path::PathBuf;

use longnav::eval::{self, run_episode, Backends, EvalConfig, EvalError, ReasoningSpec, Suite, SweepAxis, Task};
use longnav::geometry::{AgentPose, Point2, Point3};
use longnav::perception::{OraclePointer, PerceptionConfig};
use longnav::policy_global::{Instruction, MissPolicy, OracleEntry, OracleReasoner, OracleTable, StageOne};
use longnav::policy_local::{EpisodeTrace, Event, LocalConfig, TerminateReason};
use longnav::scene::{grid_from_rows, AnnotationMode, Region, Scene, SceneObject};

fn bench(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../bench").join(name)
}

fn rect(id: &str, label: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
    Region {
        id: id.into(),
        polygon: vec![Point2::new(x0, y0), Point2::new(x1, y0), Point2::new(x1, y1), Point2::new(x0, y1)],
        annotation: Some(label.into()),
        parent: None,
    }
}

/// Rooms A (x < 5) and B (x > 5.1) joined by a door near the top wall; the
/// mug sits in B's far corner, out of range from anywhere in A.
fn two_rooms() -> Scene {
    let (w, h) = (120, 50);
    let rows: Vec<String> = (0..h)
        .map(|j| {
            (0..w)
                .map(|i| {
                    let border = i == 0 || j == 0 || i == w - 1 || j == h - 1;
                    let divider = i == 50 && !(2..12).contains(&j);
                    if border || divider { '#' } else { '.' }
                })
                .collect()
        })
        .collect();
    let grid = grid_from_rows(&rows, Point2::new(0.0, 0.0), 0.1).unwrap();
    let mug = SceneObject {
        id: "o1".into(),
        category: "mug".into(),
        position: Point3::new(11.5, 4.5, 0.5),
        extent: Point3::new(0.2, 0.2, 0.2),
        containing_region: Some("rb".into()),
        attributes: vec![],
    };
    let regions = vec![rect("ra", "room a", 0.1, 0.1, 5.0, 4.9), rect("rb", "room b", 5.1, 0.1, 11.9, 4.9)];
    Scene::new("two_rooms", grid, regions, vec![mug]).unwrap()
}

fn table(pattern: &str, keyword: &str) -> OracleTable {
    OracleTable {
        version: None,
        entries: vec![OracleEntry { instruction_pattern: pattern.into(), object_phrase: "mug".into(), region_keyword: keyword.into() }],
    }
}

fn task(instruction: &str) -> Task {
    Task {
        id: "t".into(),
        scene: "two_rooms".into(),
        instruction: Instruction::new(instruction).unwrap(),
        target_object: "o1".into(),
        start_poses: vec![AgentPose::new(1.05, 2.55, 0.0)],
        success_radius: 1.0,
    }
}

fn episode(table: OracleTable, instruction: &str, seed: u64) -> eval::EpisodeResult {
    let scene = two_rooms();
    let view = scene.render_top_down(AnnotationMode::Full);
    let backends = Backends { reasoning: Box::new(OracleReasoner::new(table)), pointing: Box::new(OraclePointer::default()) };
    let local = LocalConfig { perception: PerceptionConfig { max_range: 4.0, ..PerceptionConfig::default() }, step_budget: 2000, ..LocalConfig::default() };
    let t = task(instruction);
    run_episode(&t, &scene, &view, &backends, &local, t.start_poses[0], seed)
}

#[test]
fn wrong_room_continues_k_times_then_switches() {
    for seed in 0..5 {
        let result = episode(table("mug", "room a"), "fetch the mug", seed);
        let fallbacks: Vec<(StageOne, usize)> = result
            .trace
            .events()
            .take_while(|e| !matches!(e, Event::RegionSwitch { .. }))
            .filter_map(|e| match e {
                Event::Fallback { decision, scans_without_detection } => Some((*decision, *scans_without_detection)),
                _ => None,
            })
            .collect();
        assert_eq!(
            fallbacks,
            vec![(StageOne::Continue, 0), (StageOne::Continue, 1), (StageOne::Continue, 2), (StageOne::Switch, 3)],
            "seed {seed}"
        );
        let switch = result.trace.events().find_map(|e| match e {
            Event::RegionSwitch { from, to } => Some((from.clone(), to.clone())),
            _ => None,
        });
        assert_eq!(switch, Some(("ra".to_string(), "rb".to_string())));
        assert!(result.success, "seed {seed}: {:?}", result.reason);
        assert_eq!(result.reason, TerminateReason::Success);
    }
}

#[test]
fn right_room_needs_no_switch() {
    let result = episode(table("mug", "room b"), "fetch the mug", 0);
    assert!(result.success);
    assert!(!result.trace.events().any(|e| matches!(e, Event::RegionSwitch { .. })));
}

#[test]
fn unmatched_instruction_is_tagged() {
    let result = episode(table("stapler", "room a"), "fetch the mug", 0);
    assert!(!result.success);
    assert_eq!(result.reason, TerminateReason::BackendError);
    assert_eq!(result.error.as_deref(), Some("unknown_instruction"));
    // the agent never moved
    assert_eq!(result.steps, 0);
    assert_eq!(result.ne, Point2::new(1.05, 2.55).distance(Point2::new(11.5, 4.5)));
}

#[test]
fn traces_replay_to_the_reported_error() {
    for seed in 0..5 {
        let result = episode(table("mug", "room a"), "fetch the mug", seed);
        let reparsed = EpisodeTrace::from_jsonl(&result.trace.to_jsonl()).unwrap();
        assert_eq!(reparsed, result.trace);
        assert_eq!(reparsed.replay_ne().unwrap(), result.ne);
        let path_steps: usize = reparsed
            .events()
            .map(|e| match e {
                Event::Path { poses } => poses.len() - 1,
                Event::Scan { .. } => 1,
                _ => 0,
            })
            .sum();
        assert_eq!(path_steps, result.steps);
    }
}

fn small_config() -> EvalConfig {
    EvalConfig { rollouts: Some(2), ..EvalConfig::default() }
}

#[test]
fn shrinking_the_radius_never_turns_a_failure_into_a_success() {
    let suite = Suite::load(bench("office.suite")).unwrap();
    let mut previous: Option<Vec<bool>> = None;
    for radius in [1.0, 0.6, 0.3, 0.1] {
        let mut s = suite.clone();
        for t in &mut s.tasks {
            t.success_radius = radius;
        }
        let run = eval::run_suite(&s, &small_config()).unwrap();
        let wins: Vec<bool> = run.result.rows.iter().map(|r| r.success).collect();
        if let Some(prev) = &previous {
            for (k, (&now, &before)) in wins.iter().zip(prev).enumerate() {
                assert!(!now || before, "row {k} succeeded at radius {radius} but not at a larger one");
            }
        }
        previous = Some(wins);
    }
}

#[test]
fn stored_aggregates_match_the_rows() {
    let suite = Suite::load(bench("office.suite")).unwrap();
    let run = eval::run_suite(&suite, &small_config()).unwrap();
    assert!(run.result.is_consistent());
    let mut by_scene = std::collections::BTreeMap::<&str, (usize, usize)>::new();
    for r in &run.result.rows {
        let e = by_scene.entry(&r.scene_id).or_default();
        e.0 += 1;
        e.1 += r.success as usize;
    }
    let avg = by_scene.values().map(|&(n, s)| s as f64 / n as f64).sum::<f64>() / by_scene.len() as f64;
    assert!((avg - run.result.avg_sr).abs() < 1e-12);
    assert_eq!(run.result.rows.len(), suite.tasks.len() * 2);
}

#[test]
fn one_value_sweep_equals_a_plain_run() {
    let suite = Suite::load(bench("office.suite")).unwrap();
    let base = EvalConfig { reasoning: ReasoningSpec::Oracle { miss: MissPolicy::Guess }, ..small_config() };
    let table = eval::sweep(&suite, SweepAxis::AnnotationMode, &["no_map".to_string()], &base).unwrap();
    let direct = eval::run_suite(&suite, &EvalConfig { mode: AnnotationMode::NoMap, ..base }).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert_eq!(table.rows[0].result, direct.result);
}

#[test]
fn bad_sweep_values_are_rejected_before_running() {
    let suite = Suite::load(bench("office.suite")).unwrap();
    let err = eval::sweep(&suite, SweepAxis::PointingNoise, &["1".into(), "-2".into()], &EvalConfig::default()).unwrap_err();
    assert!(matches!(err, EvalError::SweepValue { .. }), "{err}");
}

#[test]
fn malformed_suites_report_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let scene = dir.path().join("s.json");
    fs::write(&scene, two_rooms().to_json()).unwrap();
    let suite = dir.path().join("x.suite");

    fs::write(&suite, r#"{"name": "x", "scenes": ["s.json"], "tasks": [{"id": "t", "scene": "two_rooms"}]}"#).unwrap();
    match Suite::load(&suite) {
        Err(EvalError::Schema { field, .. }) => assert!(field.starts_with("tasks[0]"), "{field}"),
        other => panic!("expected a schema error, got {:?}", other.map(|s| s.name)),
    }

    let body = r#"{"name": "x", "scenes": ["s.json"], "rollouts": 1, "tasks": [
        {"id": "t", "scene": "two_rooms", "instruction": "find it", "target_object": "o9",
         "start_poses": [[1.05, 2.55, 0.0]]}]}"#;
    fs::write(&suite, body).unwrap();
    assert!(matches!(Suite::load(&suite), Err(EvalError::InvalidTask { .. })));

    fs::write(&suite, body.replace("o9", "o1")).unwrap();
    let s = Suite::load(&suite).unwrap();
    assert_eq!(s.tasks[0].success_radius, 1.0);
}

//! Acceptance gate: runs the eight release criteria and prints one PASS/FAIL
//! line per criterion. Run with `-- --nocapture` to see the summary.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use longnav::affordance::{self, AnnotatedFrame, BBox, Instance, RelationConfig, Target, TruthRegion};
use longnav::backend::BackendError;
use longnav::eval::{self, EvalConfig, PointingSpec, ReasoningSpec, Suite, SweepAxis};
use longnav::exec::Execution;
use longnav::geometry::{
    backproject, camera_to_robot, project, robot_to_world, world_to_camera, AgentPose, CameraIntrinsics, CameraPoint, PixelPoint, Point2,
    Point3,
};
use longnav::perception::{Detection, Observation, OraclePointer, PointingBackend, PointingQuery};
use longnav::plot;
use longnav::policy_global::{
    ExplorationQuery, Instruction, MissPolicy, OracleReasoner, OracleTable, ReasoningBackend, RemoteReasoner, StageOne,
};
use longnav::policy_local::{localize_raw, reachable_from, scan_for_target, LocalConfig, StepContext};
use longnav::remote::{RemotePointer, RemoteConfig};
use longnav::scene::{grid_from_rows, AnnotationMode, Region, Scene, SceneObject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn bench(path: &str) -> String {
    format!("{}/../../bench/{path}", env!("CARGO_MANIFEST_DIR"))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ------------------------------------------------------------------ 1

fn oracle_completeness() -> Outcome {
    let suite = Suite::load(bench("office.suite")).map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let run = eval::run_suite(&suite, &EvalConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed().as_secs_f64();
    let r = &run.result;
    ensure(r.rollouts == 10 && r.rows.len() == 500, || format!("expected 50 tasks x 10 rollouts, got {} rows", r.rows.len()))?;
    let worst = r.rows.iter().map(|x| x.ne).fold(0.0, f64::max);
    ensure(r.avg_sr == 1.0, || format!("Avg. SR {:.3}", r.avg_sr))?;
    ensure(worst <= 1.0, || format!("max NE {worst:.3} m"))?;
    ensure(elapsed < 60.0, || format!("took {elapsed:.1} s"))?;
    Ok(format!("Avg. SR 100% over {} rollouts, max NE {worst:.2} m, {elapsed:.1} s", r.rows.len()))
}

// ------------------------------------------------------------------ 2

fn geometry_exactness() -> Outcome {
    let k = CameraIntrinsics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        // pixel -> camera -> pixel
        let p = PixelPoint::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0), rng.random_range(0.1..20.0));
        let back = project(backproject(p, &k).map_err(|e| e.to_string())?, &k).map_err(|e| e.to_string())?.pixel;
        worst = worst.max((back.u - p.u).abs()).max((back.v - p.v).abs()).max((back.d - p.d).abs());

        // camera -> pixel -> camera
        let c = CameraPoint::new(rng.random_range(-5.0..5.0), rng.random_range(-3.0..3.0), rng.random_range(0.1..20.0));
        let again = backproject(project(c, &k).map_err(|e| e.to_string())?.pixel, &k).map_err(|e| e.to_string())?;
        worst = worst.max((again.X - c.X).abs()).max((again.Y - c.Y).abs()).max((again.Z - c.Z).abs());

        // one world point seen from two poses lifts back to the same place
        let world = Point3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(0.0..2.0));
        for _ in 0..2 {
            let bearing = rng.random_range(-PI..PI);
            let dist = rng.random_range(0.5..8.0);
            let (x, y) = (world.x - dist * bearing.cos(), world.y - dist * bearing.sin());
            let pose = AgentPose::new(x, y, bearing + rng.random_range(-0.7..0.7));
            let cam = world_to_camera(world, &pose, 1.0);
            let px = project(cam, &k).map_err(|e| e.to_string())?.pixel;
            let lifted = robot_to_world(camera_to_robot(backproject(px, &k).map_err(|e| e.to_string())?), &pose);
            worst = worst.max(lifted.distance(world.planar()));
        }
    }
    ensure(worst <= 1e-9, || format!("worst error {worst:e}"))?;
    let hand = robot_to_world(Point2::new(2.0, -0.5), &AgentPose::new(1.0, 2.0, FRAC_PI_2));
    ensure((hand.x - 1.5).abs() <= 1e-12 && (hand.y - 4.0).abs() <= 1e-12, || format!("hand case gave {hand:?}"))?;
    Ok(format!("10000 cases, worst error {worst:.1e}; (1,2,pi/2) + (2,-0.5) -> ({:.1}, {:.1})", hand.x, hand.y))
}

// ------------------------------------------------------------------ 3

fn open_room(objects: Vec<SceneObject>) -> Scene {
    let n = 120;
    let rows: Vec<String> = (0..n)
        .map(|j| (0..n).map(|i| if i == 0 || j == 0 || i == n - 1 || j == n - 1 { '#' } else { '.' }).collect())
        .collect();
    let grid = grid_from_rows(&rows, Point2::new(0.0, 0.0), 0.1).expect("grid");
    let room = Region {
        id: "room".into(),
        polygon: vec![Point2::new(0.1, 0.1), Point2::new(11.9, 0.1), Point2::new(11.9, 11.9), Point2::new(0.1, 11.9)],
        annotation: Some("room".into()),
        parent: None,
    };
    Scene::new("open", grid, vec![room], objects).expect("scene")
}

fn localization_accuracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let empty = OracleReasoner::new(OracleTable { version: None, entries: vec![] });
    let instruction = Instruction::new("find it").map_err(|e| e.to_string())?;
    let config = LocalConfig::default();
    let pointer = OraclePointer::default();
    let mut worst: f64 = 0.0;
    for trial in 0..200 {
        let agent = AgentPose::new(6.05, 6.05, rng.random_range(-PI..PI));
        let (r, a) = (rng.random_range(1.0..5.0), rng.random_range(-PI..PI));
        let extent = Point3::new(rng.random_range(0.2..0.6), rng.random_range(0.2..0.6), rng.random_range(0.2..0.6));
        let object = SceneObject {
            id: "o1".into(),
            category: "mug".into(),
            position: Point3::new(6.05 + r * a.cos(), 6.05 + r * a.sin(), rng.random_range(extent.z / 2.0..1.2)),
            extent,
            containing_region: None,
            attributes: vec![],
        };
        let truth = object.position.planar();
        let scene = open_room(vec![object]);
        let view = scene.render_top_down(AnnotationMode::Full);
        let reachable = reachable_from(scene.grid(), scene.grid().cell_of(agent.position()).expect("inside"));
        let ctx = StepContext {
            scene: &scene,
            view: &view,
            instruction: &instruction,
            target_phrase: "mug",
            pointing: &pointer,
            reasoning: &empty,
            config: &config,
            reachable: &reachable,
            seed: trial,
        };
        let (obs, result) = scan_for_target(&agent, &ctx, 0, &mut vec![])
            .map_err(|e| e.to_string())?
            .ok_or_else(|| format!("placement {trial}: target not detected"))?;
        let raw = localize_raw(&result, &obs).map_err(|e| e.to_string())?;
        worst = worst.max(raw.distance(truth));
    }
    ensure(worst <= 0.15, || format!("worst pre-clamp error {worst:.3} m"))?;
    Ok(format!("200 placements within 5 m, worst pre-clamp error {worst:.3} m"))
}

// ------------------------------------------------------------------ 4 and 5

fn per_seed_sr(suite: &Suite, axis: SweepAxis, values: &[&str], base: &EvalConfig, seeds: u64) -> Result<Vec<Vec<f64>>, String> {
    let values: Vec<String> = values.iter().map(|s| s.to_string()).collect();
    let mut out = vec![vec![]; values.len()];
    for seed in 0..seeds {
        let config = EvalConfig { master_seed: Some(seed), rollouts: Some(1), ..base.clone() };
        let table = eval::sweep(suite, axis, &values, &config).map_err(|e| e.to_string())?;
        for (k, row) in table.rows.iter().enumerate() {
            out[k].push(row.result.avg_sr);
        }
    }
    Ok(out)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

fn ablation_directionality() -> Outcome {
    let suite = Suite::load(bench("office.suite")).map_err(|e| e.to_string())?;
    let rooms = OracleTable::load(bench("oracle_table_rooms.json")).map_err(|e| e.to_string())?;
    let base = EvalConfig {
        reasoning: ReasoningSpec::Oracle { miss: MissPolicy::Guess },
        oracle_table: Some(rooms),
        exec: Execution::Parallel,
        ..EvalConfig::default()
    };
    let modes = ["full", "no_room_level", "none", "no_map"];
    let sr = per_seed_sr(&suite, SweepAxis::AnnotationMode, &modes, &base, 20)?;
    let means: Vec<f64> = sr.iter().map(|v| mean_se(v).0).collect();
    let summary = modes.iter().zip(&means).map(|(m, s)| format!("{m} {:.1}%", 100.0 * s)).collect::<Vec<_>>().join(", ");
    ensure(means[1..].iter().all(|m| means[0] > *m), || format!("full is not strictly best: {summary}"))?;
    ensure(means[..3].iter().all(|m| means[3] < *m), || format!("no_map is not strictly worst: {summary}"))?;
    Ok(format!("20 seeds: {summary}"))
}

fn noise_monotonicity() -> Outcome {
    let suite = Suite::load(bench("office.suite")).map_err(|e| e.to_string())?;
    let base = EvalConfig { pointing: PointingSpec::Noisy { sigma: 0.0, p_fp: 0.0, p_fn: 0.0 }, ..EvalConfig::default() };
    let sigmas = ["0", "1", "2", "4", "8"];
    let sr = per_seed_sr(&suite, SweepAxis::PointingNoise, &sigmas, &base, 20)?;
    let stats: Vec<(f64, f64)> = sr.iter().map(|v| mean_se(v)).collect();
    let summary = sigmas.iter().zip(&stats).map(|(s, (m, _))| format!("{s}px {:.1}%", 100.0 * m)).collect::<Vec<_>>().join(", ");
    for w in stats.windows(2) {
        let ((m0, s0), (m1, s1)) = (w[0], w[1]);
        ensure(m1 <= m0 + 2.0 * (s0 * s0 + s1 * s1).sqrt(), || format!("mean SR rises beyond 2 s.e.: {summary}"))?;
    }
    Ok(format!("20 seeds: {summary}"))
}

// ------------------------------------------------------------------ 6

const CATEGORIES: [&str; 5] = ["cup", "book", "lamp", "plant", "laptop"];

fn random_frame(rng: &mut ChaCha8Rng, id: usize) -> AnnotatedFrame {
    let n = rng.random_range(2..7);
    let mut instances = Vec::new();
    for k in 0..n {
        let (w, h) = (rng.random_range(20.0..120.0), rng.random_range(20.0..120.0));
        let (x, y) = (rng.random_range(0.0..640.0 - w), rng.random_range(0.0..480.0 - h));
        let bbox = BBox::new(x, y, x + w, y + h);
        let mask = rng.random_bool(0.4).then(|| {
            let c = bbox.center();
            vec![Point2::new(c.x, y), Point2::new(x + w, c.y), Point2::new(c.x, y + h), Point2::new(x, c.y)]
        });
        instances.push(Instance {
            id: k as u64 + 1,
            category: CATEGORIES[rng.random_range(0..CATEGORIES.len())].into(),
            bbox,
            mask,
            depth: rng.random_bool(0.5).then(|| rng.random_range(0.5..6.0)),
        });
    }
    let mut free_regions = Vec::new();
    for _ in 0..3 {
        let (w, h) = (rng.random_range(20.0..80.0), rng.random_range(20.0..80.0));
        let (x, y) = (rng.random_range(0.0..640.0 - w), rng.random_range(0.0..480.0 - h));
        let b = BBox::new(x, y, x + w, y + h);
        let clear = instances.iter().all(|i| b.x2 <= i.bbox.x1 || i.bbox.x2 <= b.x1 || b.y2 <= i.bbox.y1 || i.bbox.y2 <= b.y1);
        if clear {
            free_regions.push(vec![Point2::new(x, y), Point2::new(x + w, y), Point2::new(x + w, y + h), Point2::new(x, y + h)]);
        }
    }
    AnnotatedFrame { id: format!("f{id:04}"), width: 640, height: 480, instances, free_regions }
}

/// Independent strict point-in-polygon: winding number with boundary points
/// excluded.
fn strictly_inside(poly: &[Point2], p: Point2) -> bool {
    let n = poly.len();
    let mut winding = 0i32;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let cross = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        let within = p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y);
        if cross == 0.0 && within {
            return false;
        }
        if a.y <= p.y {
            if b.y > p.y && cross > 0.0 {
                winding += 1;
            }
        } else if b.y <= p.y && cross < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

fn affordance_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = RelationConfig::default();
    let mut frames = Vec::new();
    let mut samples = Vec::new();
    while samples.len() < 1000 {
        let batch: Vec<AnnotatedFrame> = (0..20).map(|k| random_frame(&mut rng, frames.len() + k)).collect();
        samples.extend(affordance::generate_all(&batch, 6, &cfg, Execution::Parallel).map_err(|e| e.to_string())?);
        frames.extend(batch);
    }
    for s in &samples {
        let frame = frames.iter().find(|f| f.id == s.frame).expect("sample frame exists");
        ensure((5..=8).contains(&s.points.len()), || format!("{}: {} points", s.query, s.points.len()))?;
        ensure(s.points.iter().all(|p| s.truth.contains_strict(*p)), || format!("{}: point outside truth", s.query))?;
        let resolved = affordance::resolve_phrase(frame, &s.query, &cfg).map_err(|e| format!("{}: {e}", s.query))?;
        ensure(resolved == s.target, || format!("{:?} resolved to {resolved:?}, expected {:?}", s.query, s.target))?;
    }

    // accuracy against a recount with the independent containment test
    for case in 0..10_000 {
        let (cx, cy) = (rng.random_range(10..90) as f64, rng.random_range(10..90) as f64);
        let truth = if case % 2 == 0 {
            let (w, h) = (rng.random_range(1..10) as f64, rng.random_range(1..10) as f64);
            TruthRegion::Box(BBox::new(cx - w, cy - h, cx + w, cy + h))
        } else {
            let sides = rng.random_range(3..9);
            let poly: Vec<Point2> = (0..sides)
                .map(|k| {
                    let a = TAU * k as f64 / sides as f64;
                    let r = rng.random_range(2..10) as f64;
                    Point2::new((cx + r * a.cos()).round(), (cy + r * a.sin()).round())
                })
                .collect();
            if longnav::scene::polygon::area(&poly) <= 0.0 || !longnav::scene::polygon::is_simple(&poly) {
                continue;
            }
            TruthRegion::Polygon(poly)
        };
        let poly: Vec<Point2> = match &truth {
            TruthRegion::Box(b) => vec![Point2::new(b.x1, b.y1), Point2::new(b.x2, b.y1), Point2::new(b.x2, b.y2), Point2::new(b.x1, b.y2)],
            TruthRegion::Polygon(p) => p.clone(),
        };
        let preds: Vec<Point2> = (0..rng.random_range(1..12))
            .map(|_| match rng.random_range(0..3) {
                // vertices and edge midpoints probe the boundary rule
                0 => poly[rng.random_range(0..poly.len())],
                1 => {
                    let k = rng.random_range(0..poly.len());
                    let (a, b) = (poly[k], poly[(k + 1) % poly.len()]);
                    Point2::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0)
                }
                _ => Point2::new(cx + rng.random_range(-12.0..12.0), cy + rng.random_range(-12.0..12.0)),
            })
            .collect();
        let expected = preds.iter().filter(|p| strictly_inside(&poly, **p)).count() as f64 / preds.len() as f64;
        let got = affordance::accuracy(&preds, &truth).map_err(|e| e.to_string())?;
        ensure(got == expected, || format!("case {case}: accuracy {got} vs recount {expected}"))?;
    }
    let objects = samples.iter().filter(|s| matches!(s.target, Target::Instance(_))).count();
    Ok(format!("{} samples ({objects} object, {} spatial) from {} frames; 10000 accuracy recounts", samples.len(), samples.len() - objects, frames.len()))
}

// ------------------------------------------------------------------ 7

fn determinism() -> Outcome {
    let suite = Suite::load(bench("office_5x.suite")).map_err(|e| e.to_string())?;
    let config = EvalConfig {
        master_seed: Some(7),
        pointing: PointingSpec::Noisy { sigma: 2.0, p_fp: 0.05, p_fn: 0.05 },
        keep_traces: true,
        ..EvalConfig::default()
    };
    let a = eval::run_suite(&suite, &config).map_err(|e| e.to_string())?;
    let b = eval::run_suite(&suite, &config).map_err(|e| e.to_string())?;
    let c = eval::run_suite(&suite, &EvalConfig { exec: Execution::Sequential, ..config.clone() }).map_err(|e| e.to_string())?;
    ensure(a.result.to_json() == b.result.to_json(), || "reports differ between identical runs".into())?;
    ensure(a.result.to_json() == c.result.to_json(), || "parallel and sequential reports differ".into())?;
    let jsonl = |r: &eval::SuiteRun| r.traces.iter().map(|t| t.to_jsonl()).collect::<String>();
    ensure(jsonl(&a) == jsonl(&b) && jsonl(&a) == jsonl(&c), || "traces differ".into())?;

    let values: Vec<String> = ["full", "no_map"].iter().map(|s| s.to_string()).collect();
    let guess = EvalConfig { reasoning: ReasoningSpec::Oracle { miss: MissPolicy::Guess }, rollouts: Some(1), ..config.clone() };
    let s1 = eval::sweep(&suite, SweepAxis::AnnotationMode, &values, &guess).map_err(|e| e.to_string())?;
    let s2 = eval::sweep(&suite, SweepAxis::AnnotationMode, &values, &guess).map_err(|e| e.to_string())?;
    ensure(s1.to_json() == s2.to_json(), || "sweep tables differ".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let frames: Vec<AnnotatedFrame> = (0..30).map(|k| random_frame(&mut rng, k)).collect();
    let cfg = RelationConfig::default();
    let d1 = affordance::write_samples(&affordance::generate_all(&frames, 7, &cfg, Execution::Parallel).map_err(|e| e.to_string())?);
    let d2 = affordance::write_samples(&affordance::generate_all(&frames, 7, &cfg, Execution::Sequential).map_err(|e| e.to_string())?);
    ensure(d1 == d2, || "datasets differ".into())?;

    let p1 = plot::render_svg(&a.traces[0]).map_err(|e| e.to_string())?;
    let reparsed = longnav::policy_local::EpisodeTrace::from_jsonl(&a.traces[0].to_jsonl()).map_err(|e| e.to_string())?;
    let p2 = plot::render_svg(&reparsed).map_err(|e| e.to_string())?;
    ensure(p1 == p2, || "plots differ".into())?;
    Ok(format!("{} rollouts, sweep, {} dataset bytes and a plot reproduced byte for byte", a.result.rows.len(), d1.len()))
}

// ------------------------------------------------------------------ 8

#[derive(Clone)]
struct Reply {
    status: u16,
    body: String,
    delay_ms: u64,
}

fn chat(content: &str) -> Reply {
    let body = serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string();
    Reply { status: 200, body, delay_ms: 0 }
}

fn raw(status: u16, body: &str) -> Reply {
    Reply { status, body: body.into(), delay_ms: 0 }
}

fn slow(content: &str, delay_ms: u64) -> Reply {
    Reply { delay_ms, ..chat(content) }
}

/// Minimal HTTP/1.1 server answering successive requests with the given
/// replies, one connection per request. Returns the base URL and the
/// captured request texts.
fn stub(replies: Vec<Reply>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let url = format!("http://{}/v1", listener.local_addr().expect("addr"));
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for reply in replies {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    length = v.trim().parse().unwrap_or(0);
                }
                head.push_str(&line);
            }
            let mut body = vec![0u8; length];
            let _ = reader.read_exact(&mut body);
            log.lock().expect("log").push(format!("{head}\r\n{}", String::from_utf8_lossy(&body)));
            thread::sleep(Duration::from_millis(reply.delay_ms));
            let mut stream = reader.into_inner();
            let _ = write!(
                stream,
                "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.status,
                reply.body.len(),
                reply.body
            );
        }
    });
    (url, seen)
}

fn remote_config(url: &str) -> RemoteConfig {
    RemoteConfig { timeout_ms: 400, token_env: "LONGNAV_ACCEPTANCE_TOKEN".into(), ..RemoteConfig::new(url, "stub-model") }
}

fn conformance_scene() -> Scene {
    let rows: Vec<String> = (0..40).map(|_| ".".repeat(80)).collect();
    let grid = grid_from_rows(&rows, Point2::new(0.0, 0.0), 0.1).expect("grid");
    let rect = |x0: f64, x1: f64| vec![Point2::new(x0, 0.0), Point2::new(x1, 0.0), Point2::new(x1, 4.0), Point2::new(x0, 4.0)];
    let regions = vec![
        Region { id: "r1".into(), polygon: rect(0.0, 4.0), annotation: Some("kitchen".into()), parent: None },
        Region { id: "r2".into(), polygon: rect(4.0, 8.0), annotation: Some("office".into()), parent: None },
    ];
    Scene::new("conformance", grid, regions, vec![]).expect("scene")
}

fn observation() -> Observation {
    Observation {
        pose: AgentPose::new(1.0, 1.0, 0.0),
        heading_index: 0,
        n_headings: 12,
        intrinsics: CameraIntrinsics::default(),
        detections: vec![Detection {
            object_id: "o1".into(),
            category: "mug".into(),
            points: vec![PixelPoint::new(320.0, 250.0, 2.5), PixelPoint::new(330.0, 260.0, 2.5)],
            mean_depth: 2.5,
        }],
    }
}

fn remote_conformance() -> Outcome {
    // the token only ever comes from the environment
    std::env::set_var("LONGNAV_ACCEPTANCE_TOKEN", "secret-token");
    let scene = conformance_scene();
    let view = scene.render_top_down(AnnotationMode::Full);
    let instruction = Instruction::new("I want a coffee").map_err(|e| e.to_string())?;
    let obs = observation();
    let query = PointingQuery { target_phrase: "the mug", observation: &obs };
    let mut fixtures = 0;
    let mut check = |name: &str, replies: Vec<Reply>, expect_requests: usize, run: &dyn Fn(&str) -> Result<(), String>| {
        fixtures += replies.len();
        let (url, seen) = stub(replies);
        run(&url).map_err(|e| format!("{name}: {e}"))?;
        // the stub may still be sleeping on a timed-out request
        thread::sleep(Duration::from_millis(20));
        let n = seen.lock().expect("log").len();
        ensure(n == expect_requests, || format!("{name}: {n} requests, expected {expect_requests}"))
    };

    let decide = |url: &str| RemoteReasoner::new(remote_config(url)).map_err(|e| e.to_string());
    let point = |url: &str| RemotePointer::new(remote_config(url)).map_err(|e| e.to_string());

    check("well-formed decision", vec![chat("The kitchen has a coffee machine.\nOBJECT: coffee machine\nREGION: r1")], 1, &|u| {
        let d = decide(u)?.decide(&instruction, &view, 1).map_err(|e| e.to_string())?;
        ensure(d.target_object_phrase == "coffee machine" && d.target_region_id == "r1", || format!("{d:?}"))
    })?;
    check("decision by label", vec![chat("OBJECT: **kettle**\nREGION: Kitchen.")], 1, &|u| {
        let d = decide(u)?.decide(&instruction, &view, 1).map_err(|e| e.to_string())?;
        ensure(d.target_region_id == "r1" && d.target_object_phrase == "kettle", || format!("{d:?}"))
    })?;
    check("malformed then well-formed", vec![chat("I think the kitchen."), chat("OBJECT: mug\nREGION: r2")], 2, &|u| {
        let d = decide(u)?.decide(&instruction, &view, 1).map_err(|e| e.to_string())?;
        ensure(d.target_region_id == "r2", || format!("{d:?}"))
    })?;
    check("unknown region then body not JSON then valid", vec![chat("OBJECT: mug\nREGION: r9"), raw(200, "<html>"), chat("OBJECT: mug\nREGION: r1")], 3, &|u| {
        decide(u)?.decide(&instruction, &view, 1).map(|_| ()).map_err(|e| e.to_string())
    })?;
    check("all malformed", vec![chat("no idea"), chat("REGION: r1"), raw(200, "{\"choices\": []}")], 3, &|u| {
        match decide(u)?.decide(&instruction, &view, 1) {
            Err(BackendError::Malformed { attempts: 3, .. }) => Ok(()),
            other => Err(format!("{other:?}")),
        }
    })?;
    check("http status", vec![raw(503, "{}")], 1, &|u| match decide(u)?.decide(&instruction, &view, 1) {
        Err(BackendError::HttpStatus(503)) => Ok(()),
        other => Err(format!("{other:?}")),
    })?;
    check("timeout", vec![slow("OBJECT: mug\nREGION: r1", 1500)], 1, &|u| {
        let t0 = Instant::now();
        match decide(u)?.decide(&instruction, &view, 1) {
            Err(BackendError::Timeout(400)) if t0.elapsed() < Duration::from_millis(1400) => Ok(()),
            other => Err(format!("{other:?} after {:?}", t0.elapsed())),
        }
    })?;
    check("stage one switch", vec![chat("Nothing here.\nDECISION: SWITCH")], 1, &|u| {
        let q = ExplorationQuery {
            instruction: &instruction,
            target_phrase: "mug",
            view: &view,
            current_region: "r1",
            scans_without_detection: 3,
            regions_tried: &["r1".to_string()],
            position: Point2::new(1.0, 1.0),
        };
        let r = decide(u)?;
        ensure(r.continue_or_switch(&q, 1).map_err(|e| e.to_string())? == StageOne::Switch, || "expected switch".into())
    })?;
    check("stage two tried region then untried", vec![chat("REGION: r1"), chat("REGION: office")], 2, &|u| {
        let q = ExplorationQuery {
            instruction: &instruction,
            target_phrase: "mug",
            view: &view,
            current_region: "r1",
            scans_without_detection: 3,
            regions_tried: &["r1".to_string()],
            position: Point2::new(1.0, 1.0),
        };
        let next = decide(u)?.next_region(&q, 1).map_err(|e| e.to_string())?;
        ensure(next.as_deref() == Some("r2"), || format!("{next:?}"))
    })?;
    check("pointing well-formed", vec![chat("The mug is at (322, 251) and (328.5, 258).")], 1, &|u| {
        let r = point(u)?.point(&query, 1).map_err(|e| e.to_string())?;
        ensure(r.found && r.points.len() == 2 && r.points.iter().all(|p| p.d == 2.5), || format!("{r:?}"))
    })?;
    check("pointing not found", vec![chat("The mug is not visible in this view.")], 1, &|u| {
        let r = point(u)?.point(&query, 1).map_err(|e| e.to_string())?;
        ensure(!r.found, || format!("{r:?}"))
    })?;
    check("pointing out of frame then valid", vec![chat("(900, 20)"), chat("(320, 250)")], 2, &|u| {
        let r = point(u)?.point(&query, 1).map_err(|e| e.to_string())?;
        ensure(r.found && r.points.len() == 1, || format!("{r:?}"))
    })?;
    check("pointing timeout", vec![slow("(320, 250)", 1500)], 1, &|u| match point(u)?.point(&query, 1) {
        Err(BackendError::Timeout(_)) => Ok(()),
        other => Err(format!("{other:?}")),
    })?;

    // wire format: bearer token from the environment, seed, and the image part
    let (url, seen) = stub(vec![chat("OBJECT: mug\nREGION: r1")]);
    decide(&url)?.decide(&instruction, &view, 42).map_err(|e| e.to_string())?;
    let request = seen.lock().expect("log")[0].clone();
    ensure(request.starts_with("POST /v1/chat/completions"), || format!("request line: {}", request.lines().next().unwrap_or("")))?;
    ensure(request.to_ascii_lowercase().contains("authorization: bearer secret-token"), || "missing bearer token".into())?;
    let body: serde_json::Value = serde_json::from_str(request.split("\r\n\r\n").nth(1).unwrap_or("")).map_err(|e| e.to_string())?;
    ensure(body["model"] == "stub-model" && body["temperature"] == 0, || format!("body {body}"))?;
    let has_image = body["messages"][1]["content"].as_array().is_some_and(|c| {
        c.iter().any(|p| p["image_url"]["url"].as_str().is_some_and(|u| u.starts_with("data:image/png;base64,")))
    });
    ensure(has_image, || "decision request lacks the map image".into())?;
    Ok(format!("{} reply fixtures across 13 scenarios plus a wire-format check", fixtures + 1))
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 8] = [
        ("oracle completeness", oracle_completeness),
        ("geometry exactness", geometry_exactness),
        ("localization accuracy", localization_accuracy),
        ("ablation directionality", ablation_directionality),
        ("noise monotonicity", noise_monotonicity),
        ("affordance pipeline fidelity", affordance_fidelity),
        ("determinism", determinism),
        ("remote-backend conformance", remote_conformance),
    ];
    let mut failed = Vec::new();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(detail) => {
                println!("criterion {} {name}: FAIL ({detail})", k + 1);
                failed.push(k + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

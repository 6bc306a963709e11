//! Writes the bundled benchmark: five office scenes, ten tasks each, the
//! oracle tables and the suite files.
//!
//! ```text
//! cargo run -p longnav-core --example make_bench -- bench
//! ```

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use longnav::geometry::{wrap_angle, AgentPose, Point2, Point3};
use longnav::policy_local::reachable_from;
use longnav::scene::{Cell, OccupancyGrid, Region, Scene, SceneObject};
use longnav::seed::SeedHasher;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const W: f64 = 14.0;
const H: f64 = 10.0;
const CS: f64 = 0.2;
const HALL: (f64, f64) = (4.4, 5.6);
const WALL: f64 = 0.2;

struct RoomSpec {
    label: &'static str,
    sub: Option<&'static str>,
}

struct TaskSpec {
    instruction: &'static str,
    category: &'static str,
    /// Label of the region the target is placed in.
    region: &'static str,
}

struct SceneSpec {
    id: &'static str,
    top: (&'static [f64], [RoomSpec; 3]),
    bottom: (&'static [f64], Vec<RoomSpec>),
    tasks: [TaskSpec; 10],
}

const fn room(label: &'static str, sub: Option<&'static str>) -> RoomSpec {
    RoomSpec { label, sub }
}

const fn task(instruction: &'static str, category: &'static str, region: &'static str) -> TaskSpec {
    TaskSpec { instruction, category, region }
}

fn specs() -> Vec<SceneSpec> {
    vec![
        SceneSpec {
            id: "meeting_a",
            top: (&[0.0, 5.0, 9.5, 14.0], [
                room("conference room", Some("presentation area")),
                room("tea room", Some("coffee corner")),
                room("lounge", Some("reading nook")),
            ]),
            bottom: (&[0.0, 7.0, 14.0], vec![room("copy room", None), room("storage room", None)]),
            tasks: [
                task("I want a cup of coffee", "coffee machine", "coffee corner"),
                task("I need to print my slides before the meeting", "printer", "copy room"),
                task("Show the quarterly slides to the team", "projector", "presentation area"),
                task("I would like to read a magazine while I wait", "magazine rack", "reading nook"),
                task("Make me a pot of green tea", "kettle", "tea room"),
                task("I am tired and want to lie down for a bit", "sofa", "lounge"),
                task("Staple these handouts together", "stapler", "copy room"),
                task("Someone spilled water, clean the floor", "mop bucket", "storage room"),
                task("Sketch the plan so everyone can see it", "whiteboard", "conference room"),
                task("Throw away this empty bottle", "recycling bin", "hallway"),
            ],
        },
        SceneSpec {
            id: "meeting_b",
            top: (&[0.0, 4.5, 9.0, 14.0], [
                room("meeting room", Some("whiteboard wall")),
                room("phone booth", None),
                room("pantry", Some("snack counter")),
            ]),
            bottom: (&[0.0, 6.0, 10.0, 14.0], vec![room("office", None), room("supply closet", None), room("quiet room", None)]),
            tasks: [
                task("I am hungry, grab me a snack", "snack box", "snack counter"),
                task("Write down the agenda for everyone", "flip chart", "whiteboard wall"),
                task("I need to make a private call", "desk phone", "phone booth"),
                task("Warm up my lunch", "microwave", "pantry"),
                task("Get me a fresh notebook", "notebook stack", "supply closet"),
                task("Check the team calendar on the wall", "wall calendar", "office"),
                task("I want to meditate somewhere calm", "yoga mat", "quiet room"),
                task("Plug in my laptop, the battery is dead", "power strip", "meeting room"),
                task("Put this milk in the fridge", "fridge", "pantry"),
                task("Water the plants along the corridor", "watering can", "hallway"),
            ],
        },
        SceneSpec {
            id: "tea_room",
            top: (&[0.0, 5.0, 10.0, 14.0], [
                room("tea room", Some("tea bar")),
                room("dining room", None),
                room("cloak room", None),
            ]),
            bottom: (&[0.0, 4.5, 9.5, 14.0], vec![
                room("kitchen", Some("spice shelf")),
                room("lounge", Some("window seats")),
                room("store room", None),
            ]),
            tasks: [
                task("Brew me some oolong tea", "tea pot", "tea bar"),
                task("Set the table for dinner", "plate stack", "dining room"),
                task("Hang up my coat", "coat rack", "cloak room"),
                task("Boil some water for pasta", "stove", "kitchen"),
                task("I need some pepper for the soup", "pepper grinder", "spice shelf"),
                task("Find a sunny spot to sit", "armchair", "window seats"),
                task("Wash these dirty cups", "sink", "kitchen"),
                task("Get an extra folding chair for a guest", "folding chair", "store room"),
                task("Turn on some music", "radio", "lounge"),
                task("Pick up my umbrella on the way out", "umbrella stand", "hallway"),
            ],
        },
        SceneSpec {
            id: "workstation",
            top: (&[0.0, 6.0, 10.0, 14.0], [
                room("open office", Some("hot desks")),
                room("manager office", None),
                room("server room", None),
            ]),
            bottom: (&[0.0, 4.0, 8.5, 14.0], vec![
                room("mail room", None),
                room("break room", Some("game corner")),
                room("archive", None),
            ]),
            tasks: [
                task("I need a second monitor to work", "monitor", "hot desks"),
                task("Leave this report for the manager", "in-tray", "manager office"),
                task("Restart the network switch", "server rack", "server room"),
                task("Send out this parcel", "postal scale", "mail room"),
                task("Play a round of table tennis", "ping pong table", "game corner"),
                task("Grab a cold drink", "vending machine", "break room"),
                task("Find last year's contracts", "filing cabinet", "archive"),
                task("Charge my phone at my desk", "charging dock", "open office"),
                task("Scan this document", "scanner", "mail room"),
                task("Check the fire extinguisher", "fire extinguisher", "hallway"),
            ],
        },
        SceneSpec {
            id: "balcony",
            top: (&[0.0, 5.5, 10.0, 14.0], [
                room("balcony", Some("smoking area")),
                room("lobby", None),
                room("reception", None),
            ]),
            bottom: (&[0.0, 5.0, 9.0, 14.0], vec![
                room("gallery", None),
                room("garden room", Some("flower bed")),
                room("library", None),
            ]),
            tasks: [
                task("I want some fresh air and a view", "telescope", "balcony"),
                task("Where can I put out my cigarette", "ashtray", "smoking area"),
                task("Let me greet the visitors", "guest book", "reception"),
                task("Wait for my taxi somewhere comfortable", "bench", "lobby"),
                task("Admire the new painting", "easel", "gallery"),
                task("Pick some flowers for the table", "flower pot", "flower bed"),
                task("Water the herbs in the sun", "watering can", "garden room"),
                task("I want to borrow a novel", "bookshelf", "library"),
                task("Print a badge for my visitor", "badge printer", "reception"),
                task("Find a drinking fountain", "water fountain", "hallway"),
            ],
        },
    ]
}

const DISTRACTORS: [&str; 4] = ["chair", "plant", "trash can", "lamp"];

#[derive(Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl Rect {
    fn contains(&self, p: Point2, margin: f64) -> bool {
        p.x >= self.x0 - margin && p.x <= self.x1 + margin && p.y >= self.y0 - margin && p.y <= self.y1 + margin
    }

    fn overlaps(&self, o: &Rect, margin: f64) -> bool {
        self.x0 < o.x1 + margin && o.x0 < self.x1 + margin && self.y0 < o.y1 + margin && o.y0 < self.y1 + margin
    }

    fn polygon(&self) -> Vec<Point2> {
        vec![
            Point2::new(self.x0, self.y0),
            Point2::new(self.x1, self.y0),
            Point2::new(self.x1, self.y1),
            Point2::new(self.x0, self.y1),
        ]
    }
}

struct Layout {
    grid: OccupancyGrid,
    /// (label, rect, parent label)
    regions: Vec<(&'static str, Rect, Option<&'static str>)>,
    furniture: Vec<Rect>,
    /// Door gaps, kept clear of furniture.
    doors: Vec<Rect>,
}

fn fill(grid: &mut OccupancyGrid, r: Rect, occupied: bool) {
    let i0 = (r.x0 / CS).round() as usize;
    let i1 = (r.x1 / CS).round() as usize;
    let j0 = (r.y0 / CS).round() as usize;
    let j1 = (r.y1 / CS).round() as usize;
    for j in j0..j1 {
        for i in i0..i1 {
            grid.set_occupied(Cell::new(i, j), occupied);
        }
    }
}

fn layout(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Layout {
    let mut grid = OccupancyGrid::empty((W / CS).round() as usize, (H / CS).round() as usize, Point2::new(0.0, 0.0), CS).expect("grid");
    for r in [
        Rect { x0: 0.0, y0: 0.0, x1: W, y1: WALL },
        Rect { x0: 0.0, y0: H - WALL, x1: W, y1: H },
        Rect { x0: 0.0, y0: 0.0, x1: WALL, y1: H },
        Rect { x0: W - WALL, y0: 0.0, x1: W, y1: H },
        Rect { x0: 0.0, y0: HALL.0 - WALL, x1: W, y1: HALL.0 },
        Rect { x0: 0.0, y0: HALL.1, x1: W, y1: HALL.1 + WALL },
    ] {
        fill(&mut grid, r, true);
    }
    let mut regions = vec![("hallway", Rect { x0: WALL, y0: HALL.0, x1: W - WALL, y1: HALL.1 }, None)];
    let mut doors = vec![];
    let mut furniture = vec![];
    let rows: [(&[f64], &[RoomSpec], bool); 2] = [(spec.top.0, &spec.top.1, true), (spec.bottom.0, &spec.bottom.1, false)];
    for (splits, rooms, top) in rows {
        assert_eq!(splits.len(), rooms.len() + 1);
        let (y0, y1) = if top { (HALL.1 + WALL, H - WALL) } else { (WALL, HALL.0 - WALL) };
        for (k, room) in rooms.iter().enumerate() {
            let (a, b) = (splits[k], splits[k + 1]);
            if k > 0 {
                fill(&mut grid, Rect { x0: a - WALL / 2.0, y0, x1: a + WALL / 2.0, y1 }, true);
            }
            let x0 = if k == 0 { WALL } else { a + WALL / 2.0 };
            let x1 = if k + 1 == rooms.len() { W - WALL } else { b - WALL / 2.0 };
            let rect = Rect { x0, y0, x1, y1 };
            regions.push((room.label, rect, None));

            let door_x = (rng.random_range(x0 + 0.9..x1 - 0.9) * 10.0).round() / 10.0;
            let (wy0, wy1) = if top { (HALL.1, HALL.1 + WALL) } else { (HALL.0 - WALL, HALL.0) };
            fill(&mut grid, Rect { x0: door_x - 0.5, y0: wy0, x1: door_x + 0.5, y1: wy1 }, false);
            let approach = if top { Rect { x0: door_x - 0.8, y0, x1: door_x + 0.8, y1: y0 + 1.4 } } else { Rect { x0: door_x - 0.8, y0: y1 - 1.4, x1: door_x + 0.8, y1 } };
            doors.push(approach);

            let mut sub_rect = None;
            if let Some(sub) = room.sub {
                // far corner from the hallway, side picked at random
                let (sw, sh) = (2.2, 1.8);
                let left = rng.random_bool(0.5);
                let (sx0, sx1) = if left { (x0, x0 + sw) } else { (x1 - sw, x1) };
                let (sy0, sy1) = if top { (y1 - sh, y1) } else { (y0, y0 + sh) };
                let r = Rect { x0: sx0, y0: sy0, x1: sx1, y1: sy1 };
                regions.push((sub, r, Some(room.label)));
                sub_rect = Some(r);
            }

            // one table, clear of walls, door and sub-area
            for _ in 0..1000 {
                let (tw, th) = if rng.random_bool(0.5) { (1.2, 0.8) } else { (0.8, 1.2) };
                if x1 - x0 < tw + 2.0 {
                    break;
                }
                let tx = (rng.random_range(x0 + 1.0..x1 - 1.0 - tw) * 10.0).round() / 10.0;
                let ty = (rng.random_range(y0 + 1.0..y1 - 1.0 - th) * 10.0).round() / 10.0;
                let t = Rect { x0: tx, y0: ty, x1: tx + tw, y1: ty + th };
                if t.overlaps(&approach, 0.2) || sub_rect.is_some_and(|s| t.overlaps(&s, 0.6)) {
                    continue;
                }
                fill(&mut grid, t, true);
                furniture.push(t);
                break;
            }
        }
    }
    Layout { grid, regions, furniture, doors }
}

fn region_id(scene: &str, label: &str) -> String {
    format!("r{:04x}", SeedHasher::new().str(scene).str(label).finish() & 0xffff)
}

fn footprint_clear(grid: &OccupancyGrid, center: Point2, half: Point2, margin: f64) -> bool {
    let lo = Point2::new(center.x - half.x - margin, center.y - half.y - margin);
    let hi = Point2::new(center.x + half.x + margin, center.y + half.y + margin);
    let mut y = lo.y;
    while y <= hi.y + 1e-9 {
        let mut x = lo.x;
        while x <= hi.x + 1e-9 {
            if !grid.is_free_point(Point2::new(x, y)) {
                return false;
            }
            x += CS / 2.0;
        }
        y += CS / 2.0;
    }
    true
}

/// Fraction of the region's free cells with line of sight to the object and
/// within 10 m of it.
fn visibility(scene: &Scene, region: &str, object: &SceneObject) -> f64 {
    let cells = scene.region_free_cells(region).expect("region exists");
    let seen = cells
        .iter()
        .filter(|c| {
            let p = scene.grid().cell_center(**c);
            p.distance(object.position.planar()) <= 10.0 && scene.line_of_sight_to_object(p, object).unwrap_or(false)
        })
        .count();
    seen as f64 / cells.len() as f64
}

struct Built {
    scene: Scene,
    tasks: Vec<serde_json::Value>,
    full: Vec<serde_json::Value>,
    rooms_only: Vec<serde_json::Value>,
}

fn build(spec: &SceneSpec) -> Built {
    let mut rng = ChaCha8Rng::seed_from_u64(SeedHasher::new().str("bench").str(spec.id).finish());
    let lay = layout(spec, &mut rng);
    let grid = lay.grid.clone();
    let regions: Vec<Region> = lay
        .regions
        .iter()
        .map(|(label, rect, parent)| Region {
            id: region_id(spec.id, label),
            polygon: rect.polygon(),
            annotation: Some(label.to_string()),
            parent: parent.map(|p| region_id(spec.id, p)),
        })
        .collect();
    let rect_of = |label: &str| lay.regions.iter().find(|(l, _, _)| *l == label).map(|(_, r, _)| *r).expect("known label");
    let parent_of = |label: &str| lay.regions.iter().find(|(l, _, _)| *l == label).and_then(|(_, _, p)| *p);
    let subs: Vec<Rect> = lay.regions.iter().filter(|(_, _, p)| p.is_some()).map(|(_, r, _)| *r).collect();

    let mut objects: Vec<SceneObject> = vec![];
    let mut target_ids = vec![];
    for (k, t) in spec.tasks.iter().enumerate() {
        let rect = rect_of(t.region);
        let is_sub = parent_of(t.region).is_some();
        // keep the best-visible candidate; accept early once it is good enough
        let good = if t.region == "hallway" { 0.6 } else { 0.85 };
        let mut best: Option<(f64, SceneObject)> = None;
        for _ in 0..3000 {
            let ex = (rng.random_range(0.3..0.6) * 20.0_f64).round() / 20.0;
            let ey = (rng.random_range(0.3..0.6) * 20.0_f64).round() / 20.0;
            let ez = (rng.random_range(0.2..0.6) * 20.0_f64).round() / 20.0;
            let z = if t.category == "yoga mat" { 0.05 } else { (rng.random_range(0.4..1.1) * 20.0_f64).round() / 20.0 };
            let m = 0.35 + ex.max(ey) / 2.0;
            if rect.x1 - rect.x0 <= 2.0 * m || rect.y1 - rect.y0 <= 2.0 * m {
                continue;
            }
            let x = (rng.random_range(rect.x0 + m..rect.x1 - m) * 20.0).round() / 20.0;
            let y = (rng.random_range(rect.y0 + m..rect.y1 - m) * 20.0).round() / 20.0;
            let p = Point2::new(x, y);
            if !footprint_clear(&grid, p, Point2::new(ex / 2.0, ey / 2.0), 0.25) {
                continue;
            }
            if !is_sub && subs.iter().any(|s| s.contains(p, 0.4)) {
                continue;
            }
            if lay.doors.iter().any(|d| d.contains(p, 0.3)) || objects.iter().any(|o| o.position.planar().distance(p) < 1.2) {
                continue;
            }
            let obj = SceneObject {
                id: String::new(),
                category: t.category.to_string(),
                position: Point3::new(x, y, z.max(ez / 2.0)),
                extent: Point3::new(ex, ey, ez),
                containing_region: Some(region_id(spec.id, t.region)),
                attributes: vec![],
            };
            let probe = Scene::new(spec.id, grid.clone(), regions.clone(), vec![obj.clone()]).expect("valid probe scene");
            let mut score = visibility(&probe, &region_id(spec.id, t.region), &obj);
            if is_sub {
                let parent = region_id(spec.id, parent_of(t.region).expect("sub-area"));
                score = score.min(visibility(&probe, &parent, &obj));
            }
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, obj));
            }
            if score >= good {
                break;
            }
        }
        let (score, obj) = best.unwrap_or_else(|| panic!("{}: cannot place {}", spec.id, t.category));
        assert!(score >= 0.6, "{}: {} visible from only {:.0}% of its region", spec.id, t.category, score * 100.0);
        target_ids.push(k);
        objects.push(obj);
    }
    // distractors: chairs by the tables, a plant and a lamp in the hallway
    let mut extras = vec![];
    for t in &lay.furniture {
        let p = Point2::new(t.x0 - 0.35, (t.y0 + t.y1) / 2.0);
        if footprint_clear(&grid, p, Point2::new(0.2, 0.2), 0.05) && objects.iter().all(|o| o.position.planar().distance(p) > 0.8) {
            extras.push(("chair", p, 0.45, 0.45));
        }
    }
    for (cat, _) in DISTRACTORS.iter().skip(1).zip(0..) {
        for _ in 0..1000 {
            let p = Point2::new(rng.random_range(1.0..W - 1.0), rng.random_range(HALL.0 + 0.3..HALL.1 - 0.3));
            let p = Point2::new((p.x * 10.0).round() / 10.0, (p.y * 20.0).round() / 20.0);
            if objects.iter().all(|o| o.position.planar().distance(p) > 1.5)
                && extras.iter().all(|(_, q, _, _)| q.distance(p) > 1.5)
                && footprint_clear(&grid, p, Point2::new(0.15, 0.15), 0.05)
            {
                extras.push((cat, p, 0.3, 0.3));
                break;
            }
        }
    }
    for (cat, p, ex, ez) in extras {
        assert!(spec.tasks.iter().all(|t| t.category != cat));
        objects.push(SceneObject {
            id: String::new(),
            category: cat.to_string(),
            position: Point3::new(p.x, p.y, ez / 2.0),
            extent: Point3::new(ex, ex, ez),
            containing_region: None,
            attributes: vec![],
        });
    }

    // opaque object ids in shuffled order
    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.shuffle(&mut rng);
    for (n, &k) in order.iter().enumerate() {
        objects[k].id = format!("o{:02}", n + 1);
    }
    let mut regions = regions;
    regions.sort_by(|a, b| a.id.cmp(&b.id));
    let scene = Scene::new(spec.id, grid.clone(), regions, objects.clone()).expect("generated scene is valid");

    let reach = reachable_from(&grid, grid.cell_of(Point2::new(1.0, 5.0)).expect("hallway cell"));
    let free: Vec<Cell> = grid.free_cells().filter(|c| reach[grid.index(*c)]).collect();
    let mut tasks = vec![];
    let mut full = vec![];
    let mut rooms_only = vec![];
    for (k, t) in spec.tasks.iter().enumerate() {
        let target = &objects[target_ids[k]];
        let room_label = parent_of(t.region).unwrap_or(t.region);
        let room_rect = rect_of(room_label);
        let mut starts = vec![];
        while starts.len() < 5 {
            let c = free[rng.random_range(0..free.len())];
            let p = grid.cell_center(c);
            if p.distance(target.position.planar()) < 4.0 || room_rect.contains(p, 0.0) {
                continue;
            }
            if !footprint_clear(&grid, p, Point2::new(0.0, 0.0), 0.25) {
                continue;
            }
            let heading = wrap_angle((rng.random_range(0..8) as f64) * PI / 4.0);
            starts.push(AgentPose::new(p.x, p.y, heading));
        }
        tasks.push(json!({
            "id": format!("{}_{:02}", spec.id, k + 1),
            "scene": spec.id,
            "instruction": t.instruction,
            "target_object": target.id,
            "start_poses": starts,
            "success_radius": 1.0,
        }));
        full.push(json!({"instruction_pattern": t.instruction.to_lowercase(), "object_phrase": t.category, "region_keyword": t.region}));
        rooms_only.push(json!({"instruction_pattern": t.instruction.to_lowercase(), "object_phrase": t.category, "region_keyword": room_label}));
    }
    Built { scene, tasks, full, rooms_only }
}

fn write_json(path: &Path, v: &serde_json::Value) {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    fs::write(path, s).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
}

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "bench".into());
    let out = Path::new(&out);
    fs::create_dir_all(out.join("scenes")).expect("create output dir");
    let mut scene_paths = vec![];
    let mut tasks = vec![];
    let mut full = vec![];
    let mut rooms = vec![];
    for spec in specs() {
        let b = build(&spec);
        let rel = format!("scenes/{}.json", spec.id);
        b.scene.save(out.join(&rel)).expect("write scene");
        scene_paths.push(rel);
        tasks.extend(b.tasks);
        full.extend(b.full);
        rooms.extend(b.rooms_only);
        println!("{}: {} regions, {} objects", spec.id, b.scene.regions().len(), b.scene.objects().len());
    }
    let patterns: Vec<String> = full.iter().map(|e| e["instruction_pattern"].as_str().expect("str").to_string()).collect();
    for (a, pa) in patterns.iter().enumerate() {
        for (b, pb) in patterns.iter().enumerate() {
            assert!(a == b || !pa.contains(pb.as_str()), "pattern {pb:?} shadows {pa:?}");
        }
    }
    write_json(&out.join("oracle_table.json"), &json!({"version": 1, "entries": full}));
    write_json(&out.join("oracle_table_rooms.json"), &json!({"version": 1, "entries": rooms}));
    for (name, rollouts) in [("office.suite", 10), ("office_5x.suite", 5)] {
        write_json(
            &out.join(name),
            &json!({
                "version": 1,
                "name": name.trim_end_matches(".suite"),
                "scenes": scene_paths,
                "oracle_table": "oracle_table.json",
                "rollouts": rollouts,
                "master_seed": 0,
                "tasks": tasks,
            }),
        );
    }
    println!("{} tasks written to {}", tasks.len(), out.display());
}

//! Instruction → (target object phrase, target region) reasoning, and the
//! first waypoint handed to the local policy.

use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::geometry::Point2;
use crate::remote::{excerpt, ChatClient, Part, RemoteConfig};
use crate::scene::{parse_error_parts, polygon, Scene, SceneError, TopDownView};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("instruction text is empty")]
    EmptyInstruction,
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("oracle table line {line}, column {column}, field `{field}`: {message}")]
    Table { line: usize, column: usize, field: String, message: String },
    #[error("backend chose region {0:?}, which is not in the view")]
    RegionNotInView(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instruction(String);

impl Instruction {
    pub fn new(text: impl Into<String>) -> Result<Self, PolicyError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(PolicyError::EmptyInstruction);
        }
        Ok(Self(text))
    }

    pub fn text(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalDecision {
    pub target_object_phrase: String,
    pub target_region_id: String,
    pub rationale: String,
}

const TEMPLATE: &str = "You need to complete the human instruction: {I}. Now given this top-down scene view {S_global} and several optional regions, please think about what object you should find to complete the instruction and where you should look for this object. Please show your thinking process and give your answer at the end.";

/// The reasoning prompt with the instruction and the view's region list
/// substituted. A trailing period on the instruction is dropped so the
/// template's own period does not double it.
pub fn build_prompt(instruction: &Instruction, view: &TopDownView) -> String {
    let text = instruction.text().trim().trim_end_matches('.');
    TEMPLATE.replace("{I}", text).replace("{S_global}", &view.describe())
}

/// Context for the fallback questions asked after a scan without detection.
#[derive(Debug, Clone)]
pub struct ExplorationQuery<'a> {
    pub instruction: &'a Instruction,
    pub target_phrase: &'a str,
    pub view: &'a TopDownView,
    pub current_region: &'a str,
    /// Misses in the current region before this one.
    pub scans_without_detection: usize,
    pub regions_tried: &'a [String],
    pub position: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOne {
    Continue,
    Switch,
}

/// Reasoning-model role.
pub trait ReasoningBackend: Send + Sync {
    fn decide(&self, instruction: &Instruction, view: &TopDownView, seed: u64) -> Result<GlobalDecision, BackendError>;

    /// Keep exploring the current region or move on.
    fn continue_or_switch(&self, query: &ExplorationQuery<'_>, seed: u64) -> Result<StageOne, BackendError>;

    /// The next region to explore, or `None` when nothing is left.
    fn next_region(&self, query: &ExplorationQuery<'_>, seed: u64) -> Result<Option<String>, BackendError>;

    fn name(&self) -> String;
}

/// Runs the backend and checks the chosen region exists in the view.
pub fn decide(
    backend: &dyn ReasoningBackend,
    instruction: &Instruction,
    view: &TopDownView,
    seed: u64,
) -> Result<GlobalDecision, PolicyError> {
    let d = backend.decide(instruction, view, seed)?;
    if !view.has_region(&d.target_region_id) {
        return Err(PolicyError::RegionNotInView(d.target_region_id));
    }
    Ok(d)
}

/// First waypoint inside the decided region.
pub fn dispatch(decision: &GlobalDecision, scene: &Scene, seed: u64) -> Result<Point2, SceneError> {
    scene.sample_waypoint(&decision.target_region_id, seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleEntry {
    pub instruction_pattern: String,
    pub object_phrase: String,
    pub region_keyword: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleTable {
    #[serde(default)]
    pub version: Option<u32>,
    pub entries: Vec<OracleEntry>,
}

impl OracleTable {
    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let (line, column, field, message) = parse_error_parts(&e);
            PolicyError::Table { line, column, field, message }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PolicyError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text)
    }

    /// First entry whose pattern occurs in the instruction, case-insensitively.
    pub fn lookup(&self, instruction: &Instruction) -> Option<&OracleEntry> {
        let text = instruction.text().to_lowercase();
        self.entries.iter().find(|e| text.contains(&e.instruction_pattern.to_lowercase()))
    }
}

/// What the oracle does when no region label matches the keyword.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissPolicy {
    #[default]
    Error,
    /// Guess: a seeded pick among room-level regions when the view has
    /// geometry, else among all region ids.
    Guess,
}

/// Table-driven reasoning backend.
#[derive(Debug, Clone)]
pub struct OracleReasoner {
    pub table: OracleTable,
    /// Continue while fewer than `k` scans in the region have missed.
    pub k: usize,
    pub miss: MissPolicy,
}

impl OracleReasoner {
    pub fn new(table: OracleTable) -> Self {
        Self { table, k: 3, miss: MissPolicy::Error }
    }

    fn entry(&self, instruction: &Instruction) -> Result<&OracleEntry, BackendError> {
        self.table.lookup(instruction).ok_or_else(|| BackendError::UnknownInstruction(instruction.text().to_string()))
    }

    /// Region ids whose label contains the keyword, in id order.
    fn matching<'v>(view: &'v TopDownView, keyword: &str) -> Vec<&'v str> {
        let keyword = keyword.to_lowercase();
        let mut ids: Vec<&str> = view
            .regions()
            .unwrap_or_default()
            .iter()
            .filter(|r| r.label.as_deref().is_some_and(|l| l.to_lowercase().contains(&keyword)))
            .map(|r| r.id.as_str())
            .collect();
        ids.sort_unstable();
        ids
    }

    /// Candidate set for guesses: room-level regions when parents are visible.
    fn guess_pool(view: &TopDownView) -> Vec<&str> {
        let mut ids: Vec<&str> = match view.regions() {
            Some(rs) => {
                let rooms: Vec<&str> = rs.iter().filter(|r| r.parent.is_none()).map(|r| r.id.as_str()).collect();
                if rooms.is_empty() { view.region_ids() } else { rooms }
            }
            None => view.region_ids(),
        };
        ids.sort_unstable();
        ids
    }
}

impl ReasoningBackend for OracleReasoner {
    fn decide(&self, instruction: &Instruction, view: &TopDownView, seed: u64) -> Result<GlobalDecision, BackendError> {
        let entry = self.entry(instruction)?;
        let region = match Self::matching(view, &entry.region_keyword).first() {
            Some(id) => id.to_string(),
            None => match self.miss {
                MissPolicy::Error => return Err(BackendError::NoRegionMatch(entry.region_keyword.clone())),
                MissPolicy::Guess => {
                    let pool = Self::guess_pool(view);
                    if pool.is_empty() {
                        return Err(BackendError::NoRegionMatch(entry.region_keyword.clone()));
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    pool[rng.random_range(0..pool.len())].to_string()
                }
            },
        };
        Ok(GlobalDecision {
            target_object_phrase: entry.object_phrase.clone(),
            rationale: format!(
                "instruction matches {:?}; look for {} where a region label contains {:?}",
                entry.instruction_pattern, entry.object_phrase, entry.region_keyword
            ),
            target_region_id: region,
        })
    }

    fn continue_or_switch(&self, query: &ExplorationQuery<'_>, _seed: u64) -> Result<StageOne, BackendError> {
        Ok(if query.scans_without_detection < self.k { StageOne::Continue } else { StageOne::Switch })
    }

    fn next_region(&self, query: &ExplorationQuery<'_>, _seed: u64) -> Result<Option<String>, BackendError> {
        let view = query.view;
        let untried = |id: &&str| !query.regions_tried.iter().any(|t| t == id);
        let keyword = self.table.lookup(query.instruction).map(|e| e.region_keyword.as_str());
        if let Some(kw) = keyword {
            if let Some(id) = Self::matching(view, kw).into_iter().find(untried) {
                return Ok(Some(id.to_string()));
            }
        }
        let mut pool: Vec<&str> = Self::guess_pool(view).into_iter().filter(untried).collect();
        if pool.is_empty() {
            let mut rest: Vec<&str> = view.region_ids().into_iter().filter(untried).collect();
            rest.sort_unstable();
            pool = rest;
        }
        if self.miss == MissPolicy::Guess {
            if let Some(regions) = view.regions() {
                // nearest by polygon centroid, id breaks ties
                let dist = |id: &str| {
                    let r = regions.iter().find(|r| r.id == id).expect("pool ids come from the view");
                    query.position.distance(polygon::centroid(&r.polygon))
                };
                pool.sort_by(|a, b| dist(a).total_cmp(&dist(b)).then(a.cmp(b)));
            }
        }
        Ok(pool.first().map(|s| s.to_string()))
    }

    fn name(&self) -> String {
        match self.miss {
            MissPolicy::Error => "oracle".into(),
            MissPolicy::Guess => "oracle(guess)".into(),
        }
    }
}

const ANSWER_SUFFIX: &str = "End your reply with exactly two lines:\nOBJECT: <the object to find>\nREGION: <one region id from the list>";

static OBJECT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?mi)^\s*\**OBJECT\**\s*:\s*(.+?)\s*$").expect("valid regex"));
static REGION_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?mi)^\s*\**REGION\**\s*:\s*(.+?)\s*$").expect("valid regex"));
static DECISION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?mi)^\s*\**DECISION\**\s*:\s*\**\s*(CONTINUE|SWITCH)\b").expect("valid regex"));

fn clean(value: &str) -> &str {
    value.trim_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '`' | '*' | '.'))
}

/// Maps a REGION answer to a view region id: exact id first, then a unique
/// case-insensitive label match.
fn region_from_answer(view: &TopDownView, answer: &str) -> Option<String> {
    let answer = clean(answer);
    if view.has_region(answer) {
        return Some(answer.to_string());
    }
    let lower = answer.to_lowercase();
    let hits: Vec<&str> = view
        .regions()?
        .iter()
        .filter(|r| r.label.as_deref().is_some_and(|l| l.to_lowercase() == lower))
        .map(|r| r.id.as_str())
        .collect();
    (hits.len() == 1).then(|| hits[0].to_string())
}

/// Parses the final `OBJECT:` / `REGION:` block of a reasoning reply.
pub fn parse_decision(text: &str, view: &TopDownView) -> Result<GlobalDecision, String> {
    let object = OBJECT_RE.captures_iter(text).last().map(|c| clean(c.get(1).expect("group").as_str()).to_string());
    let region = REGION_RE.captures_iter(text).last().map(|c| c.get(1).expect("group").as_str().to_string());
    let (Some(object), Some(region)) = (object, region) else {
        return Err(format!("missing OBJECT/REGION lines in {:?}", excerpt(text)));
    };
    if object.is_empty() {
        return Err("empty OBJECT answer".into());
    }
    let Some(region_id) = region_from_answer(view, &region) else {
        return Err(format!("REGION {region:?} is not in the view"));
    };
    let rationale = OBJECT_RE.find(text).map(|m| text[..m.start()].trim().to_string()).unwrap_or_default();
    Ok(GlobalDecision { target_object_phrase: object, target_region_id: region_id, rationale })
}

/// Reasoning backend talking to a chat endpoint.
#[derive(Debug)]
pub struct RemoteReasoner {
    client: ChatClient,
}

impl RemoteReasoner {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        Ok(Self { client: ChatClient::new(config)? })
    }

    fn parts(text: String, view: &TopDownView) -> Vec<Part> {
        let mut parts = vec![Part::Text(text)];
        if let Some(png) = view.to_png() {
            parts.push(Part::Png(png));
        }
        parts
    }

    fn context(query: &ExplorationQuery<'_>) -> String {
        let label = query.view.label(query.current_region).map(|l| format!(" ({l})")).unwrap_or_default();
        format!(
            "Instruction: {}. You are looking for {} in region {}{}. Scans in this region without finding it: {}. Regions already explored: [{}]. Scene regions: {}.",
            query.instruction.text().trim().trim_end_matches('.'),
            query.target_phrase,
            query.current_region,
            label,
            query.scans_without_detection,
            query.regions_tried.join(", "),
            query.view.describe()
        )
    }
}

impl ReasoningBackend for RemoteReasoner {
    fn decide(&self, instruction: &Instruction, view: &TopDownView, seed: u64) -> Result<GlobalDecision, BackendError> {
        let parts = Self::parts(build_prompt(instruction, view), view);
        self.client.complete_parsed(ANSWER_SUFFIX, &parts, seed, |t| parse_decision(t, view))
    }

    fn continue_or_switch(&self, query: &ExplorationQuery<'_>, seed: u64) -> Result<StageOne, BackendError> {
        let text = format!(
            "{} Should you keep exploring this region or switch to another one?",
            Self::context(query)
        );
        let system = "End your reply with one line: DECISION: CONTINUE or DECISION: SWITCH";
        self.client.complete_parsed(system, &[Part::Text(text)], seed, |t| {
            match DECISION_RE.captures_iter(t).last().map(|c| c[1].to_uppercase()) {
                Some(d) if d == "CONTINUE" => Ok(StageOne::Continue),
                Some(_) => Ok(StageOne::Switch),
                None => Err(format!("missing DECISION line in {:?}", excerpt(t))),
            }
        })
    }

    fn next_region(&self, query: &ExplorationQuery<'_>, seed: u64) -> Result<Option<String>, BackendError> {
        let untried: Vec<&str> =
            query.view.region_ids().into_iter().filter(|id| !query.regions_tried.iter().any(|t| t == id)).collect();
        if untried.is_empty() {
            return Ok(None);
        }
        let text = format!(
            "{} Which unexplored region is most likely to contain it? Candidates: [{}].",
            Self::context(query),
            untried.join(", ")
        );
        let system = "End your reply with one line: REGION: <one candidate region id>";
        self.client
            .complete_parsed(system, &Self::parts(text, query.view), seed, |t| {
                let answer = REGION_RE.captures_iter(t).last().map(|c| c[1].to_string());
                let Some(answer) = answer else {
                    return Err(format!("missing REGION line in {:?}", excerpt(t)));
                };
                match region_from_answer(query.view, &answer) {
                    Some(id) if untried.contains(&id.as_str()) => Ok(id),
                    _ => Err(format!("REGION {answer:?} is not an unexplored region")),
                }
            })
            .map(Some)
    }

    fn name(&self) -> String {
        format!("remote({})", self.client.config().model)
    }
}

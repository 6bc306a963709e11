//! Chat-completions client shared by the remote reasoning and pointing
//! backends.
//!
//! Requests are plain HTTP JSON posts to `<endpoint>/chat/completions`; the
//! reply text is read from `choices[0].message.content`. The bearer token, if
//! any, is read from the environment variable named in the config.

use std::sync::LazyLock;
use std::time::Duration;

use base64::Engine;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::backend::BackendError;
use crate::geometry::PixelPoint;
use crate::perception::{Observation, PointingBackend, PointingQuery, PointingResult};

pub const DEFAULT_TOKEN_ENV: &str = "LONGNAV_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL, e.g. `http://127.0.0.1:8000/v1`.
    pub endpoint: String,
    pub model: String,
    pub timeout_ms: u64,
    /// Total attempts for replies that fail to parse.
    pub max_attempts: usize,
    pub token_env: String,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            timeout_ms: 30_000,
            max_attempts: 3,
            token_env: DEFAULT_TOKEN_ENV.into(),
        }
    }
}

/// A message part: text, or a PNG attached as a data URL.
#[derive(Debug, Clone)]
pub enum Part {
    Text(String),
    Png(Vec<u8>),
}

#[derive(Debug)]
pub struct ChatClient {
    config: RemoteConfig,
    agent: ureq::Agent,
    token: Option<String>,
}

impl ChatClient {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        // built without TLS: endpoints are expected on the local network
        if !config.endpoint.starts_with("http://") {
            return Err(BackendError::Config(format!("endpoint must be an http:// URL, got {:?}", config.endpoint)));
        }
        if config.max_attempts == 0 || config.timeout_ms == 0 {
            return Err(BackendError::Config("max_attempts and timeout_ms must be positive".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        Ok(Self { config, agent, token })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.endpoint.trim_end_matches('/'))
    }

    /// One round trip; returns the assistant text.
    pub fn complete(&self, system: &str, user: &[Part], seed: u64) -> Result<String, BackendError> {
        let content: Vec<Value> = user
            .iter()
            .map(|p| match p {
                Part::Text(t) => json!({"type": "text", "text": t}),
                Part::Png(bytes) => {
                    let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
                    json!({"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{b64}")}})
                }
            })
            .collect();
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "seed": seed,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": content},
            ],
        });
        let mut req = self.agent.post(self.url()).header("Content-Type", "application/json");
        if let Some(token) = &self.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send(body.to_string()).map_err(|e| self.transport(e))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(BackendError::HttpStatus(status));
        }
        let text = resp.body_mut().read_to_string().map_err(|e| self.transport(e))?;
        let reply: Value = serde_json::from_str(&text)
            .map_err(|e| BackendError::Malformed { attempts: 1, detail: format!("response body is not JSON: {e}") })?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| BackendError::Malformed { attempts: 1, detail: "missing choices[0].message.content".into() })
    }

    fn transport(&self, e: ureq::Error) -> BackendError {
        match e {
            ureq::Error::Timeout(_) => BackendError::Timeout(self.config.timeout_ms),
            ureq::Error::Io(io) if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) => {
                BackendError::Timeout(self.config.timeout_ms)
            }
            other => BackendError::Transport(other.to_string()),
        }
    }

    /// Calls `complete` and feeds the text to `parse`, retrying parse
    /// failures up to `max_attempts`. Transport errors are not retried.
    pub fn complete_parsed<T>(
        &self,
        system: &str,
        user: &[Part],
        seed: u64,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, BackendError> {
        let mut last = String::new();
        for attempt in 0..self.config.max_attempts {
            let text = match self.complete(system, user, crate::seed::derive(seed, "attempt", attempt as u64)) {
                Ok(t) => t,
                Err(BackendError::Malformed { detail, .. }) => {
                    last = detail;
                    continue;
                }
                Err(e) => return Err(e),
            };
            match parse(&text) {
                Ok(v) => return Ok(v),
                Err(detail) => last = detail,
            }
        }
        Err(BackendError::Malformed { attempts: self.config.max_attempts, detail: last })
    }
}

static PAIR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\(\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\)").expect("valid regex"));
static NOT_FOUND_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(not found|not visible|no such object|cannot find)\b").expect("valid regex"));

/// Extracts `(u, v)` pairs. `Ok(None)` means an explicit not-found answer.
pub fn parse_pixel_pairs(text: &str, width: u32, height: u32) -> Result<Option<Vec<(f64, f64)>>, String> {
    let pairs: Vec<(f64, f64)> = PAIR_RE
        .captures_iter(text)
        .map(|c| (c[1].parse().expect("regex digits"), c[2].parse().expect("regex digits")))
        .collect();
    if pairs.is_empty() {
        return if NOT_FOUND_RE.is_match(text) { Ok(None) } else { Err(format!("no (u, v) pairs in reply {:?}", excerpt(text))) };
    }
    if let Some((u, v)) = pairs.iter().find(|(u, v)| !(*u >= 0.0 && *u < width as f64 && *v >= 0.0 && *v < height as f64)) {
        return Err(format!("point ({u}, {v}) outside the {width}x{height} frame"));
    }
    Ok(Some(pairs))
}

pub(crate) fn excerpt(text: &str) -> String {
    text.chars().take(120).collect()
}

const POINTING_SYSTEM: &str = "You locate objects in images. Answer with pixel coordinates as a list of (u, v) pairs on the object, \
u to the right and v downward from the top-left corner. If the object is not in the image, answer \"not found\".";

/// Pointing backend talking to a chat endpoint.
#[derive(Debug)]
pub struct RemotePointer {
    client: ChatClient,
}

impl RemotePointer {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        Ok(Self { client: ChatClient::new(config)? })
    }
}

/// Egocentric sketch of an observation: detection boxes as grey blocks on
/// white, darker when closer.
pub fn observation_sketch(obs: &Observation) -> Vec<u8> {
    let k = &obs.intrinsics;
    let mut img = image::GrayImage::from_pixel(k.width, k.height, image::Luma([255]));
    for d in &obs.detections {
        let b = d.bbox(k);
        let shade = (40.0 + 20.0 * d.mean_depth).clamp(40.0, 220.0) as u8;
        for v in b.y1.floor() as u32..(b.y2.ceil() as u32).min(k.height) {
            for u in b.x1.floor() as u32..(b.x2.ceil() as u32).min(k.width) {
                img.put_pixel(u, v, image::Luma([shade]));
            }
        }
    }
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

impl PointingBackend for RemotePointer {
    fn point(&self, query: &PointingQuery<'_>, seed: u64) -> Result<PointingResult, BackendError> {
        let obs = query.observation;
        let text = format!("Point to {} in this image.", query.target_phrase.trim());
        let parts = [Part::Text(text), Part::Png(observation_sketch(obs))];
        let (w, h) = (obs.intrinsics.width, obs.intrinsics.height);
        let pairs = self.client.complete_parsed(POINTING_SYSTEM, &parts, seed, |t| parse_pixel_pairs(t, w, h))?;
        let Some(pairs) = pairs else {
            return Ok(PointingResult::not_found());
        };
        let points = pairs
            .into_iter()
            .map(|(u, v)| obs.depth_near(u, v).map(|d| PixelPoint::new(u, v, d)).ok_or(BackendError::NoDepth))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PointingResult::found(points))
    }

    fn name(&self) -> String {
        format!("remote({})", self.client.config().model)
    }
}

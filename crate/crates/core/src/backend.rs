//! Errors shared by reasoning and pointing backends.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out after {0} ms")]
    Timeout(u64),
    #[error("endpoint returned HTTP {0}")]
    HttpStatus(u16),
    #[error("unparseable reply after {attempts} attempt(s): {detail}")]
    Malformed { attempts: usize, detail: String },
    #[error("no depth available for the returned pixels")]
    NoDepth,
    #[error("instruction not covered by the oracle table: {0:?}")]
    UnknownInstruction(String),
    #[error("no region annotation matches {0:?}")]
    NoRegionMatch(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Short stable tag used in traces and reports.
    pub fn tag(&self) -> &'static str {
        match self {
            Self::Transport(_) => "transport",
            Self::Timeout(_) => "timeout",
            Self::HttpStatus(_) => "http_status",
            Self::Malformed { .. } => "malformed_reply",
            Self::NoDepth => "no_depth",
            Self::UnknownInstruction(_) => "unknown_instruction",
            Self::NoRegionMatch(_) => "no_region_match",
            Self::InvalidQuery(_) => "invalid_query",
            Self::Config(_) => "config",
        }
    }
}

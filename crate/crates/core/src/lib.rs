//! Hierarchical long-horizon object navigation in a deterministic simulator.
//!
//! A global policy turns a high-level instruction into a target object phrase
//! and a target region using an annotated top-down view; a local policy
//! explores waypoints in that region, scans panoramically, asks a pointing
//! backend for pixel points on the target and lifts them into a world-frame
//! goal. The [`eval`] module runs seeded benchmark suites over both.

pub mod geometry;
pub mod scene;
pub mod seed;
pub mod affordance;
pub mod exec;
pub mod backend;
pub mod perception;
pub mod remote;
pub mod policy_global;
pub mod policy_local;
pub mod eval;
pub mod plot;

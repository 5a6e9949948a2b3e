//! Benchmark harness around the `rooted_loss` crate: cross-validated
//! linear baselines, spiral networks, curvature diagnostics, and the toy
//! adversarial pair, all driven by TOML configs and replayable manifests.

pub mod config;
pub mod diagnose;
pub mod emit;
pub mod ganbench;
pub mod manifest;
pub mod mlpbench;
pub mod regress;
pub mod sources;
pub mod spiralgen;

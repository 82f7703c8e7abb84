//! Configuration-driven runner around `quenched-core`: INI configs in,
//! CSV/JSON/SVG artifacts out, with deterministic worker-count-independent
//! parallelism.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod model;
pub mod parallel;
pub mod run;
pub mod svg;

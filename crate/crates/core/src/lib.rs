//! Test-time scaling plateau toolkit.
//!
//! Closed-form performance curves `F(N) = f_max (1 - (1 - p_x)^N)` and their
//! saturation point, a Monte Carlo oracle for parallel sampling and sequential
//! rethinking, per-problem estimation from JSONL generation logs, ratio
//! calibration on a validation split, and the metrics used to check
//! predicted against observed saturation.

pub mod cli;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod simulator;

pub use error::{Error, Result};
pub use exec::Execution;
pub use ingest::{GenerationRecord, RecordSet, Strategy};
pub use model::{GainThreshold, SaturationPoint, ScalingModel};

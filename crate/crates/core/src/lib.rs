//! Latency-aware proximity zoning for edge hosts.
//!
//! The crate models the control-plane latency of consuming a service on
//! another edge host, classifies hosts into nested proximity zones around a
//! reference host, and decides whether a consumption request is endorsed,
//! served after relocating the consumer, or rejected.

// `!(x > 0.0)` is the NaN-rejecting form of every positivity guard.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod latency_composer;
pub mod mc_oracle;
pub mod meo_decision;
pub mod par;
pub mod pmf;
pub mod protocol;
pub mod queue_model;
pub mod scenario;
pub mod zoning;

pub use par::Exec;
pub use pmf::{mixture, Pmf, PmfError, Quantile};
pub use queue_model::{
    per_position_delay, qos_feasible, solve_unfinished_work, total_processing_time, ModelError,
    PathModel, PeripheralWait, QosRequirement, SolverConfig, StationaryResult, Weighting,
};

//! Analytical planning models for LLM inference fleet energy efficiency.
//!
//! The crate connects three pieces: a logistic GPU power-vs-concurrency
//! model, a roofline decode-latency model with a KV-cache concurrency
//! ceiling, and a steady-state fleet sizer, then searches routing topologies
//! for the best fleet-level tokens per watt.
//!
//! Topology grid searches evaluate candidates data-parallel on rayon by
//! default; build with `--no-default-features` for the sequential fallback.

// Validation comparisons are written in negated form (`!(x > 0.0)`) so NaN
// inputs fail the checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod error;
mod exec;
pub mod fleet;
pub mod kv;
pub mod perf;
pub mod power;
pub mod tokenomics;
pub mod topology;
pub mod workload;

pub use error::{ModelError, Result};
pub use fleet::{FleetPlan, PoolConfig, PoolPlan, SloSpec};
pub use kv::KvSharding;
pub use perf::{
    build_computed_profile, build_manual_profile, ComputedOptions, GpuProfile, ManualProfileSpec,
    ModelSpec, ProfileKind, WeightQuality,
};
pub use power::{GpuSpec, PowerCurve, Quality};
pub use tokenomics::OperatingPoint;
pub use topology::{GainDecomposition, OptimizeOutcome, Topology, TopologyKind};
pub use workload::{Archetype, ArchetypeParams, ContextCdf, SplitWorkload};

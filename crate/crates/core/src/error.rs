//! Error types shared across the planning models.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    /// An input fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Requested in-flight concurrency exceeds the KV-cache ceiling.
    #[error("concurrency {n_active} exceeds n_max {n_max}")]
    CapacityExceeded { n_active: f64, n_max: u64 },

    /// Model weights do not fit in GPU VRAM at the given sharding.
    #[error("model weights exceed VRAM by {deficit_bytes:.3e} bytes per GPU")]
    InfeasibleModel { deficit_bytes: f64 },

    /// A pool could not be sized against the SLO.
    #[error("pool {label}: {reason}")]
    Sizing { label: String, reason: String },

    /// No feasible candidate in a topology search.
    #[error("optimization failed: {0}")]
    Optimization(String),

    /// Trace ingestion failed at a specific input line.
    #[error("trace line {line}: {reason}")]
    Ingest { line: usize, reason: String },

    /// A topology description violates its own constraints.
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

//! KV-cache geometry: bytes per token, usable KV VRAM, and the concurrency
//! ceiling a context window imposes on a fixed token budget.

use serde::{Deserialize, Serialize};

use crate::perf::ModelSpec;

/// How the KV cache is laid out across a tensor-parallel group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KvSharding {
    /// KV heads divided across TP ranks (at least one head per GPU).
    TpSharded,
    /// Every GPU holds the full set of KV heads.
    Replicated,
}

/// Per-GPU KV geometry derived from a model and a sharding convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KvGeometry {
    pub kappa_bytes_per_token: f64,
    pub kv_vram_bytes: f64,
    pub sharding: KvSharding,
}

/// KV-cache bytes per token per GPU.
///
/// `2 * layers * heads_per_gpu * head_dim * kv_bytes_per_elem`, where the
/// factor 2 covers the key and value tensors. The KV element width follows
/// the cache dtype, which is independent of weight quantization.
pub fn kappa_per_gpu(model: &ModelSpec, sharding: KvSharding, kv_bytes_per_elem: f64) -> f64 {
    let heads_per_gpu = match sharding {
        KvSharding::TpSharded => {
            let tp = model.tp.max(1) as u64;
            (model.kv_heads as u64).div_ceil(tp).max(1)
        }
        KvSharding::Replicated => model.kv_heads as u64,
    };
    2.0 * model.layers as f64 * heads_per_gpu as f64 * model.head_dim as f64 * kv_bytes_per_elem
}

/// Maximum concurrent sequences a KV token budget supports at a context
/// window: `floor(budget / ctx_window)`.
pub fn n_max(kv_token_budget: u64, ctx_window: u64) -> u64 {
    assert!(ctx_window >= 1, "context window must be >= 1");
    kv_token_budget / ctx_window
}

/// Scale a KV token budget by a VRAM ratio, rounding to the nearest token.
pub fn scale_budget(base_budget: u64, vram_ratio: f64) -> u64 {
    assert!(vram_ratio > 0.0, "vram ratio must be > 0");
    (base_budget as f64 * vram_ratio).round() as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf::ModelSpec;

    fn llama70b() -> ModelSpec {
        ModelSpec::new("llama-3.1-70b", 70e9, None, 80, 8, 128, 2.0, 8).unwrap()
    }

    #[test]
    fn kappa_sharded_and_replicated() {
        let m = llama70b();
        // One KV head per GPU under TP=8 with 8 GQA heads.
        assert_eq!(kappa_per_gpu(&m, KvSharding::TpSharded, 2.0), 40_960.0);
        assert_eq!(kappa_per_gpu(&m, KvSharding::Replicated, 2.0), 327_680.0);
    }

    #[test]
    fn kappa_unit_geometry() {
        let m = ModelSpec::new("unit", 1.0, None, 1, 1, 1, 2.0, 1).unwrap();
        assert_eq!(kappa_per_gpu(&m, KvSharding::Replicated, 2.0), 4.0);
    }

    #[test]
    fn kappa_fewer_heads_than_ranks() {
        let m = ModelSpec::new("gqa4", 1e9, None, 10, 4, 64, 2.0, 8).unwrap();
        // max(1, ceil(4/8)) = 1 head per GPU
        assert_eq!(
            kappa_per_gpu(&m, KvSharding::TpSharded, 2.0),
            2.0 * 10.0 * 64.0 * 2.0
        );
    }

    #[test]
    fn n_max_ladder() {
        assert_eq!(n_max(1_048_576, 8_192), 128);
        assert_eq!(n_max(1_048_576, 65_536), 16);
        assert_eq!(n_max(1_048_576, 2_048), 512);
        assert_eq!(n_max(1_000, 2_000), 0);
    }

    #[test]
    fn budget_scaling() {
        let scaled = scale_budget(1_048_576, 2.62);
        assert_eq!(scaled, 2_747_269);
        assert_eq!(n_max(scaled, 8_192), 335);
        assert_eq!(scale_budget(1_048_576, 1.0), 1_048_576);
        // 2K ceiling of the scaled budget is within rounding of the doubled 4K one.
        let n2k = n_max(scaled, 2_048);
        assert!((n2k as i64 - 1_343).unsigned_abs() <= 2, "got {n2k}");
    }
}

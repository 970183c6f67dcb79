//! Roofline decode-latency model and serving profiles.
//!
//! Decode on a memory-bound GPU takes `tau(n, l_mean) = W + H(l_mean) * n`
//! per iteration: a fixed weight-streaming time `W` plus a per-sequence
//! KV-scan overhead that grows linearly with the mean context length.
//! A [`GpuProfile`] bundles the constants of that model with a KV token
//! budget, either calibrated from measurements (`Manual`) or computed from
//! first principles (`Computed`).

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::kv::{self, KvSharding};
use crate::power::{derive_x0, GpuSpec, PowerCurve};

/// Model architecture fields that matter for serving cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub total_params: f64,
    /// Parameters activated per token, set only for MoE models.
    pub active_params: Option<f64>,
    pub layers: u32,
    pub kv_heads: u32,
    pub head_dim: u32,
    /// Bytes per weight: 2 for fp16, 1 for fp8, 0.5 for int4.
    pub bytes_per_param: f64,
    /// Tensor-parallel degree the model is served at.
    pub tp: u32,
}

impl ModelSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        total_params: f64,
        active_params: Option<f64>,
        layers: u32,
        kv_heads: u32,
        head_dim: u32,
        bytes_per_param: f64,
        tp: u32,
    ) -> Result<Self> {
        if let Some(a) = active_params {
            if a > total_params {
                return Err(ModelError::Domain(format!(
                    "active params {a} exceed total {total_params}"
                )));
            }
        }
        if layers < 1 || kv_heads < 1 || tp < 1 {
            return Err(ModelError::Domain(
                "layers, kv_heads and tp must be >= 1".into(),
            ));
        }
        if !(total_params > 0.0) || !(bytes_per_param > 0.0) {
            return Err(ModelError::Domain(
                "param count and width must be > 0".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            total_params,
            active_params,
            layers,
            kv_heads,
            head_dim,
            bytes_per_param,
            tp,
        })
    }

    pub fn is_moe(&self) -> bool {
        self.active_params.is_some()
    }

    /// Weight bytes resident on each GPU of the TP group.
    pub fn weight_bytes_per_gpu(&self) -> f64 {
        self.total_params * self.bytes_per_param / self.tp as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    Manual,
    Computed,
}

/// Whether a weight-stream time is a measured/dense figure or an
/// active-parameter lower bound (MoE dispatch excluded).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightQuality {
    Measured,
    LowerBound,
}

impl WeightQuality {
    pub fn label(&self) -> &'static str {
        match self {
            WeightQuality::Measured => "MEASURED",
            WeightQuality::LowerBound => "LOWER_BOUND",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightStreamTime {
    pub ms: f64,
    pub quality: WeightQuality,
}

/// Per-iteration weight-streaming time in milliseconds.
///
/// Streams `active_params` when present (MoE), else `total_params`; the MoE
/// path is tagged [`WeightQuality::LowerBound`] because expert dispatch is
/// excluded.
pub fn weight_stream_time(
    model: &ModelSpec,
    gpu: &GpuSpec,
    bw_efficiency: f64,
) -> Result<WeightStreamTime> {
    if !(bw_efficiency > 0.0 && bw_efficiency <= 1.0) {
        return Err(ModelError::Domain(format!(
            "bandwidth efficiency must be in (0, 1], got {bw_efficiency}"
        )));
    }
    if !(gpu.mem_bw_bytes_per_s > 0.0) {
        return Err(ModelError::Domain("memory bandwidth must be > 0".into()));
    }
    let (streamed, quality) = match model.active_params {
        Some(a) => (a, WeightQuality::LowerBound),
        None => (model.total_params, WeightQuality::Measured),
    };
    let seconds = streamed * model.bytes_per_param
        / (model.tp as f64 * gpu.mem_bw_bytes_per_s * bw_efficiency);
    Ok(WeightStreamTime {
        ms: seconds * 1e3,
        quality,
    })
}

/// Per-sequence KV-scan overhead at a mean context length, linear in
/// `l_mean`: `H(l_mean) = h0 * l_mean / l_calib`.
pub fn kv_scan_overhead(h0_ms: f64, l_calib: f64, l_mean: f64) -> Result<f64> {
    if !(h0_ms > 0.0 && l_calib > 0.0 && l_mean > 0.0) {
        return Err(ModelError::Domain(format!(
            "kv_scan_overhead requires positive inputs, got h0={h0_ms}, l_calib={l_calib}, l_mean={l_mean}"
        )));
    }
    Ok(h0_ms * l_mean / l_calib)
}

/// The serving operating surface of one GPU + model pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuProfile {
    pub gpu: GpuSpec,
    pub model: ModelSpec,
    /// Power curve used for this profile; may carry a recomputed or fitted
    /// half-saturation point that differs from the catalog entry.
    pub power_curve: PowerCurve,
    pub w_ms: f64,
    pub h0_ms: f64,
    /// Calibration context for `h0_ms`, in tokens.
    pub l_calib: f64,
    /// Tokens of KV cache the TP group can hold after weights and reserve.
    pub kv_token_budget: u64,
    pub kind: ProfileKind,
    pub w_quality: WeightQuality,
    /// Concurrency floored at one sequence even when the budget is exhausted
    /// (explicit opt-in for weight-bound configurations).
    pub min_one_sequence: bool,
}

impl GpuProfile {
    /// Concurrency ceiling at a context window.
    pub fn n_max(&self, ctx_window: u64) -> u64 {
        let n = kv::n_max(self.kv_token_budget, ctx_window);
        if self.min_one_sequence {
            n.max(1)
        } else {
            n
        }
    }

    /// Real-valued concurrency ceiling, ignoring the integer floor.
    pub fn n_max_real(&self, ctx_window: u64) -> f64 {
        self.kv_token_budget as f64 / ctx_window as f64
    }

    /// Per-iteration decode latency `W + H(l_mean) * n` in milliseconds.
    pub fn decode_iteration_latency_ms(&self, n: f64, l_mean: f64) -> Result<f64> {
        if n < 0.0 || n.is_nan() {
            return Err(ModelError::Domain(format!(
                "concurrency must be >= 0, got {n}"
            )));
        }
        if n == 0.0 {
            return Ok(self.w_ms);
        }
        Ok(self.w_ms + kv_scan_overhead(self.h0_ms, self.l_calib, l_mean)? * n)
    }

    /// Decode throughput in tokens per second at concurrency `n`.
    pub fn decode_throughput(&self, n: f64, l_mean: f64) -> Result<f64> {
        if n == 0.0 {
            return Ok(0.0);
        }
        let tau_ms = self.decode_iteration_latency_ms(n, l_mean)?;
        Ok(n * 1e3 / tau_ms)
    }

    /// Power draw at a mean in-flight concurrency, from the profile's curve.
    pub fn power_at(&self, n: f64) -> Result<f64> {
        self.power_curve.power_at(n)
    }

    /// A profile scaled by a KV-budget ratio, the standard construction for
    /// projecting a next-generation part from a calibrated one: the budget
    /// grows by `ratio` and the per-sequence scan cost shrinks by the same
    /// factor, so full-concurrency iteration latency is preserved at every
    /// context window.
    pub fn scaled_by_kv_ratio(&self, ratio: f64) -> GpuProfile {
        let mut p = self.clone();
        p.kv_token_budget = kv::scale_budget(self.kv_token_budget, ratio);
        p.h0_ms = self.h0_ms / ratio;
        p
    }
}

/// Free-function forms of the profile latency model.
pub fn decode_iteration_latency(profile: &GpuProfile, n: f64, l_mean: f64) -> Result<f64> {
    profile.decode_iteration_latency_ms(n, l_mean)
}

pub fn decode_throughput(profile: &GpuProfile, n: f64, l_mean: f64) -> Result<f64> {
    profile.decode_throughput(n, l_mean)
}

/// Inputs for a calibrated profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManualProfileSpec {
    pub w_ms: f64,
    pub h0_ms: f64,
    pub l_calib: f64,
    pub kv_token_budget: u64,
    /// Half-saturation override when the fitted operating curve differs from
    /// the catalog projection.
    pub x0_override: Option<f64>,
}

pub fn build_manual_profile(
    gpu: &GpuSpec,
    model: &ModelSpec,
    spec: ManualProfileSpec,
) -> Result<GpuProfile> {
    if !(spec.w_ms > 0.0 && spec.h0_ms > 0.0 && spec.l_calib > 0.0) {
        return Err(ModelError::Domain(
            "manual profile constants must be positive".into(),
        ));
    }
    let power_curve = match spec.x0_override {
        Some(x0) => gpu.power_curve.with_x0(x0),
        None => gpu.power_curve,
    };
    Ok(GpuProfile {
        gpu: gpu.clone(),
        model: model.clone(),
        power_curve,
        w_ms: spec.w_ms,
        h0_ms: spec.h0_ms,
        l_calib: spec.l_calib,
        kv_token_budget: spec.kv_token_budget,
        kind: ProfileKind::Manual,
        w_quality: WeightQuality::Measured,
        min_one_sequence: false,
    })
}

/// Knobs for the first-principles profile builder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComputedOptions {
    pub bw_efficiency: f64,
    pub vram_reserve_bytes: f64,
    pub sharding: KvSharding,
    /// KV cache element width in bytes; decoupled from weight quantization.
    pub kv_bytes_per_elem: f64,
    /// Additive MoE dispatch cost on top of active-parameter streaming.
    pub moe_dispatch_ms: f64,
    /// Floor n_max at one sequence instead of failing when weights leave no
    /// KV room.
    pub clamp_infeasible: bool,
    pub l_calib: f64,
}

/// 4 GiB activation/workspace reserve per GPU.
pub const DEFAULT_VRAM_RESERVE_BYTES: f64 = 4.0 * 1024.0 * 1024.0 * 1024.0;

impl Default for ComputedOptions {
    fn default() -> Self {
        Self {
            bw_efficiency: 0.777,
            vram_reserve_bytes: DEFAULT_VRAM_RESERVE_BYTES,
            sharding: KvSharding::Replicated,
            kv_bytes_per_elem: 2.0,
            moe_dispatch_ms: 0.0,
            clamp_infeasible: false,
            l_calib: 8192.0,
        }
    }
}

/// Build a profile from hardware and architecture alone.
///
/// `W` comes from weight streaming over effective bandwidth, the KV token
/// budget from VRAM left after weights and reserve, and `H0` from scanning
/// one calibration-length sequence's KV at effective bandwidth. The power
/// curve's half-saturation point is recomputed from the resulting W/H0
/// ratio.
pub fn build_computed_profile(
    gpu: &GpuSpec,
    model: &ModelSpec,
    opts: &ComputedOptions,
) -> Result<GpuProfile> {
    if opts.vram_reserve_bytes < 0.0 {
        return Err(ModelError::Domain("vram reserve must be >= 0".into()));
    }
    let stream = weight_stream_time(model, gpu, opts.bw_efficiency)?;
    let dispatch = if model.is_moe() {
        opts.moe_dispatch_ms
    } else {
        0.0
    };
    let w_ms = stream.ms + dispatch;

    let weights_per_gpu = model.weight_bytes_per_gpu();
    let mut min_one = false;
    if weights_per_gpu > gpu.vram_bytes {
        if !opts.clamp_infeasible {
            return Err(ModelError::InfeasibleModel {
                deficit_bytes: weights_per_gpu - gpu.vram_bytes,
            });
        }
        min_one = true;
    }

    let kappa = kv::kappa_per_gpu(model, opts.sharding, opts.kv_bytes_per_elem);
    let usable = (gpu.vram_bytes - weights_per_gpu - opts.vram_reserve_bytes).max(0.0);
    let kv_token_budget = (usable / kappa).floor() as u64;

    let h0_ms = kappa * opts.l_calib / (gpu.mem_bw_bytes_per_s * opts.bw_efficiency) * 1e3;
    let x0 = derive_x0(w_ms, h0_ms)?;

    Ok(GpuProfile {
        gpu: gpu.clone(),
        model: model.clone(),
        power_curve: gpu.power_curve.with_x0(x0),
        w_ms,
        h0_ms,
        l_calib: opts.l_calib,
        kv_token_budget,
        kind: ProfileKind::Computed,
        w_quality: stream.quality,
        min_one_sequence: min_one,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn weight_stream_dense_70b() {
        let gpu = catalog::gpu("h100-sxm5").unwrap();
        let model = catalog::model("llama-3.1-70b").unwrap();
        let w = weight_stream_time(&model, &gpu, 0.777).unwrap();
        // 140e9 bytes over 8 * 3.35e12 * 0.777 B/s
        assert!((w.ms - 6.72).abs() / 6.72 < 0.002, "got {}", w.ms);
        assert_eq!(w.quality, WeightQuality::Measured);
    }

    #[test]
    fn weight_stream_moe_lower_bound() {
        let gpu = catalog::gpu("h100-sxm5").unwrap();
        let model = ModelSpec::new("a22b", 235e9, Some(22e9), 94, 4, 128, 2.0, 8).unwrap();
        let w = weight_stream_time(&model, &gpu, 1.0).unwrap();
        assert!((w.ms - 1.642).abs() < 0.01, "got {}", w.ms);
        assert_eq!(w.quality, WeightQuality::LowerBound);
    }

    #[test]
    fn weight_stream_fp8_halves() {
        let gpu = catalog::gpu("h100-sxm5").unwrap();
        let mut model = catalog::model("llama-3.1-70b").unwrap();
        model.bytes_per_param = 1.0;
        let w = weight_stream_time(&model, &gpu, 0.777).unwrap();
        assert!((w.ms - 3.36).abs() / 3.36 < 0.002, "got {}", w.ms);
    }

    #[test]
    fn moe_override_noop_when_active_equals_total() {
        let gpu = catalog::gpu("h100-sxm5").unwrap();
        let dense = ModelSpec::new("d", 70e9, None, 80, 8, 128, 2.0, 8).unwrap();
        let moe = ModelSpec::new("m", 70e9, Some(70e9), 80, 8, 128, 2.0, 8).unwrap();
        let wd = weight_stream_time(&dense, &gpu, 0.8).unwrap();
        let wm = weight_stream_time(&moe, &gpu, 0.8).unwrap();
        assert_eq!(wd.ms, wm.ms);
    }

    #[test]
    fn kv_scan_linear_scaling() {
        assert!((kv_scan_overhead(0.1386, 8192.0, 8192.0).unwrap() - 0.1386).abs() < 1e-12);
        assert!((kv_scan_overhead(0.1386, 8192.0, 65536.0).unwrap() - 1.1088).abs() < 1e-9);
        assert!((kv_scan_overhead(0.1386, 8192.0, 2048.0).unwrap() - 0.03465).abs() < 1e-9);
        assert!(kv_scan_overhead(0.0, 8192.0, 1.0).is_err());
    }

    #[test]
    fn decode_latency_and_throughput() {
        let p = catalog::manual_h100_llama70b();
        let tau = p.decode_iteration_latency_ms(128.0, 8192.0).unwrap();
        assert!((tau - 24.4608).abs() < 1e-9);
        assert!((p.decode_iteration_latency_ms(0.0, 8192.0).unwrap() - 6.72).abs() < 1e-12);
        // Full-concurrency invariance: same tau at 2K with 512 sequences.
        let tau2k = p.decode_iteration_latency_ms(512.0, 2048.0).unwrap();
        assert!((tau2k - tau).abs() < 1e-9);
        let thr = p.decode_throughput(128.0, 8192.0).unwrap();
        assert!((thr - 5233.0).abs() / 5233.0 < 1e-3, "got {thr}");
        assert_eq!(p.decode_throughput(0.0, 8192.0).unwrap(), 0.0);
    }

    #[test]
    fn b200_profile_throughput() {
        let p = catalog::manual_b200_llama70b();
        let thr = p.decode_throughput(335.0, 8192.0).unwrap();
        assert!((thr - 13_210.0).abs() / 13_210.0 < 1e-3, "got {thr}");
    }

    #[test]
    fn manual_budget_and_scaling() {
        let p = catalog::manual_h100_llama70b();
        assert_eq!(p.kv_token_budget, 1_048_576);
        assert_eq!(p.n_max(8192), 128);
        let scaled = p.scaled_by_kv_ratio(2.62);
        assert_eq!(scaled.kv_token_budget, 2_747_269);
        // Scaling preserves full-concurrency latency.
        let a = p
            .decode_iteration_latency_ms(p.n_max_real(8192), 8192.0)
            .unwrap();
        let b = scaled
            .decode_iteration_latency_ms(scaled.n_max_real(8192), 8192.0)
            .unwrap();
        // Budget rounding leaves a sub-ppm wobble.
        assert!((a - b).abs() / a < 1e-6);
    }

    #[test]
    fn degenerate_zero_budget() {
        let gpu = catalog::gpu("h100-sxm5").unwrap();
        let model = catalog::model("llama-3.1-70b").unwrap();
        let spec = ManualProfileSpec {
            w_ms: 6.72,
            h0_ms: 0.1386,
            l_calib: 8192.0,
            kv_token_budget: 0,
            x0_override: None,
        };
        let p = build_manual_profile(&gpu, &model, spec).unwrap();
        assert_eq!(p.n_max(2048), 0);
        assert_eq!(p.n_max(65536), 0);
    }

    #[test]
    fn computed_70b_h100() {
        let gpu = catalog::gpu("h100-sxm5").unwrap();
        let model = catalog::model("llama-3.1-70b").unwrap();
        let p = build_computed_profile(&gpu, &model, &ComputedOptions::default()).unwrap();
        // Oracle: (80e9 - 17.5e9 - 4 GiB) / 320 KiB/token, floored per 8K window.
        let usable = 80e9 - 17.5e9 - 4.0 * 1024f64.powi(3);
        let expect = (usable / 327_680.0).floor() as u64 / 8192;
        assert_eq!(p.n_max(8192), expect);
        assert!((p.n_max(8192) as i64 - 22).unsigned_abs() <= 1);
        assert_eq!(p.kind, ProfileKind::Computed);
        // x0 recomputed from the roofline ratio.
        assert!((p.power_curve.x0 - (p.w_ms / p.h0_ms).log2()).abs() < 1e-12);
    }

    #[test]
    fn computed_infeasible_405b() {
        let gpu = catalog::gpu("h100-sxm5").unwrap();
        let model = catalog::model("llama-3.1-405b").unwrap();
        let err = build_computed_profile(&gpu, &model, &ComputedOptions::default()).unwrap_err();
        match err {
            crate::error::ModelError::InfeasibleModel { deficit_bytes } => {
                assert!(deficit_bytes > 20e9, "deficit {deficit_bytes}");
            }
            other => panic!("expected InfeasibleModel, got {other:?}"),
        }
        let clamped = build_computed_profile(
            &gpu,
            &model,
            &ComputedOptions {
                clamp_infeasible: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(clamped.n_max(8192), 1);
        assert_eq!(clamped.n_max(131_072), 1);
    }

    #[test]
    fn moe_dispatch_overhead_erodes_advantage() {
        let gpu = catalog::gpu("h100-sxm5").unwrap();
        let qwen = catalog::model("qwen3-235b-a22b").unwrap();
        let dense = catalog::model("llama-3.1-70b").unwrap();
        let advantage = |dispatch_ms: f64| {
            let opts = ComputedOptions {
                moe_dispatch_ms: dispatch_ms,
                ..Default::default()
            };
            let q = build_computed_profile(&gpu, &qwen, &opts).unwrap();
            let d = build_computed_profile(&gpu, &dense, &opts).unwrap();
            let tokw = |p: &GpuProfile| {
                let n = p.n_max(8192) as f64;
                p.decode_throughput(n, 8192.0).unwrap() / p.power_at(n).unwrap()
            };
            tokw(&q) / tokw(&d)
        };
        let free = advantage(0.0);
        let loaded = advantage(10.0);
        assert!(
            loaded < free,
            "dispatch cost must erode the MoE edge: {loaded} vs {free}"
        );
        // Dense profiles are unaffected by the dispatch knob.
        let opts = ComputedOptions {
            moe_dispatch_ms: 10.0,
            ..Default::default()
        };
        let d0 = build_computed_profile(&gpu, &dense, &ComputedOptions::default()).unwrap();
        let d1 = build_computed_profile(&gpu, &dense, &opts).unwrap();
        assert_eq!(d0.w_ms, d1.w_ms);
    }

    #[test]
    fn computed_determinism() {
        let gpu = catalog::gpu("b200-sxm").unwrap();
        let model = catalog::model("llama-3.1-70b").unwrap();
        let opts = ComputedOptions {
            bw_efficiency: 0.74,
            ..Default::default()
        };
        let a = build_computed_profile(&gpu, &model, &opts).unwrap();
        let b = build_computed_profile(&gpu, &model, &opts).unwrap();
        assert_eq!(a.w_ms.to_bits(), b.w_ms.to_bits());
        assert_eq!(a.h0_ms.to_bits(), b.h0_ms.to_bits());
        assert_eq!(a.kv_token_budget, b.kv_token_budget);
        assert_eq!(a.power_curve.x0.to_bits(), b.power_curve.x0.to_bits());
    }
}

//! Built-in GPU and model catalogs plus the calibrated serving profiles.
//!
//! User-supplied entries merge over the built-ins by name (see the CLI's
//! catalog file format).

use crate::perf::{build_manual_profile, GpuProfile, ManualProfileSpec, ModelSpec};
use crate::power::{GpuSpec, PowerCurve, Quality};

/// Calibrated 70B serving constants for the measured H100 part.
pub const H100_70B_W_MS: f64 = 6.72;
pub const H100_70B_H0_MS: f64 = 0.1386;
pub const H100_70B_KV_BUDGET: u64 = 1_048_576;

/// Projected 70B serving constants for B200, scaled from the H100 profile by
/// the 2.62x KV-budget ratio with bandwidth-fitted stream/scan times.
pub const B200_70B_W_MS: f64 = 2.95;
pub const B200_70B_H0_MS: f64 = 0.0669;
pub const B200_70B_KV_BUDGET: u64 = 2_747_269;
/// Half-saturation point fitted to the B200 operating ladder; the static
/// TDP-fraction catalog entry keeps 6.8, this override matches the projected
/// saturation powers.
pub const B200_70B_X0: f64 = 4.45;

pub const L_CALIB_TOKENS: f64 = 8192.0;

fn curve(p_idle: f64, p_range: f64, k: f64, x0: f64) -> PowerCurve {
    PowerCurve::new(p_idle, p_range, k, x0).expect("static curve")
}

/// The built-in GPU catalog.
pub fn builtin_gpus() -> Vec<GpuSpec> {
    vec![
        GpuSpec::new(
            "h100-sxm5",
            700.0,
            80e9,
            3.35e12,
            curve(300.0, 300.0, 1.0, 4.2),
            32.2,
            Quality::High,
        )
        .expect("static gpu"),
        GpuSpec::new(
            "h200-sxm",
            700.0,
            141e9,
            4.8e12,
            curve(300.0, 300.0, 1.0, 5.5),
            48.0,
            Quality::Fair,
        )
        .expect("static gpu"),
        GpuSpec::new(
            "b200-sxm",
            1000.0,
            180e9,
            8.0e12,
            curve(430.0, 430.0, 1.0, 6.8),
            64.0,
            Quality::Fair,
        )
        .expect("static gpu"),
        GpuSpec::new(
            "gb200-nvl",
            1200.0,
            200e9,
            8.0e12,
            curve(516.0, 516.0, 1.0, 6.8),
            80.0,
            Quality::Fair,
        )
        .expect("static gpu"),
    ]
}

/// The built-in model catalog.
pub fn builtin_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::new("llama-3.1-8b", 8e9, None, 32, 8, 128, 2.0, 1).expect("static model"),
        ModelSpec::new("llama-3.1-70b", 70e9, None, 80, 8, 128, 2.0, 8).expect("static model"),
        ModelSpec::new("llama-3.1-405b", 405e9, None, 126, 8, 128, 2.0, 8).expect("static model"),
        ModelSpec::new("qwen3-235b-a22b", 235e9, Some(22e9), 94, 4, 128, 2.0, 8)
            .expect("static model"),
        // fp8 weights with fp16 KV; effective GQA geometry for the cache.
        ModelSpec::new("deepseek-v3", 671e9, Some(37e9), 61, 32, 128, 1.0, 8)
            .expect("static model"),
    ]
}

pub fn gpu(name: &str) -> Option<GpuSpec> {
    builtin_gpus().into_iter().find(|g| g.name == name)
}

pub fn model(name: &str) -> Option<ModelSpec> {
    builtin_models().into_iter().find(|m| m.name == name)
}

/// Bandwidth efficiency that reproduces measured weight-stream times from
/// nominal HBM bandwidth: 0.777 for Hopper-class parts, 0.74 for
/// Blackwell-class (8 TB/s) parts.
pub fn default_bw_efficiency(gpu: &GpuSpec) -> f64 {
    if gpu.mem_bw_bytes_per_s >= 6.0e12 {
        0.74
    } else {
        0.777
    }
}

/// Merge override entries over a base catalog by name.
pub fn merge_gpus(base: Vec<GpuSpec>, overrides: Vec<GpuSpec>) -> Vec<GpuSpec> {
    let mut out = base;
    for o in overrides {
        match out.iter_mut().find(|g| g.name == o.name) {
            Some(slot) => *slot = o,
            None => out.push(o),
        }
    }
    out
}

pub fn merge_models(base: Vec<ModelSpec>, overrides: Vec<ModelSpec>) -> Vec<ModelSpec> {
    let mut out = base;
    for o in overrides {
        match out.iter_mut().find(|m| m.name == o.name) {
            Some(slot) => *slot = o,
            None => out.push(o),
        }
    }
    out
}

/// Calibrated H100 + Llama-3.1-70B profile (TP=8, fp16, measured power).
pub fn manual_h100_llama70b() -> GpuProfile {
    let gpu = gpu("h100-sxm5").expect("catalog gpu");
    let model = model("llama-3.1-70b").expect("catalog model");
    build_manual_profile(
        &gpu,
        &model,
        ManualProfileSpec {
            w_ms: H100_70B_W_MS,
            h0_ms: H100_70B_H0_MS,
            l_calib: L_CALIB_TOKENS,
            kv_token_budget: H100_70B_KV_BUDGET,
            x0_override: None,
        },
    )
    .expect("static profile")
}

/// Projected B200 + Llama-3.1-70B profile (TP=8, fp16, FAIR quality).
pub fn manual_b200_llama70b() -> GpuProfile {
    let gpu = gpu("b200-sxm").expect("catalog gpu");
    let model = model("llama-3.1-70b").expect("catalog model");
    build_manual_profile(
        &gpu,
        &model,
        ManualProfileSpec {
            w_ms: B200_70B_W_MS,
            h0_ms: B200_70B_H0_MS,
            l_calib: L_CALIB_TOKENS,
            kv_token_budget: B200_70B_KV_BUDGET,
            x0_override: Some(B200_70B_X0),
        },
    )
    .expect("static profile")
}

/// Calibrated profile lookup by `<gpu>/<model>` key.
pub fn manual_profile(gpu_name: &str, model_name: &str) -> Option<GpuProfile> {
    match (gpu_name, model_name) {
        ("h100-sxm5", "llama-3.1-70b") => Some(manual_h100_llama70b()),
        ("b200-sxm", "llama-3.1-70b") => Some(manual_b200_llama70b()),
        _ => None,
    }
}

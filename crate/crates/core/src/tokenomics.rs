//! Single-GPU token-economy analytics: tokens per watt, context sweeps,
//! utilization points, and generation comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::perf::{GpuProfile, WeightQuality};
use crate::power::Quality;

/// One operating point of a profile: concurrency, mean KV length, and the
/// resulting throughput/power/efficiency triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub ctx_window: u64,
    pub n_active: f64,
    pub l_mean: f64,
    pub throughput_tok_s: f64,
    pub power_w: f64,
    /// Output tokens per joule.
    pub tok_per_watt: f64,
}

/// Tokens per watt at an explicit concurrency and mean KV length.
pub fn gpu_tok_per_watt(
    profile: &GpuProfile,
    ctx_window: u64,
    n_active: f64,
    l_mean: f64,
) -> Result<OperatingPoint> {
    if n_active < 0.0 || n_active.is_nan() {
        return Err(ModelError::Domain(format!(
            "n_active must be >= 0, got {n_active}"
        )));
    }
    let n_max = profile.n_max(ctx_window);
    if n_active > n_max as f64 {
        return Err(ModelError::CapacityExceeded { n_active, n_max });
    }
    if l_mean > ctx_window as f64 {
        return Err(ModelError::Domain(format!(
            "l_mean {l_mean} exceeds context window {ctx_window}"
        )));
    }
    let throughput = profile.decode_throughput(n_active, l_mean)?;
    let power = profile.power_at(n_active)?;
    let tok_per_watt = if throughput == 0.0 {
        0.0
    } else {
        throughput / power
    };
    Ok(OperatingPoint {
        ctx_window,
        n_active,
        l_mean,
        throughput_tok_s: throughput,
        power_w: power,
        tok_per_watt,
    })
}

/// Sweep a profile across context windows at full concurrency, with in-flight
/// sequences taken at the window length (the near-capacity reading).
pub fn context_sweep(profile: &GpuProfile, ctx_windows: &[u64]) -> Result<Vec<OperatingPoint>> {
    if ctx_windows.is_empty() {
        return Err(ModelError::Domain(
            "context sweep needs at least one window".into(),
        ));
    }
    ctx_windows
        .iter()
        .map(|&w| {
            let n = profile.n_max(w) as f64;
            gpu_tok_per_watt(profile, w, n, w as f64)
        })
        .collect()
}

/// Ratios of consecutive tok/W values along a doubling ladder of windows.
pub fn halving_ratios(sweep: &[OperatingPoint]) -> Result<Vec<f64>> {
    if sweep.len() < 2 {
        return Err(ModelError::Domain(
            "halving ratios need at least two rows".into(),
        ));
    }
    for pair in sweep.windows(2) {
        if pair[1].ctx_window != 2 * pair[0].ctx_window {
            return Err(ModelError::Domain(format!(
                "windows {} and {} do not form a doubling ladder",
                pair[0].ctx_window, pair[1].ctx_window
            )));
        }
    }
    Ok(sweep
        .windows(2)
        .map(|pair| pair[1].tok_per_watt / pair[0].tok_per_watt)
        .collect())
}

/// Operating point at a utilization fraction: `n_active = floor(rho * n_max)`,
/// with the mean KV length defaulting to the window (worst case).
pub fn utilization_point(
    profile: &GpuProfile,
    ctx_window: u64,
    rho: f64,
    l_mean: Option<f64>,
) -> Result<OperatingPoint> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(ModelError::Domain(format!(
            "utilization must be in [0, 1], got {rho}"
        )));
    }
    let n_active = (rho * profile.n_max(ctx_window) as f64).floor();
    let l = l_mean.unwrap_or(ctx_window as f64);
    gpu_tok_per_watt(profile, ctx_window, n_active, l)
}

/// Tokens per dollar from a throughput and an hourly cost rate.
pub fn tok_per_dollar(point: &OperatingPoint, cost_per_hour: f64) -> Result<f64> {
    if !(cost_per_hour > 0.0) {
        return Err(ModelError::Domain(format!(
            "cost rate must be > 0, got {cost_per_hour}"
        )));
    }
    Ok(point.throughput_tok_s * 3600.0 / cost_per_hour)
}

/// One row of a GPU-generation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub gpu: String,
    pub quality: Quality,
    pub w_ms: f64,
    pub w_quality: WeightQuality,
    pub n_max: u64,
    pub p_sat_w: f64,
    pub tok_per_watt: f64,
    pub tok_per_dollar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationComparison {
    pub ctx_window: u64,
    pub rows: Vec<GenerationRow>,
    /// `multipliers[i][j]` = tok/W of profile i over tok/W of profile j.
    pub multipliers: Vec<Vec<f64>>,
}

/// Compare profiles at full concurrency for one context window.
pub fn compare_generations(
    profiles: &[GpuProfile],
    ctx_window: u64,
) -> Result<GenerationComparison> {
    if profiles.len() < 2 {
        return Err(ModelError::Domain(
            "generation comparison needs at least two profiles".into(),
        ));
    }
    let rows: Vec<GenerationRow> = profiles
        .iter()
        .map(|p| -> Result<GenerationRow> {
            let n = p.n_max(ctx_window);
            let point = gpu_tok_per_watt(p, ctx_window, n as f64, ctx_window as f64)?;
            Ok(GenerationRow {
                gpu: p.gpu.name.clone(),
                quality: p.gpu.quality,
                w_ms: p.w_ms,
                w_quality: p.w_quality,
                n_max: n,
                p_sat_w: point.power_w,
                tok_per_watt: point.tok_per_watt,
                tok_per_dollar: tok_per_dollar(&point, p.gpu.cost_per_hour)?,
            })
        })
        .collect::<Result<_>>()?;
    let multipliers = rows
        .iter()
        .map(|a| {
            rows.iter()
                .map(|b| {
                    if b.tok_per_watt == 0.0 {
                        f64::INFINITY
                    } else {
                        a.tok_per_watt / b.tok_per_watt
                    }
                })
                .collect()
        })
        .collect();
    Ok(GenerationComparison {
        ctx_window,
        rows,
        multipliers,
    })
}

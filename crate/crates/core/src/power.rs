//! Logistic power-vs-concurrency model and the GPU hardware descriptor.
//!
//! GPU power under decode workloads rises with the number of in-flight
//! sequences along a logistic curve in log2(batch): near idle below a handful
//! of sequences, saturating toward nominal power once the batch passes the
//! half-saturation point.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Fraction of TDP a GPU draws while holding a single sequence.
pub const IDLE_TDP_FRACTION: f64 = 0.43;
/// Fraction of TDP a GPU draws at full decode saturation.
pub const NOM_TDP_FRACTION: f64 = 0.86;

/// Provenance quality of a parameter set: measured vs projected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quality {
    High,
    Fair,
}

impl Quality {
    pub fn label(&self) -> &'static str {
        match self {
            Quality::High => "HIGH",
            Quality::Fair => "FAIR",
        }
    }
}

/// Logistic power curve `P(b) = p_range / (1 + exp(-k (log2 b - x0))) + p_idle`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    /// Watts drawn at (deep) idle.
    pub p_idle_w: f64,
    /// Dynamic range in watts (nominal minus idle).
    pub p_range_w: f64,
    /// Steepness of the logistic.
    pub k: f64,
    /// Half-saturation point in log2-batch units.
    pub x0: f64,
}

impl PowerCurve {
    pub fn new(p_idle_w: f64, p_range_w: f64, k: f64, x0: f64) -> Result<Self> {
        if !(p_idle_w > 0.0) {
            return Err(ModelError::Domain(format!(
                "p_idle must be > 0, got {p_idle_w}"
            )));
        }
        if !(p_range_w >= 0.0) {
            return Err(ModelError::Domain(format!(
                "p_range must be >= 0, got {p_range_w}"
            )));
        }
        if !(k > 0.0) {
            return Err(ModelError::Domain(format!("k must be > 0, got {k}")));
        }
        Ok(Self {
            p_idle_w,
            p_range_w,
            k,
            x0,
        })
    }

    /// Nominal (saturated) power in watts.
    pub fn p_nom_w(&self) -> f64 {
        self.p_idle_w + self.p_range_w
    }

    /// Same curve with a different half-saturation point.
    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn power_at(&self, concurrency: f64) -> Result<f64> {
        power_at(self, concurrency)
    }
}

/// Power draw in watts at a mean in-flight concurrency `b`.
///
/// `b` is a real number: mean batch sizes after utilization scaling are
/// rarely integral. `b = 0` is treated as deep idle and returns `p_idle`.
pub fn power_at(curve: &PowerCurve, b: f64) -> Result<f64> {
    if b < 0.0 || b.is_nan() {
        return Err(ModelError::Domain(format!(
            "concurrency must be >= 0, got {b}"
        )));
    }
    if b == 0.0 {
        return Ok(curve.p_idle_w);
    }
    let z = curve.k * (b.log2() - curve.x0);
    Ok(curve.p_range_w / (1.0 + (-z).exp()) + curve.p_idle_w)
}

/// Project a power curve for a GPU with no published measurements, using the
/// TDP fractions validated on measured hardware (idle 43%, nominal 86%).
pub fn project_power_curve(tdp_w: f64, x0: f64, k: f64) -> Result<PowerCurve> {
    if !(tdp_w > 0.0) {
        return Err(ModelError::Domain(format!("tdp must be > 0, got {tdp_w}")));
    }
    PowerCurve::new(
        IDLE_TDP_FRACTION * tdp_w,
        (NOM_TDP_FRACTION - IDLE_TDP_FRACTION) * tdp_w,
        k,
        x0,
    )
}

/// Half-saturation point from the roofline ratio of weight-stream time to
/// KV-scan time at the calibration context: `x0 = log2(W / H0)`.
pub fn derive_x0(w_ms: f64, h0_ms: f64) -> Result<f64> {
    if !(w_ms > 0.0) || !(h0_ms > 0.0) {
        return Err(ModelError::Domain(format!(
            "derive_x0 requires positive inputs, got W={w_ms}, H0={h0_ms}"
        )));
    }
    Ok((w_ms / h0_ms).log2())
}

/// Static description of one GPU SKU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuSpec {
    pub name: String,
    pub tdp_w: f64,
    /// Usable VRAM in bytes.
    pub vram_bytes: f64,
    /// HBM bandwidth in bytes per second.
    pub mem_bw_bytes_per_s: f64,
    pub power_curve: PowerCurve,
    /// Rental cost for a full tensor-parallel group, dollars per hour.
    pub cost_per_hour: f64,
    pub quality: Quality,
}

impl GpuSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        tdp_w: f64,
        vram_bytes: f64,
        mem_bw_bytes_per_s: f64,
        power_curve: PowerCurve,
        cost_per_hour: f64,
        quality: Quality,
    ) -> Result<Self> {
        if power_curve.p_nom_w() > tdp_w {
            return Err(ModelError::Domain(format!(
                "nominal power {} W exceeds TDP {} W",
                power_curve.p_nom_w(),
                tdp_w
            )));
        }
        if !(vram_bytes > 0.0) || !(mem_bw_bytes_per_s > 0.0) {
            return Err(ModelError::Domain("vram and bandwidth must be > 0".into()));
        }
        Ok(Self {
            name: name.into(),
            tdp_w,
            vram_bytes,
            mem_bw_bytes_per_s,
            power_curve,
            cost_per_hour,
            quality,
        })
    }

    /// Same GPU with an adjusted half-saturation point on its power curve.
    pub fn with_x0(mut self, x0: f64) -> Self {
        self.power_curve = self.power_curve.with_x0(x0);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h100_curve() -> PowerCurve {
        PowerCurve::new(300.0, 300.0, 1.0, 4.2).unwrap()
    }

    #[test]
    fn measured_h100_points() {
        let c = h100_curve();
        // Saturation powers at the concurrency ceilings of a doubling ladder.
        assert!((power_at(&c, 16.0).unwrap() - 435.0).abs() < 1.0);
        assert!((power_at(&c, 128.0).unwrap() - 583.0).abs() < 1.0);
        assert!((power_at(&c, 512.0).unwrap() - 598.0).abs() < 1.0);
    }

    #[test]
    fn idle_and_asymptote() {
        let c = h100_curve();
        assert_eq!(power_at(&c, 0.0).unwrap(), 300.0);
        let p = power_at(&c, 1e9).unwrap();
        assert!((p - c.p_nom_w()).abs() < 1e-6);
        assert!(p < c.p_nom_w());
    }

    #[test]
    fn midpoint_is_half_range() {
        let c = h100_curve();
        let b = 2f64.powf(c.x0);
        let p = power_at(&c, b).unwrap();
        assert!((p - (300.0 + 150.0)).abs() < 1e-9);
    }

    #[test]
    fn negative_concurrency_rejected() {
        assert!(power_at(&h100_curve(), -1.0).is_err());
    }

    #[test]
    fn projection_tdp_fractions() {
        let c = project_power_curve(1000.0, 6.8, 1.0).unwrap();
        assert!((c.p_idle_w - 430.0).abs() < 1e-9);
        assert!((c.p_nom_w() - 860.0).abs() < 1e-9);
        let c = project_power_curve(700.0, 5.5, 1.0).unwrap();
        assert!((c.p_idle_w - 301.0).abs() < 1e-9);
        assert!((c.p_nom_w() - 602.0).abs() < 1e-9);
        let c = project_power_curve(1200.0, 6.8, 1.0).unwrap();
        assert!((c.p_idle_w - 516.0).abs() < 1e-9);
        assert!((c.p_nom_w() - 1032.0).abs() < 1e-9);
    }

    #[test]
    fn x0_from_roofline_ratio() {
        assert!((derive_x0(6.72, 6.72).unwrap() - 0.0).abs() < 1e-12);
        assert!((derive_x0(6.72, 0.42).unwrap() - 4.0).abs() < 1e-12);
        // log2(2.95 / 0.0669) = log2(44.096) = 5.4627
        assert!((derive_x0(2.95, 0.0669).unwrap() - 5.4627).abs() < 1e-3);
        assert!(derive_x0(0.0, 1.0).is_err());
        assert!(derive_x0(1.0, -2.0).is_err());
    }

    #[test]
    fn nominal_above_tdp_rejected() {
        let c = PowerCurve::new(400.0, 400.0, 1.0, 4.0).unwrap();
        assert!(GpuSpec::new("bad", 700.0, 8e10, 3e12, c, 10.0, Quality::Fair).is_err());
    }
}

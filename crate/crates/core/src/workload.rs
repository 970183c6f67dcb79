//! Context-length workload models: empirical CDFs from traces, synthetic
//! archetype generators, boundary splits for routing, and archetype
//! classification.
//!
//! The length axis of a [`ContextCdf`] is the request prompt length, which is
//! the routing key; generated output is carried separately as a mean so
//! capacity planning can account prompt + output context.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Standard normal CDF via the Abramowitz-Stegun erf approximation
/// (absolute error below 1.5e-7, plenty for quantile pins at 5e-3).
fn normal_cdf(x: f64) -> f64 {
    let z = x / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.3275911 * z.abs());
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    let erf_abs = 1.0 - poly * (-z * z).exp();
    let erf = if z < 0.0 { -erf_abs } else { erf_abs };
    0.5 * (1.0 + erf)
}

#[derive(Debug, Clone, Copy)]
struct LogNormal {
    ln_median: f64,
    sigma: f64,
}

impl LogNormal {
    fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if self.sigma == 0.0 {
            return if x.ln() >= self.ln_median { 1.0 } else { 0.0 };
        }
        normal_cdf((x.ln() - self.ln_median) / self.sigma)
    }
}

/// Empirical distribution of request prompt lengths, with output statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCdf", into = "RawCdf")]
pub struct ContextCdf {
    points: Vec<(u64, f64)>,
    mean_output_len: f64,
    label: String,
}

#[derive(Serialize, Deserialize)]
struct RawCdf {
    points: Vec<(u64, f64)>,
    mean_output_len: f64,
    label: String,
}

impl TryFrom<RawCdf> for ContextCdf {
    type Error = ModelError;
    fn try_from(raw: RawCdf) -> Result<Self> {
        ContextCdf::from_points(raw.points, raw.mean_output_len, raw.label)
    }
}

impl From<ContextCdf> for RawCdf {
    fn from(cdf: ContextCdf) -> Self {
        RawCdf {
            points: cdf.points,
            mean_output_len: cdf.mean_output_len,
            label: cdf.label,
        }
    }
}

impl ContextCdf {
    pub fn from_points(
        points: Vec<(u64, f64)>,
        mean_output_len: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(ModelError::Domain("cdf needs at least one point".into()));
        }
        let mut prev_len = 0u64;
        let mut prev_cum = 0.0f64;
        for &(len, cum) in &points {
            if len < 1 {
                return Err(ModelError::Domain("cdf lengths must be >= 1".into()));
            }
            if len <= prev_len {
                return Err(ModelError::Domain(
                    "cdf lengths must be strictly increasing".into(),
                ));
            }
            if cum < prev_cum - 1e-12 {
                return Err(ModelError::Domain("cdf must be nondecreasing".into()));
            }
            prev_len = len;
            prev_cum = cum;
        }
        let last = points.last().unwrap().1;
        if (last - 1.0).abs() > 1e-9 {
            return Err(ModelError::Domain(format!(
                "cdf must end at 1.0, ends at {last}"
            )));
        }
        if mean_output_len < 0.0 {
            return Err(ModelError::Domain("mean output length must be >= 0".into()));
        }
        let mut points = points;
        points.last_mut().unwrap().1 = 1.0;
        Ok(Self {
            points,
            mean_output_len,
            label: label.into(),
        })
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn mean_output_len(&self) -> f64 {
        self.mean_output_len
    }

    pub fn with_mean_output_len(mut self, mean_output_len: f64) -> Self {
        self.mean_output_len = mean_output_len;
        self
    }

    /// P[length <= x].
    pub fn prob_le(&self, x: u64) -> f64 {
        let mut p = 0.0;
        for &(len, cum) in &self.points {
            if len <= x {
                p = cum;
            } else {
                break;
            }
        }
        p
    }

    /// Mean prompt length.
    pub fn mean(&self) -> f64 {
        let mut prev = 0.0;
        let mut sum = 0.0;
        for &(len, cum) in &self.points {
            sum += (cum - prev) * len as f64;
            prev = cum;
        }
        sum
    }

    /// Smallest length whose cumulative probability reaches `q`.
    pub fn quantile(&self, q: f64) -> u64 {
        let q = q.clamp(0.0, 1.0);
        for &(len, cum) in &self.points {
            if cum >= q - 1e-12 {
                return len;
            }
        }
        self.points.last().unwrap().0
    }

    pub fn min_len(&self) -> u64 {
        self.points.first().unwrap().0
    }

    pub fn max_len(&self) -> u64 {
        self.points.last().unwrap().0
    }
}

/// A workload split at a prompt-length boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitWorkload {
    /// Conditional distribution of the short side; `None` when no traffic
    /// falls at or below the boundary.
    pub short: Option<ContextCdf>,
    /// Conditional distribution of the long side; `None` when everything
    /// fits below the boundary.
    pub long: Option<ContextCdf>,
    /// Share of traffic routed short: P[length <= boundary].
    pub alpha: f64,
    pub boundary: u64,
}

/// Split a workload at a boundary, renormalizing each side.
pub fn split_at(cdf: &ContextCdf, boundary: u64) -> Result<SplitWorkload> {
    if boundary < 1 {
        return Err(ModelError::Domain("split boundary must be >= 1".into()));
    }
    let alpha = cdf.prob_le(boundary);
    let short = if alpha > 0.0 {
        let pts: Vec<(u64, f64)> = cdf
            .points
            .iter()
            .filter(|(len, _)| *len <= boundary)
            .map(|&(len, cum)| (len, (cum / alpha).min(1.0)))
            .collect();
        Some(ContextCdf::from_points(
            pts,
            cdf.mean_output_len,
            format!("{}<={}", cdf.label, boundary),
        )?)
    } else {
        None
    };
    let long = if alpha < 1.0 {
        let pts: Vec<(u64, f64)> = cdf
            .points
            .iter()
            .filter(|(len, _)| *len > boundary)
            .map(|&(len, cum)| (len, ((cum - alpha) / (1.0 - alpha)).clamp(0.0, 1.0)))
            .collect();
        Some(ContextCdf::from_points(
            pts,
            cdf.mean_output_len,
            format!("{}>{}", cdf.label, boundary),
        )?)
    } else {
        None
    };
    Ok(SplitWorkload {
        short,
        long,
        alpha,
        boundary,
    })
}

/// One request record in a line-delimited trace.
#[derive(Debug, Clone, Copy, Deserialize)]
struct TraceRecord {
    prompt_tokens: u64,
    output_tokens: u64,
}

/// Build an empirical CDF from a line-delimited trace of
/// `{"prompt_tokens": ..., "output_tokens": ...}` records. Unknown fields are
/// ignored; blank lines are skipped; zero-token prompts count as length 1.
pub fn ingest_trace<R: BufRead>(reader: R) -> Result<ContextCdf> {
    let mut lengths: Vec<u64> = Vec::new();
    let mut output_sum = 0.0f64;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| ModelError::Ingest {
            line: line_no,
            reason: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(trimmed).map_err(|e| ModelError::Ingest {
            line: line_no,
            reason: e.to_string(),
        })?;
        lengths.push(rec.prompt_tokens.max(1));
        output_sum += rec.output_tokens as f64;
    }
    if lengths.is_empty() {
        return Err(ModelError::Ingest {
            line: 0,
            reason: "empty trace".into(),
        });
    }
    let n = lengths.len() as f64;
    lengths.sort_unstable();
    let mut points: Vec<(u64, f64)> = Vec::new();
    let mut seen = 0usize;
    let mut i = 0usize;
    while i < lengths.len() {
        let len = lengths[i];
        let mut j = i;
        while j < lengths.len() && lengths[j] == len {
            j += 1;
        }
        seen += j - i;
        points.push((len, seen as f64 / n));
        i = j;
    }
    ContextCdf::from_points(points, output_sum / n, "trace")
}

/// Workload archetypes by short-context traffic share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Archetype {
    /// More than 80% of traffic at or below 8K tokens.
    ShortDominant,
    /// Between 50% and 80% at or below 8K tokens.
    Mixed,
    /// Less than 50% at or below 8K tokens.
    LongDominant,
}

impl Archetype {
    pub fn label(&self) -> &'static str {
        match self {
            Archetype::ShortDominant => "I-short-dominant",
            Archetype::Mixed => "II-mixed",
            Archetype::LongDominant => "III-long-dominant",
        }
    }
}

/// Classify a workload by its traffic share at or below 8K tokens.
/// Boundary values classify upward.
pub fn classify_archetype(cdf: &ContextCdf) -> Archetype {
    let p8k = cdf.prob_le(8192);
    if p8k >= 0.8 {
        Archetype::ShortDominant
    } else if p8k >= 0.5 {
        Archetype::Mixed
    } else {
        Archetype::LongDominant
    }
}

/// Parameters of the two-component (bulk + heavy tail) synthetic generator.
///
/// The tail weight is solved so the clamped mixture hits `pin_prob` exactly
/// at `pin_len`; the remaining fields shape the two lognormal components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchetypeParams {
    pub bulk_median: f64,
    pub bulk_sigma: f64,
    pub tail_median: f64,
    pub tail_sigma: f64,
    pub pin_len: u64,
    pub pin_prob: f64,
    pub mean_output_len: f64,
    pub min_len: u64,
    pub max_len: u64,
}

impl ArchetypeParams {
    pub fn defaults(kind: Archetype) -> Self {
        match kind {
            Archetype::ShortDominant => Self {
                bulk_median: 900.0,
                bulk_sigma: 0.7,
                tail_median: 32_768.0,
                tail_sigma: 0.4,
                pin_len: 4096,
                pin_prob: 0.89,
                mean_output_len: 2560.0,
                min_len: 64,
                max_len: 61_440,
            },
            Archetype::Mixed => Self {
                bulk_median: 2000.0,
                bulk_sigma: 1.0,
                tail_median: 16_384.0,
                tail_sigma: 0.6,
                pin_len: 8192,
                pin_prob: 0.65,
                mean_output_len: 1024.0,
                min_len: 64,
                max_len: 61_440,
            },
            Archetype::LongDominant => Self {
                bulk_median: 3000.0,
                bulk_sigma: 1.0,
                tail_median: 16_384.0,
                tail_sigma: 0.3,
                pin_len: 8192,
                pin_prob: 0.74,
                mean_output_len: 1024.0,
                min_len: 64,
                max_len: 61_440,
            },
        }
    }
}

/// Generate a synthetic workload CDF for an archetype.
///
/// Lengths are clamped to `[min_len, max_len]`; probability mass beyond
/// `max_len` collapses onto the last point, which models traces clipped at
/// the serving limit.
pub fn synth_archetype(kind: Archetype, params: &ArchetypeParams) -> Result<ContextCdf> {
    if params.min_len < 1 || params.max_len <= params.min_len {
        return Err(ModelError::Domain("need 1 <= min_len < max_len".into()));
    }
    if !(params.pin_prob > 0.0 && params.pin_prob < 1.0) {
        return Err(ModelError::Domain(
            "pin probability must be in (0, 1)".into(),
        ));
    }
    if params.pin_len <= params.min_len || params.pin_len >= params.max_len {
        return Err(ModelError::Domain(
            "pin length must lie inside the support".into(),
        ));
    }
    let bulk = LogNormal {
        ln_median: params.bulk_median.ln(),
        sigma: params.bulk_sigma,
    };
    let tail = LogNormal {
        ln_median: params.tail_median.ln(),
        sigma: params.tail_sigma,
    };

    // Solve (1-w) * Fb(pin) + w * Ft(pin) = pin_prob for the tail weight.
    let fb = bulk.cdf(params.pin_len as f64);
    let ft = tail.cdf(params.pin_len as f64);
    if (fb - ft).abs() < 1e-12 {
        return Err(ModelError::Domain(
            "infeasible constraint set: components coincide at pin".into(),
        ));
    }
    let w = (fb - params.pin_prob) / (fb - ft);
    if !(0.0..=1.0).contains(&w) {
        return Err(ModelError::Domain(format!(
            "infeasible constraint set: pin {} at {} needs tail weight {w:.4}",
            params.pin_prob, params.pin_len
        )));
    }
    let mix = |x: f64| (1.0 - w) * bulk.cdf(x) + w * tail.cdf(x);

    // Quarter-octave grid over the support plus the pin point itself.
    let mut grid: Vec<u64> = Vec::new();
    let mut x = params.min_len as f64;
    while x < params.max_len as f64 {
        grid.push(x.round() as u64);
        x *= 2f64.powf(0.25);
    }
    grid.push(params.max_len);
    grid.push(params.pin_len);
    grid.sort_unstable();
    grid.dedup();

    let mut points: Vec<(u64, f64)> = Vec::with_capacity(grid.len());
    let mut prev = 0.0f64;
    for &len in &grid {
        let cum = if len >= params.max_len {
            1.0
        } else {
            mix(len as f64).clamp(0.0, 1.0)
        };
        let cum = cum.max(prev);
        points.push((len, cum));
        prev = cum;
    }
    let label = format!("synthetic-{}", kind.label());
    ContextCdf::from_points(points, params.mean_output_len, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn ingest_three_records() {
        let data = "\
{\"prompt_tokens\":1000,\"output_tokens\":0}
{\"prompt_tokens\":1000,\"output_tokens\":0}
{\"prompt_tokens\":3000,\"output_tokens\":0}
";
        let cdf = ingest_trace(Cursor::new(data)).unwrap();
        assert_eq!(cdf.points(), &[(1000, 2.0 / 3.0), (3000, 1.0)]);
    }

    #[test]
    fn ingest_single_record_degenerate() {
        let data = "{\"prompt_tokens\":512,\"output_tokens\":128}\n";
        let cdf = ingest_trace(Cursor::new(data)).unwrap();
        assert_eq!(cdf.points(), &[(512, 1.0)]);
        assert_eq!(cdf.mean_output_len(), 128.0);
    }

    #[test]
    fn ingest_reports_bad_line() {
        let data = "{\"prompt_tokens\":512,\"output_tokens\":1}\nnot json\n";
        match ingest_trace(Cursor::new(data)) {
            Err(ModelError::Ingest { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected ingest error, got {other:?}"),
        }
    }

    #[test]
    fn ingest_empty_fails() {
        assert!(ingest_trace(Cursor::new("")).is_err());
    }

    #[test]
    fn ingest_ignores_unknown_fields() {
        let data = "{\"prompt_tokens\":64,\"output_tokens\":8,\"model\":\"x\",\"ts\":1}\n";
        assert!(ingest_trace(Cursor::new(data)).is_ok());
    }

    #[test]
    fn short_dominant_pin() {
        let params = ArchetypeParams::defaults(Archetype::ShortDominant);
        let cdf = synth_archetype(Archetype::ShortDominant, &params).unwrap();
        assert!(
            (cdf.prob_le(4096) - 0.89).abs() <= 0.005,
            "got {}",
            cdf.prob_le(4096)
        );
        assert_eq!(classify_archetype(&cdf), Archetype::ShortDominant);
    }

    #[test]
    fn long_dominant_pin_and_p99() {
        let params = ArchetypeParams::defaults(Archetype::LongDominant);
        let cdf = synth_archetype(Archetype::LongDominant, &params).unwrap();
        assert!(
            (cdf.prob_le(8192) - 0.74).abs() <= 0.005,
            "got {}",
            cdf.prob_le(8192)
        );
        let p99 = cdf.quantile(0.99);
        assert!((28_000..=36_000).contains(&p99), "p99 {p99}");
    }

    #[test]
    fn point_mass_params_degenerate() {
        let params = ArchetypeParams {
            bulk_median: 2048.0,
            bulk_sigma: 0.0,
            tail_median: 2048.0,
            tail_sigma: 0.0,
            pin_len: 4096,
            pin_prob: 0.89,
            ..ArchetypeParams::defaults(Archetype::ShortDominant)
        };
        // Identical point masses make the pin unsolvable.
        assert!(synth_archetype(Archetype::ShortDominant, &params).is_err());
    }

    #[test]
    fn split_preserves_alpha_and_mass() {
        let params = ArchetypeParams::defaults(Archetype::ShortDominant);
        let cdf = synth_archetype(Archetype::ShortDominant, &params).unwrap();
        let split = split_at(&cdf, 4096).unwrap();
        assert!((split.alpha - 0.89).abs() <= 0.005);
        let short = split.short.as_ref().unwrap();
        let long = split.long.as_ref().unwrap();
        assert!(short.max_len() <= 4096);
        assert!(long.min_len() > 4096);
        // Conditional means recombine to the parent mean.
        let recombined = split.alpha * short.mean() + (1.0 - split.alpha) * long.mean();
        assert!((recombined - cdf.mean()).abs() / cdf.mean() < 1e-9);
    }

    #[test]
    fn split_above_support_puts_all_short() {
        let cdf = ContextCdf::from_points(vec![(100, 0.5), (200, 1.0)], 32.0, "t").unwrap();
        let split = split_at(&cdf, 1_000_000).unwrap();
        assert_eq!(split.alpha, 1.0);
        assert!(split.long.is_none());
    }

    #[test]
    fn split_below_support_puts_all_long() {
        let cdf = ContextCdf::from_points(vec![(100, 0.5), (200, 1.0)], 32.0, "t").unwrap();
        let split = split_at(&cdf, 50).unwrap();
        assert_eq!(split.alpha, 0.0);
        assert!(split.short.is_none());
    }

    #[test]
    fn uniform_split_is_even() {
        let points: Vec<(u64, f64)> = (1..=10).map(|i| (i * 1000, i as f64 / 10.0)).collect();
        let cdf = ContextCdf::from_points(points, 10.0, "uniform").unwrap();
        let split = split_at(&cdf, 5000).unwrap();
        assert!((split.alpha - 0.5).abs() < 1e-12);
        let short = split.short.unwrap();
        // Renormalized short side is uniform over its five points.
        for (i, &(_, cum)) in short.points().iter().enumerate() {
            assert!((cum - (i + 1) as f64 / 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn classification_thresholds() {
        let mk =
            |p8: f64| ContextCdf::from_points(vec![(8192, p8), (32_768, 1.0)], 16.0, "c").unwrap();
        assert_eq!(classify_archetype(&mk(0.95)), Archetype::ShortDominant);
        assert_eq!(classify_archetype(&mk(0.80)), Archetype::ShortDominant);
        assert_eq!(classify_archetype(&mk(0.74)), Archetype::Mixed);
        assert_eq!(classify_archetype(&mk(0.50)), Archetype::Mixed);
        assert_eq!(classify_archetype(&mk(0.30)), Archetype::LongDominant);
    }

    #[test]
    fn cdf_serde_round_trip() {
        let params = ArchetypeParams::defaults(Archetype::Mixed);
        let cdf = synth_archetype(Archetype::Mixed, &params).unwrap();
        let json = serde_json::to_string(&cdf).unwrap();
        let back: ContextCdf = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cdf);
    }

    #[test]
    fn invalid_points_rejected() {
        assert!(ContextCdf::from_points(vec![], 1.0, "x").is_err());
        assert!(ContextCdf::from_points(vec![(10, 0.5), (10, 1.0)], 1.0, "x").is_err());
        assert!(ContextCdf::from_points(vec![(10, 0.9), (20, 0.5)], 1.0, "x").is_err());
        assert!(ContextCdf::from_points(vec![(10, 0.9)], 1.0, "x").is_err());
        assert!(ContextCdf::from_points(vec![(0, 1.0)], 1.0, "x").is_err());
    }
}

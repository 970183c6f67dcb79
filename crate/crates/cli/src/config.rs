//! Run configuration: a TOML file (via `--config` or `FLEETWATT_CONFIG`)
//! merged with command-line overrides, flags winning. The resolved form is
//! embedded in every JSON report so a report can be replayed from its own
//! config block.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use fleetwatt_core::catalog;
use fleetwatt_core::fleet::SloSpec;
use fleetwatt_core::kv::KvSharding;
use fleetwatt_core::perf::{
    build_computed_profile, ComputedOptions, GpuProfile, ModelSpec, ProfileKind,
};
use fleetwatt_core::power::GpuSpec;
use fleetwatt_core::workload::{
    ingest_trace, synth_archetype, Archetype, ArchetypeParams, ContextCdf,
};

pub const GIB: f64 = 1024.0 * 1024.0 * 1024.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileMode {
    /// Calibrated profile when the catalog has one, else computed.
    Auto,
    Manual,
    Computed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShardingMode {
    Replicated,
    TpSharded,
}

impl From<ShardingMode> for KvSharding {
    fn from(m: ShardingMode) -> Self {
        match m {
            ShardingMode::Replicated => KvSharding::Replicated,
            ShardingMode::TpSharded => KvSharding::TpSharded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyMode {
    Homogeneous,
    TwoPool,
    FleetOpt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SloConfig {
    pub percentile: f64,
    pub bound_ms: f64,
}

impl From<SloConfig> for SloSpec {
    fn from(c: SloConfig) -> Self {
        SloSpec {
            percentile: c.percentile,
            bound_ms: c.bound_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct WorkloadSource {
    /// Synthetic archetype name: short-dominant | mixed | long-dominant.
    pub archetype: Option<String>,
    /// Path to a line-delimited trace file.
    pub trace: Option<String>,
    /// Override for the mean output length carried by the workload.
    pub mean_output_len: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub gpu: String,
    pub model: String,
    /// Second GPU for generation-gain decomposition in `optimize`.
    pub second_gpu: Option<String>,
    /// Small model used by the semantic rows of `compare --mode routing`.
    pub small_model: String,
    pub profile: ProfileMode,
    pub windows: Vec<u64>,
    pub ctx_window: u64,
    pub long_window: u64,
    pub rho: f64,
    /// Bandwidth efficiency; omitted means the per-GPU-class default.
    pub bw_efficiency: Option<f64>,
    pub vram_reserve_gib: f64,
    pub kv_sharding: ShardingMode,
    pub moe_dispatch_ms: f64,
    /// Floor computed profiles at one sequence instead of failing when
    /// weights leave no KV room.
    pub clamp_infeasible: bool,
    pub lambda: f64,
    pub topology: TopologyMode,
    pub boundary: u64,
    pub gamma: f64,
    pub boundary_grid: Vec<u64>,
    pub gamma_grid: Vec<f64>,
    pub slo: SloConfig,
    pub workload: WorkloadSource,
    pub gpu_overrides: Vec<GpuSpec>,
    pub model_overrides: Vec<ModelSpec>,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gpu: "h100-sxm5".into(),
            model: "llama-3.1-70b".into(),
            second_gpu: None,
            small_model: "llama-3.1-8b".into(),
            profile: ProfileMode::Auto,
            windows: vec![2048, 4096, 8192, 16_384, 32_768, 65_536, 131_072],
            ctx_window: 8192,
            long_window: 65_536,
            rho: 0.85,
            bw_efficiency: None,
            vram_reserve_gib: 4.0,
            kv_sharding: ShardingMode::Replicated,
            moe_dispatch_ms: 0.0,
            clamp_infeasible: false,
            lambda: 1000.0,
            topology: TopologyMode::Homogeneous,
            boundary: 4096,
            gamma: 2.0,
            boundary_grid: vec![2048, 4096, 8192],
            gamma_grid: vec![1.0, 2.0, 4.0],
            slo: SloConfig {
                percentile: 0.99,
                bound_ms: 500.0,
            },
            workload: WorkloadSource::default(),
            gpu_overrides: Vec::new(),
            model_overrides: Vec::new(),
            format: OutputFormat::Table,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.workload.archetype.is_some() && self.workload.trace.is_some() {
            bail!("config error: exactly one workload source allowed (archetype or trace)");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            bail!("config error: rho must be in [0, 1]");
        }
        if !(self.slo.percentile > 0.0 && self.slo.percentile < 1.0) {
            bail!("config error: slo percentile must be in (0, 1)");
        }
        if self.windows.is_empty() {
            bail!("config error: windows must be nonempty");
        }
        Ok(())
    }

    pub fn gpus(&self) -> Vec<GpuSpec> {
        catalog::merge_gpus(catalog::builtin_gpus(), self.gpu_overrides.clone())
    }

    pub fn models(&self) -> Vec<ModelSpec> {
        catalog::merge_models(catalog::builtin_models(), self.model_overrides.clone())
    }

    pub fn lookup_gpu(&self, name: &str) -> anyhow::Result<GpuSpec> {
        self.gpus()
            .into_iter()
            .find(|g| g.name == name)
            .with_context(|| format!("config error: unknown gpu {name:?}"))
    }

    pub fn lookup_model(&self, name: &str) -> anyhow::Result<ModelSpec> {
        self.models()
            .into_iter()
            .find(|m| m.name == name)
            .with_context(|| format!("config error: unknown model {name:?}"))
    }

    pub fn computed_options(&self, gpu: &GpuSpec) -> ComputedOptions {
        ComputedOptions {
            bw_efficiency: self
                .bw_efficiency
                .unwrap_or_else(|| catalog::default_bw_efficiency(gpu)),
            vram_reserve_bytes: self.vram_reserve_gib * GIB,
            sharding: self.kv_sharding.into(),
            kv_bytes_per_elem: 2.0,
            moe_dispatch_ms: self.moe_dispatch_ms,
            clamp_infeasible: self.clamp_infeasible,
            l_calib: 8192.0,
        }
    }

    /// Resolve a serving profile for a GPU + model pair under this config.
    pub fn resolve_profile(&self, gpu_name: &str, model_name: &str) -> anyhow::Result<GpuProfile> {
        let gpu = self.lookup_gpu(gpu_name)?;
        let model = self.lookup_model(model_name)?;
        let manual = catalog::manual_profile(gpu_name, model_name);
        match self.profile {
            ProfileMode::Manual => manual.with_context(|| {
                format!("config error: no calibrated profile for {gpu_name}/{model_name}")
            }),
            ProfileMode::Computed => Ok(build_computed_profile(
                &gpu,
                &model,
                &self.computed_options(&gpu),
            )?),
            ProfileMode::Auto => match manual {
                Some(p) => Ok(p),
                None => Ok(build_computed_profile(
                    &gpu,
                    &model,
                    &self.computed_options(&gpu),
                )?),
            },
        }
    }

    /// Materialize the configured workload source.
    pub fn resolve_workload(&self) -> anyhow::Result<ContextCdf> {
        self.validate()?;
        let cdf = if let Some(path) = &self.workload.trace {
            let file =
                std::fs::File::open(path).with_context(|| format!("opening trace {path}"))?;
            ingest_trace(std::io::BufReader::new(file))?
        } else {
            let name = self
                .workload
                .archetype
                .as_deref()
                .unwrap_or("short-dominant");
            let kind = parse_archetype(name)?;
            synth_archetype(kind, &ArchetypeParams::defaults(kind))?
        };
        Ok(match self.workload.mean_output_len {
            Some(out) => cdf.with_mean_output_len(out),
            None => cdf,
        })
    }
}

pub fn parse_archetype(name: &str) -> anyhow::Result<Archetype> {
    match name {
        "short-dominant" => Ok(Archetype::ShortDominant),
        "mixed" => Ok(Archetype::Mixed),
        "long-dominant" => Ok(Archetype::LongDominant),
        other => bail!("config error: unknown archetype {other:?}"),
    }
}

/// Short human summary of a profile for report headers.
pub fn profile_summary(p: &GpuProfile) -> ProfileSummary {
    ProfileSummary {
        gpu: p.gpu.name.clone(),
        model: p.model.name.clone(),
        kind: p.kind,
        quality: p.gpu.quality.label().to_string(),
        w_ms: p.w_ms,
        w_quality: p.w_quality.label().to_string(),
        h0_ms: p.h0_ms,
        kv_token_budget: p.kv_token_budget,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileSummary {
    pub gpu: String,
    pub model: String,
    pub kind: ProfileKind,
    pub quality: String,
    pub w_ms: f64,
    pub w_quality: String,
    pub h0_ms: f64,
    pub kv_token_budget: u64,
}

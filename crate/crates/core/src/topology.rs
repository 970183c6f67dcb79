//! Routing-topology search: homogeneous serving, two-pool prompt-length
//! routing, and the boundary + overflow-factor variant, with the
//! topology/generation gain decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::exec;
use crate::fleet::{fleet_tpw_analysis, FleetPlan, PoolConfig, SloSpec};
use crate::perf::GpuProfile;
use crate::workload::{split_at, ContextCdf};

pub const DEFAULT_LONG_WINDOW: u64 = 65_536;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyKind {
    Homogeneous,
    TwoPool,
    FleetOpt,
}

/// A routing topology. The short pool admits prompts at or below `boundary`
/// but is configured with a context window of `gamma * boundary`, leaving
/// headroom for generated tokens; everything else runs at `long_window`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub kind: TopologyKind,
    pub boundary: Option<u64>,
    pub gamma: f64,
    pub long_window: u64,
}

impl Topology {
    pub fn homogeneous(long_window: u64) -> Self {
        Self {
            kind: TopologyKind::Homogeneous,
            boundary: None,
            gamma: 1.0,
            long_window,
        }
    }

    pub fn two_pool(boundary: u64, long_window: u64) -> Self {
        Self {
            kind: TopologyKind::TwoPool,
            boundary: Some(boundary),
            gamma: 1.0,
            long_window,
        }
    }

    pub fn fleet_opt(boundary: u64, gamma: f64, long_window: u64) -> Self {
        Self {
            kind: TopologyKind::FleetOpt,
            boundary: Some(boundary),
            gamma,
            long_window,
        }
    }

    /// Context window of the short pool.
    pub fn short_window(&self) -> Option<u64> {
        self.boundary
            .map(|b| (b as f64 * self.gamma).round() as u64)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            TopologyKind::Homogeneous => {
                if self.boundary.is_some() {
                    return Err(ModelError::InvalidTopology(
                        "homogeneous topology carries no boundary".into(),
                    ));
                }
            }
            TopologyKind::TwoPool | TopologyKind::FleetOpt => {
                let b = self.boundary.ok_or_else(|| {
                    ModelError::InvalidTopology("split topology needs a boundary".into())
                })?;
                if self.kind == TopologyKind::TwoPool && self.gamma != 1.0 {
                    return Err(ModelError::InvalidTopology(
                        "two-pool topology implies gamma = 1".into(),
                    ));
                }
                if self.gamma < 1.0 {
                    return Err(ModelError::InvalidTopology("gamma must be >= 1".into()));
                }
                if b >= self.long_window {
                    return Err(ModelError::InvalidTopology(format!(
                        "boundary {b} must be below the long window {}",
                        self.long_window
                    )));
                }
                let sw = self.short_window().unwrap();
                if sw > self.long_window {
                    return Err(ModelError::InvalidTopology(format!(
                        "short window {sw} exceeds the long window {}",
                        self.long_window
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn describe(&self) -> String {
        match self.kind {
            TopologyKind::Homogeneous => format!("homogeneous@{}", self.long_window),
            TopologyKind::TwoPool => {
                format!("two-pool@{}", self.boundary.unwrap_or(0))
            }
            TopologyKind::FleetOpt => {
                format!(
                    "fleet-opt@{}/g{:.0}",
                    self.boundary.unwrap_or(0),
                    self.gamma
                )
            }
        }
    }
}

/// Size a fleet for one topology on one workload.
///
/// Pools that receive no traffic are omitted, so degenerate splits collapse
/// to the homogeneous plan exactly.
pub fn plan_topology(
    topology: &Topology,
    workload: &ContextCdf,
    profile: &GpuProfile,
    lam: f64,
    slo: &SloSpec,
) -> Result<FleetPlan> {
    topology.validate()?;
    if workload.max_len() > topology.long_window {
        return Err(ModelError::InvalidTopology(format!(
            "workload prompts up to {} exceed the long window {}",
            workload.max_len(),
            topology.long_window
        )));
    }
    let mut pools: Vec<PoolConfig> = Vec::new();
    match topology.kind {
        TopologyKind::Homogeneous => {
            pools.push(PoolConfig::new(
                "homo",
                profile.clone(),
                topology.long_window,
                workload.clone(),
                lam,
            )?);
        }
        TopologyKind::TwoPool | TopologyKind::FleetOpt => {
            let boundary = topology.boundary.expect("validated");
            let split = split_at(workload, boundary)?;
            if let Some(short) = split.short {
                pools.push(PoolConfig::new(
                    "short",
                    profile.clone(),
                    topology.short_window().expect("validated"),
                    short,
                    split.alpha * lam,
                )?);
            }
            if let Some(long) = split.long {
                pools.push(PoolConfig::new(
                    "long",
                    profile.clone(),
                    topology.long_window,
                    long,
                    (1.0 - split.alpha) * lam,
                )?);
            }
        }
    }
    fleet_tpw_analysis(&pools, lam, slo)
}

/// One evaluated candidate in a topology search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub topology: Topology,
    pub fleet_tok_per_watt: f64,
    pub total_instances: u64,
    pub fleet_power_kw: f64,
}

/// Result of an exhaustive topology search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutcome {
    pub best: Topology,
    pub plan: FleetPlan,
    /// Every evaluated candidate, ranked by fleet tok/W (descending).
    pub ranked: Vec<CandidateRow>,
}

/// Exhaustively evaluate the boundary x gamma grid plus the homogeneous
/// baseline and return the fleet tok/W argmax. Ties break toward fewer
/// instances, then smaller boundary, then smaller gamma.
pub fn optimize(
    workload: &ContextCdf,
    profile: &GpuProfile,
    lam: f64,
    slo: &SloSpec,
    boundary_grid: &[u64],
    gamma_grid: &[f64],
) -> Result<OptimizeOutcome> {
    if boundary_grid.is_empty() || gamma_grid.is_empty() {
        return Err(ModelError::Optimization("empty search grid".into()));
    }
    let long_window = DEFAULT_LONG_WINDOW.max(workload.max_len());
    let mut candidates: Vec<Topology> = vec![Topology::homogeneous(long_window)];
    for &b in boundary_grid {
        for &g in gamma_grid {
            let t = if g == 1.0 {
                Topology::two_pool(b, long_window)
            } else {
                Topology::fleet_opt(b, g, long_window)
            };
            if t.validate().is_ok() {
                candidates.push(t);
            }
        }
    }
    let evaluated = exec::map_collect(&candidates, |t| {
        plan_topology(t, workload, profile, lam, slo).map(|plan| CandidateRow {
            topology: *t,
            fleet_tok_per_watt: plan.fleet_tok_per_watt,
            total_instances: plan.total_instances(),
            fleet_power_kw: plan.fleet_power_kw,
        })
    });
    let mut rows: Vec<CandidateRow> = evaluated.into_iter().filter_map(|r| r.ok()).collect();
    if rows.is_empty() {
        return Err(ModelError::Optimization(
            "no feasible candidate on the grid".into(),
        ));
    }
    rows.sort_by(|a, b| {
        b.fleet_tok_per_watt
            .total_cmp(&a.fleet_tok_per_watt)
            .then(a.total_instances.cmp(&b.total_instances))
            .then(
                a.topology
                    .boundary
                    .unwrap_or(0)
                    .cmp(&b.topology.boundary.unwrap_or(0)),
            )
            .then(a.topology.gamma.total_cmp(&b.topology.gamma))
    });
    let best = rows[0].topology;
    let plan = plan_topology(&best, workload, profile, lam, slo)?;
    Ok(OptimizeOutcome {
        best,
        plan,
        ranked: rows,
    })
}

/// Topology and generation improvement factors over a base homogeneous
/// fleet, and their combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainDecomposition {
    /// Optimized-over-homogeneous gain on the base hardware.
    pub delta_topo: f64,
    /// New-hardware-over-base gain at the homogeneous topology.
    pub delta_gen: f64,
    /// Optimized new hardware over the homogeneous base.
    pub delta_combined: f64,
}

pub fn gain_decomposition(
    tpw_base_homo: f64,
    tpw_base_opt: f64,
    tpw_new_homo: f64,
    tpw_new_opt: f64,
) -> Result<GainDecomposition> {
    for v in [tpw_base_homo, tpw_base_opt, tpw_new_homo, tpw_new_opt] {
        if !(v > 0.0) {
            return Err(ModelError::Domain(format!(
                "tok/W inputs must be > 0, got {v}"
            )));
        }
    }
    Ok(GainDecomposition {
        delta_topo: tpw_base_opt / tpw_base_homo,
        delta_gen: tpw_new_homo / tpw_base_homo,
        delta_combined: tpw_new_opt / tpw_base_homo,
    })
}

/// Relative deviation of the combined gain from the product of the
/// individual gains.
pub fn multiplicativity_check(d: &GainDecomposition) -> f64 {
    (d.delta_combined - d.delta_topo * d.delta_gen).abs() / d.delta_combined
}

//! Subcommand implementations. Each returns a [`Report`] carrying both the
//! machine payload and the rendered tables.

use anyhow::Context;
use serde::Serialize;
use serde_json::json;

use fleetwatt_core::perf::build_computed_profile;
use fleetwatt_core::tokenomics::{
    compare_generations, context_sweep, gpu_tok_per_watt, halving_ratios, utilization_point,
};
use fleetwatt_core::topology::{
    gain_decomposition, multiplicativity_check, optimize, plan_topology, Topology,
};
use fleetwatt_core::workload::classify_archetype;
use fleetwatt_core::FleetPlan;

use crate::config::{profile_summary, ProfileMode, RunConfig, TopologyMode};
use crate::render::{f1, f2, f3, f4, Report, Table};

fn profile_table(profiles: &[&fleetwatt_core::GpuProfile]) -> Table {
    let mut t = Table::new(
        "profiles",
        &[
            "gpu",
            "model",
            "kind",
            "quality",
            "W_ms",
            "W_quality",
            "H0_ms",
            "kv_budget_tokens",
        ],
    );
    for p in profiles {
        let s = profile_summary(p);
        t.row(vec![
            s.gpu,
            s.model,
            format!("{:?}", s.kind).to_lowercase(),
            s.quality,
            f4(s.w_ms),
            s.w_quality,
            f4(s.h0_ms),
            s.kv_token_budget.to_string(),
        ]);
    }
    t
}

pub fn cmd_sweep_context(cfg: &RunConfig) -> anyhow::Result<Report> {
    cfg.validate()?;
    let profile = cfg.resolve_profile(&cfg.gpu, &cfg.model)?;
    let sweep = context_sweep(&profile, &cfg.windows)?;
    let ratios = halving_ratios(&sweep).ok();

    let mut table = Table::new(
        format!("context sweep: {} + {}", cfg.gpu, cfg.model),
        &["window", "n_max", "P_W", "tok_per_s", "tok_per_W"],
    );
    for p in &sweep {
        table.row(vec![
            p.ctx_window.to_string(),
            format!("{:.0}", p.n_active),
            f1(p.power_w),
            f1(p.throughput_tok_s),
            f3(p.tok_per_watt),
        ]);
    }
    let mut tables = vec![profile_table(&[&profile]), table];
    if let Some(r) = &ratios {
        let mut rt = Table::new("tok/W ratio per window doubling", &["from", "to", "ratio"]);
        for (i, v) in r.iter().enumerate() {
            rt.row(vec![
                sweep[i].ctx_window.to_string(),
                sweep[i + 1].ctx_window.to_string(),
                f4(*v),
            ]);
        }
        tables.push(rt);
    }

    let data = json!({
        "profile": profile_summary(&profile),
        "rows": sweep,
        "halving_ratios": ratios,
    });
    let mut report = Report::new("sweep-context", cfg, data);
    report.tables = tables;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareMode {
    Models,
    Routing,
    Generations,
}

#[derive(Debug, Serialize)]
struct ModelRow {
    model: String,
    tp: u32,
    w_ms: f64,
    w_quality: String,
    n_max: u64,
    tok_per_s: f64,
    tok_per_watt: f64,
    weight_bound: bool,
}

pub fn cmd_compare(cfg: &RunConfig, mode: CompareMode) -> anyhow::Result<Report> {
    cfg.validate()?;
    match mode {
        CompareMode::Models => compare_models(cfg),
        CompareMode::Routing => compare_routing(cfg),
        CompareMode::Generations => compare_gens(cfg),
    }
}

fn compare_models(cfg: &RunConfig) -> anyhow::Result<Report> {
    let gpu = cfg.lookup_gpu(&cfg.gpu)?;
    let mut opts = cfg.computed_options(&gpu);
    // The cross-model view keeps weight-bound rows visible at one sequence
    // instead of erroring out.
    opts.clamp_infeasible = true;
    let mut rows: Vec<ModelRow> = Vec::new();
    for model in cfg.models() {
        let p = build_computed_profile(&gpu, &model, &opts)?;
        let n = p.n_max(cfg.ctx_window);
        let point = gpu_tok_per_watt(&p, cfg.ctx_window, n as f64, cfg.ctx_window as f64)?;
        rows.push(ModelRow {
            model: model.name.clone(),
            tp: model.tp,
            w_ms: p.w_ms,
            w_quality: p.w_quality.label().to_string(),
            n_max: n,
            tok_per_s: point.throughput_tok_s,
            tok_per_watt: point.tok_per_watt,
            weight_bound: p.min_one_sequence,
        });
    }
    let mut table = Table::new(
        format!("model comparison on {} at {}", cfg.gpu, cfg.ctx_window),
        &[
            "model",
            "tp",
            "W_ms",
            "W_quality",
            "n_max",
            "tok_per_s",
            "tok_per_W",
            "weight_bound",
        ],
    );
    for r in &rows {
        table.row(vec![
            r.model.clone(),
            r.tp.to_string(),
            f4(r.w_ms),
            r.w_quality.clone(),
            r.n_max.to_string(),
            f1(r.tok_per_s),
            f3(r.tok_per_watt),
            r.weight_bound.to_string(),
        ]);
    }
    let data = json!({
        "gpu": cfg.gpu,
        "gpu_quality": gpu.quality.label(),
        "ctx_window": cfg.ctx_window,
        "rows": rows,
    });
    let mut report = Report::new("compare", cfg, data);
    report.tables = vec![table];
    report.notes.push(
        "MoE rows stream active parameters only; W is a lower bound (dispatch excluded)".into(),
    );
    Ok(report)
}

#[derive(Debug, Serialize)]
struct RoutingRow {
    pool: String,
    model: String,
    ctx_window: u64,
    n_active: f64,
    power_w: f64,
    tok_per_watt: f64,
    w_quality: String,
    gpu_quality: String,
}

fn compare_routing(cfg: &RunConfig) -> anyhow::Result<Report> {
    let big = cfg.resolve_profile(&cfg.gpu, &cfg.model)?;
    let small = cfg.resolve_profile(&cfg.gpu, &cfg.small_model)?;
    let pool_defs = [
        ("context-short", &big, cfg.ctx_window),
        ("context-long", &big, cfg.long_window),
        ("semantic-small", &small, cfg.ctx_window),
        ("semantic-large", &big, cfg.long_window),
    ];
    let mut rows = Vec::new();
    for (pool, profile, window) in pool_defs {
        let point = utilization_point(profile, window, cfg.rho, None)?;
        rows.push(RoutingRow {
            pool: pool.to_string(),
            model: profile.model.name.clone(),
            ctx_window: window,
            n_active: point.n_active,
            power_w: point.power_w,
            tok_per_watt: point.tok_per_watt,
            w_quality: profile.w_quality.label().to_string(),
            gpu_quality: profile.gpu.quality.label().to_string(),
        });
    }
    let mut table = Table::new(
        format!("routing comparison at rho={}", cfg.rho),
        &[
            "pool",
            "model",
            "window",
            "n_active",
            "P_W",
            "tok_per_W",
            "W_quality",
            "gpu_quality",
        ],
    );
    for r in &rows {
        table.row(vec![
            r.pool.clone(),
            r.model.clone(),
            r.ctx_window.to_string(),
            format!("{:.0}", r.n_active),
            f1(r.power_w),
            f3(r.tok_per_watt),
            r.w_quality.clone(),
            r.gpu_quality.clone(),
        ]);
    }
    let data = json!({ "rho": cfg.rho, "rows": rows });
    let mut report = Report::new("compare", cfg, data);
    report.tables = vec![profile_table(&[&big, &small]), table];
    Ok(report)
}

fn compare_gens(cfg: &RunConfig) -> anyhow::Result<Report> {
    // Apples-to-apples: first-principles profiles for every generation.
    let mut computed_cfg = cfg.clone();
    computed_cfg.profile = ProfileMode::Computed;
    let mut profiles = Vec::new();
    for gpu in cfg.gpus() {
        profiles.push(computed_cfg.resolve_profile(&gpu.name, &cfg.model)?);
    }
    let cmp = compare_generations(&profiles, cfg.ctx_window)?;
    let mut table = Table::new(
        format!("generation comparison: {} at {}", cfg.model, cfg.ctx_window),
        &[
            "gpu",
            "quality",
            "W_ms",
            "W_quality",
            "n_max",
            "P_sat_W",
            "tok_per_W",
            "Mtok_per_usd",
        ],
    );
    for r in &cmp.rows {
        table.row(vec![
            r.gpu.clone(),
            r.quality.label().to_string(),
            f4(r.w_ms),
            r.w_quality.label().to_string(),
            r.n_max.to_string(),
            f1(r.p_sat_w),
            f3(r.tok_per_watt),
            f3(r.tok_per_dollar / 1e6),
        ]);
    }
    let mut mt = Table::new("tok/W multipliers (row over column)", &["gpu"]);
    mt.header.extend(cmp.rows.iter().map(|r| r.gpu.clone()));
    for (i, r) in cmp.rows.iter().enumerate() {
        let mut row = vec![r.gpu.clone()];
        row.extend(cmp.multipliers[i].iter().map(|m| f3(*m)));
        mt.row(row);
    }
    let data = json!({ "comparison": cmp });
    let mut report = Report::new("compare", cfg, data);
    report.tables = vec![table, mt];
    Ok(report)
}

fn topology_from_config(cfg: &RunConfig) -> Topology {
    match cfg.topology {
        TopologyMode::Homogeneous => Topology::homogeneous(cfg.long_window),
        TopologyMode::TwoPool => Topology::two_pool(cfg.boundary, cfg.long_window),
        TopologyMode::FleetOpt => Topology::fleet_opt(cfg.boundary, cfg.gamma, cfg.long_window),
    }
}

fn plan_tables(title: &str, plan: &FleetPlan) -> Vec<Table> {
    let mut pools = Table::new(
        format!("{title}: pools"),
        &[
            "pool",
            "window",
            "instances",
            "utilization",
            "n_active",
            "power_kW",
            "tok_per_s",
            "tok_per_W",
        ],
    );
    for p in &plan.pools {
        pools.row(vec![
            p.label.clone(),
            p.ctx_window.to_string(),
            p.instances.to_string(),
            f4(p.utilization),
            f2(p.n_active_mean),
            f3(p.pool_power_kw),
            f1(p.pool_token_rate),
            f3(p.tok_per_watt),
        ]);
    }
    let mut fleet = Table::new(
        format!("{title}: fleet"),
        &["instances", "power_kW", "tok_per_s", "tok_per_W", "slo"],
    );
    fleet.row(vec![
        plan.total_instances().to_string(),
        f3(plan.fleet_power_kw),
        f1(plan.fleet_token_rate),
        f3(plan.fleet_tok_per_watt),
        format!(
            "p{:.0} wait <= {:.0}ms",
            plan.slo.percentile * 100.0,
            plan.slo.bound_ms
        ),
    ]);
    vec![pools, fleet]
}

pub fn cmd_plan(cfg: &RunConfig) -> anyhow::Result<Report> {
    cfg.validate()?;
    let profile = cfg.resolve_profile(&cfg.gpu, &cfg.model)?;
    let workload = cfg.resolve_workload()?;
    let topology = topology_from_config(cfg);
    let plan = plan_topology(&topology, &workload, &profile, cfg.lambda, &cfg.slo.into())?;
    let data = json!({
        "profile": profile_summary(&profile),
        "topology": topology,
        "workload_label": workload.label(),
        "plan": plan,
    });
    let mut report = Report::new("plan", cfg, data);
    report.tables = vec![profile_table(&[&profile])];
    report
        .tables
        .extend(plan_tables(&topology.describe(), &plan));
    Ok(report)
}

pub fn cmd_optimize(cfg: &RunConfig) -> anyhow::Result<Report> {
    cfg.validate()?;
    let profile = cfg.resolve_profile(&cfg.gpu, &cfg.model)?;
    let workload = cfg.resolve_workload()?;
    let slo = cfg.slo.into();
    let outcome = optimize(
        &workload,
        &profile,
        cfg.lambda,
        &slo,
        &cfg.boundary_grid,
        &cfg.gamma_grid,
    )?;

    let mut ranked = Table::new(
        "ranked candidates",
        &["rank", "topology", "instances", "power_kW", "tok_per_W"],
    );
    for (i, c) in outcome.ranked.iter().enumerate() {
        ranked.row(vec![
            (i + 1).to_string(),
            c.topology.describe(),
            c.total_instances.to_string(),
            f3(c.fleet_power_kw),
            f3(c.fleet_tok_per_watt),
        ]);
    }

    let mut tables = vec![profile_table(&[&profile]), ranked];
    tables.extend(plan_tables(
        &format!("best: {}", outcome.best.describe()),
        &outcome.plan,
    ));

    let mut decomposition = None;
    if let Some(second) = &cfg.second_gpu {
        let second_profile = cfg.resolve_profile(second, &cfg.model)?;
        let homo = Topology::homogeneous(cfg.long_window.max(workload.max_len()));
        let base_homo = plan_topology(&homo, &workload, &profile, cfg.lambda, &slo)?;
        let new_homo = plan_topology(&homo, &workload, &second_profile, cfg.lambda, &slo)?;
        let new_opt = optimize(
            &workload,
            &second_profile,
            cfg.lambda,
            &slo,
            &cfg.boundary_grid,
            &cfg.gamma_grid,
        )?;
        let d = gain_decomposition(
            base_homo.fleet_tok_per_watt,
            outcome.plan.fleet_tok_per_watt,
            new_homo.fleet_tok_per_watt,
            new_opt.plan.fleet_tok_per_watt,
        )?;
        let dev = multiplicativity_check(&d);
        let mut gt = Table::new(
            format!("gain decomposition: {} -> {}", cfg.gpu, second),
            &[
                "delta_topo",
                "delta_gen",
                "delta_combined",
                "product",
                "deviation",
            ],
        );
        gt.row(vec![
            f3(d.delta_topo),
            f3(d.delta_gen),
            f3(d.delta_combined),
            f3(d.delta_topo * d.delta_gen),
            f4(dev),
        ]);
        tables.push(gt);
        decomposition = Some(json!({
            "second_gpu": second,
            "gains": d,
            "multiplicativity_deviation": dev,
            "second_profile": profile_summary(&second_profile),
        }));
    }

    let data = json!({
        "profile": profile_summary(&profile),
        "workload_label": workload.label(),
        "best": outcome.best,
        "plan": outcome.plan,
        "ranked": outcome.ranked,
        "decomposition": decomposition,
    });
    let mut report = Report::new("optimize", cfg, data);
    report.tables = tables;
    Ok(report)
}

pub fn cmd_ingest_trace(
    cfg: &RunConfig,
    out_cdf: Option<&std::path::Path>,
) -> anyhow::Result<Report> {
    let path = cfg
        .workload
        .trace
        .as_deref()
        .context("config error: ingest-trace needs a trace path (--trace)")?;
    let file = std::fs::File::open(path).with_context(|| format!("opening trace {path}"))?;
    let cdf = fleetwatt_core::workload::ingest_trace(std::io::BufReader::new(file))?;
    let archetype = classify_archetype(&cdf);

    let mut table = Table::new(
        format!("trace summary: {path}"),
        &[
            "points",
            "min",
            "p50",
            "p90",
            "p99",
            "max",
            "mean",
            "mean_output",
            "archetype",
        ],
    );
    table.row(vec![
        cdf.points().len().to_string(),
        cdf.min_len().to_string(),
        cdf.quantile(0.5).to_string(),
        cdf.quantile(0.9).to_string(),
        cdf.quantile(0.99).to_string(),
        cdf.max_len().to_string(),
        f1(cdf.mean()),
        f1(cdf.mean_output_len()),
        archetype.label().to_string(),
    ]);

    if let Some(out) = out_cdf {
        let mut body = serde_json::to_string_pretty(&cdf)?;
        body.push('\n');
        std::fs::write(out, body).with_context(|| format!("writing cdf {}", out.display()))?;
    }

    let data = json!({
        "trace": path,
        "cdf": cdf,
        "archetype": archetype,
    });
    let mut report = Report::new("ingest-trace", cfg, data);
    report.tables = vec![table];
    Ok(report)
}

pub fn cmd_classify(cfg: &RunConfig) -> anyhow::Result<Report> {
    let workload = cfg.resolve_workload()?;
    let archetype = classify_archetype(&workload);
    let mut table = Table::new(
        format!("classification: {}", workload.label()),
        &["P_le_4K", "P_le_8K", "p99", "mean", "archetype"],
    );
    table.row(vec![
        f4(workload.prob_le(4096)),
        f4(workload.prob_le(8192)),
        workload.quantile(0.99).to_string(),
        f1(workload.mean()),
        archetype.label().to_string(),
    ]);
    let data = json!({
        "workload_label": workload.label(),
        "p_le_4k": workload.prob_le(4096),
        "p_le_8k": workload.prob_le(8192),
        "archetype": archetype,
    });
    let mut report = Report::new("classify", cfg, data);
    report.tables = vec![table];
    Ok(report)
}

/// Catalog listing used by `--list`.
pub fn catalog_tables(cfg: &RunConfig) -> Vec<Table> {
    let mut gt = Table::new(
        "gpu catalog",
        &[
            "name",
            "tdp_W",
            "vram_GB",
            "bw_TBps",
            "p_idle_W",
            "p_nom_W",
            "k",
            "x0",
            "usd_per_hr",
            "quality",
        ],
    );
    for g in cfg.gpus() {
        gt.row(vec![
            g.name.clone(),
            f1(g.tdp_w),
            f1(g.vram_bytes / 1e9),
            f2(g.mem_bw_bytes_per_s / 1e12),
            f1(g.power_curve.p_idle_w),
            f1(g.power_curve.p_nom_w()),
            f2(g.power_curve.k),
            f2(g.power_curve.x0),
            f1(g.cost_per_hour),
            g.quality.label().to_string(),
        ]);
    }
    let mut mt = Table::new(
        "model catalog",
        &[
            "name",
            "params",
            "active",
            "layers",
            "kv_heads",
            "head_dim",
            "bytes_per_param",
            "tp",
        ],
    );
    for m in cfg.models() {
        mt.row(vec![
            m.name.clone(),
            format!("{:.0}e9", m.total_params / 1e9),
            m.active_params
                .map(|a| format!("{:.0}e9", a / 1e9))
                .unwrap_or_else(|| "-".into()),
            m.layers.to_string(),
            m.kv_heads.to_string(),
            m.head_dim.to_string(),
            format!("{}", m.bytes_per_param),
            m.tp.to_string(),
        ]);
    }
    vec![gt, mt]
}

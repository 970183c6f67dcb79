//! fleetwatt: analytical tokens-per-watt planning for LLM inference fleets.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible model or plan,
//! 4 trace ingestion error.

mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CompareMode;
use config::{OutputFormat, ProfileMode, RunConfig, TopologyMode};
use fleetwatt_core::ModelError;
use render::Report;

#[derive(Parser, Debug)]
#[command(
    name = "fleetwatt",
    version,
    about = "Tokens-per-watt planning for LLM inference fleets"
)]
struct Cli {
    /// Config file (TOML); falls back to $FLEETWATT_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<OutputFormat>,

    /// Write the report to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print the GPU and model catalogs and exit.
    #[arg(long)]
    list_catalog: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Clone, clap::Args)]
struct CommonOverrides {
    /// GPU name from the catalog.
    #[arg(long)]
    gpu: Option<String>,
    /// Model name from the catalog.
    #[arg(long)]
    model: Option<String>,
    /// Profile source: auto, manual, computed.
    #[arg(long, value_parser = parse_profile)]
    profile: Option<ProfileMode>,
    /// Synthetic workload archetype: short-dominant, mixed, long-dominant.
    #[arg(long)]
    archetype: Option<String>,
    /// Line-delimited trace file.
    #[arg(long)]
    trace: Option<String>,
    /// Override the workload's mean output length in tokens.
    #[arg(long)]
    mean_output_len: Option<f64>,
    /// Request arrival rate in req/s.
    #[arg(long)]
    lambda: Option<f64>,
}

impl CommonOverrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = &self.gpu {
            cfg.gpu = v.clone();
        }
        if let Some(v) = &self.model {
            cfg.model = v.clone();
        }
        if let Some(v) = self.profile {
            cfg.profile = v;
        }
        if let Some(v) = &self.archetype {
            cfg.workload.archetype = Some(v.clone());
            cfg.workload.trace = None;
        }
        if let Some(v) = &self.trace {
            cfg.workload.trace = Some(v.clone());
            cfg.workload.archetype = None;
        }
        if let Some(v) = self.mean_output_len {
            cfg.workload.mean_output_len = Some(v);
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep tok/W across context windows at full concurrency.
    SweepContext {
        #[command(flatten)]
        common: CommonOverrides,
        /// Comma-separated window ladder, e.g. 2048,4096,8192.
        #[arg(long, value_delimiter = ',')]
        windows: Option<Vec<u64>>,
    },
    /// Compare models, routing pools, or GPU generations.
    Compare {
        #[command(flatten)]
        common: CommonOverrides,
        /// models | routing | generations
        #[arg(long, default_value = "generations", value_parser = parse_compare_mode)]
        mode: CompareMode,
        /// Utilization for the routing comparison.
        #[arg(long)]
        rho: Option<f64>,
        /// Context window for single-window comparisons.
        #[arg(long)]
        ctx: Option<u64>,
    },
    /// Size a fleet for one topology and report fleet tok/W.
    Plan {
        #[command(flatten)]
        common: CommonOverrides,
        /// homogeneous | two-pool | fleet-opt
        #[arg(long, value_parser = parse_topology)]
        topology: Option<TopologyMode>,
        /// Short-pool admission boundary in tokens.
        #[arg(long)]
        boundary: Option<u64>,
        /// Short-pool window headroom factor.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Grid-search boundary and headroom for the best fleet tok/W.
    Optimize {
        #[command(flatten)]
        common: CommonOverrides,
        /// Comma-separated boundary grid.
        #[arg(long, value_delimiter = ',')]
        boundary_grid: Option<Vec<u64>>,
        /// Comma-separated gamma grid.
        #[arg(long, value_delimiter = ',')]
        gamma_grid: Option<Vec<f64>>,
        /// Second GPU for the generation-gain decomposition.
        #[arg(long)]
        second_gpu: Option<String>,
    },
    /// Build an empirical workload CDF from a trace file.
    IngestTrace {
        #[command(flatten)]
        common: CommonOverrides,
        /// Write the CDF as JSON to this path.
        #[arg(long)]
        out_cdf: Option<PathBuf>,
    },
    /// Classify a workload into a serving archetype.
    Classify {
        #[command(flatten)]
        common: CommonOverrides,
    },
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "table" => Ok(OutputFormat::Table),
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(format!("unknown format {other:?} (table|csv|json)")),
    }
}

fn parse_profile(s: &str) -> Result<ProfileMode, String> {
    match s {
        "auto" => Ok(ProfileMode::Auto),
        "manual" => Ok(ProfileMode::Manual),
        "computed" => Ok(ProfileMode::Computed),
        other => Err(format!(
            "unknown profile mode {other:?} (auto|manual|computed)"
        )),
    }
}

fn parse_topology(s: &str) -> Result<TopologyMode, String> {
    match s {
        "homogeneous" => Ok(TopologyMode::Homogeneous),
        "two-pool" => Ok(TopologyMode::TwoPool),
        "fleet-opt" => Ok(TopologyMode::FleetOpt),
        other => Err(format!(
            "unknown topology {other:?} (homogeneous|two-pool|fleet-opt)"
        )),
    }
}

fn parse_compare_mode(s: &str) -> Result<CompareMode, String> {
    match s {
        "models" => Ok(CompareMode::Models),
        "routing" => Ok(CompareMode::Routing),
        "generations" => Ok(CompareMode::Generations),
        other => Err(format!(
            "unknown mode {other:?} (models|routing|generations)"
        )),
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let path = cli
        .config
        .clone()
        .or_else(|| std::env::var_os("FLEETWATT_CONFIG").map(PathBuf::from));
    match path {
        Some(p) => RunConfig::load(&p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: &Cli) -> anyhow::Result<Report> {
    let mut cfg = load_config(cli)?;
    if let Some(f) = cli.format {
        cfg.format = f;
    }

    if cli.list_catalog {
        let mut report = Report::new("catalog", &cfg, serde_json::Value::Null);
        report.tables = commands::catalog_tables(&cfg);
        return Ok(report);
    }

    let command = match &cli.command {
        Some(c) => c,
        None => anyhow::bail!("config error: a subcommand is required (see --help)"),
    };

    let report = match command {
        Command::SweepContext { common, windows } => {
            common.apply(&mut cfg);
            if let Some(w) = windows {
                cfg.windows = w.clone();
            }
            commands::cmd_sweep_context(&cfg)?
        }
        Command::Compare {
            common,
            mode,
            rho,
            ctx,
        } => {
            common.apply(&mut cfg);
            if let Some(r) = rho {
                cfg.rho = *r;
            }
            if let Some(c) = ctx {
                cfg.ctx_window = *c;
            }
            commands::cmd_compare(&cfg, *mode)?
        }
        Command::Plan {
            common,
            topology,
            boundary,
            gamma,
        } => {
            common.apply(&mut cfg);
            if let Some(t) = topology {
                cfg.topology = *t;
            }
            if let Some(b) = boundary {
                cfg.boundary = *b;
            }
            if let Some(g) = gamma {
                cfg.gamma = *g;
            }
            commands::cmd_plan(&cfg)?
        }
        Command::Optimize {
            common,
            boundary_grid,
            gamma_grid,
            second_gpu,
        } => {
            common.apply(&mut cfg);
            if let Some(b) = boundary_grid {
                cfg.boundary_grid = b.clone();
            }
            if let Some(g) = gamma_grid {
                cfg.gamma_grid = g.clone();
            }
            if let Some(s) = second_gpu {
                cfg.second_gpu = Some(s.clone());
            }
            commands::cmd_optimize(&cfg)?
        }
        Command::IngestTrace { common, out_cdf } => {
            common.apply(&mut cfg);
            commands::cmd_ingest_trace(&cfg, out_cdf.as_deref())?
        }
        Command::Classify { common } => {
            common.apply(&mut cfg);
            commands::cmd_classify(&cfg)?
        }
    };
    Ok(report)
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(model_err) = err.downcast_ref::<ModelError>() {
        return match model_err {
            ModelError::Ingest { .. } => 4,
            ModelError::InfeasibleModel { .. }
            | ModelError::Sizing { .. }
            | ModelError::Optimization(_)
            | ModelError::CapacityExceeded { .. }
            | ModelError::InvalidTopology(_) => 3,
            ModelError::Domain(_) => 2,
        };
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let format = report.config.format;
            let body = report.render(format);
            match &cli.out {
                Some(path) => {
                    if let Err(e) = std::fs::write(path, &body) {
                        eprintln!("error: writing {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{body}"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

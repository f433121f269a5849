use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tcs_core::env::ActionMode;
use tcs_core::experiment::{run_experiment, ExperimentKind, ExperimentSpec};
use tcs_core::ppo::CapsMode;
use tcs_core::sim::Scale;

/// Experiment driver for the tradable-credit tolling laboratory.
#[derive(Parser, Debug)]
#[command(name = "toll-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// No tolling and no token market.
    Nt(RunArgs),
    /// Uniformly random toll amplitude every day.
    Random(RunArgs),
    /// Bayesian optimization of a constant toll.
    Bo(RunArgs),
    /// Train PPO tolling policies.
    Train(RunArgs),
    /// Evaluate a trained policy on a scaled scenario against policies trained there from scratch.
    Transfer(RunArgs),
    /// Hyperparameter / regularization grid.
    Sweep(RunArgs),
    /// Print the JSON schema of the experiment config file.
    Schema,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    Desk,
    Paper,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Experiment config (JSON); command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    /// Number of controlled toll parameters (1 or 3).
    #[arg(long)]
    action_dim: Option<usize>,
    /// none | t_l1 | t_l2 | s_l1 | s_l2
    #[arg(long)]
    caps: Option<String>,
    #[arg(long)]
    capacity_mult: Option<f64>,
    #[arg(long)]
    demand_mult: Option<f64>,
    /// Policy checkpoint (transfer).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Training iterations per run.
    #[arg(long)]
    iterations: Option<usize>,
}

fn build_spec(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentSpec> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ExperimentSpec>(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => ExperimentSpec::default(),
    };
    spec.kind = kind;
    if let Some(seeds) = &args.seeds {
        spec.seeds = seeds.clone();
    }
    if let Some(scale) = args.scale {
        spec.scale = match scale {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Paper => Scale::Paper,
        };
    }
    if let Some(dim) = args.action_dim {
        spec.episode.action_mode = ActionMode::from_dim(dim)?;
        spec.bo_dims = dim;
    }
    if kind == ExperimentKind::Train1d && spec.episode.action_mode == ActionMode::ThreeD {
        spec.kind = ExperimentKind::Train3d;
    }
    if let Some(caps) = &args.caps {
        spec.caps_mode = Some(caps.parse::<CapsMode>()?);
    }
    if let Some(x) = args.capacity_mult {
        spec.capacity_mult = x;
    }
    if let Some(x) = args.demand_mult {
        spec.demand_mult = x;
    }
    if let Some(p) = &args.checkpoint {
        spec.checkpoint = Some(p.clone());
    }
    if let Some(n) = args.iterations {
        spec.iterations = n;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = match &cli.command {
        Command::Nt(a) => (ExperimentKind::Nt, a),
        Command::Random(a) => (ExperimentKind::Random, a),
        Command::Bo(a) => (ExperimentKind::Bo, a),
        Command::Train(a) => (ExperimentKind::Train1d, a),
        Command::Transfer(a) => (ExperimentKind::Transfer, a),
        Command::Sweep(a) => (ExperimentKind::Sweep, a),
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&ExperimentSpec::json_schema())?);
            return Ok(());
        }
    };
    let spec = build_spec(kind, args)?;
    log::info!("running {:?} (config {}) into {}", spec.kind, spec.hash(), args.out.display());
    let report = run_experiment(&spec, &args.out)?;
    for r in &report.reports {
        let m = &r.mean;
        let price = m.token_price.map_or("NA".to_string(), |p| format!("{p:.3}"));
        println!(
            "{:<28} AITT {:.2} min  car AITT {}  price {}  PT {:.1}%  welfare {:.2}  reward {:.4}  M {:.2}",
            r.policy,
            m.aitt,
            m.car_aitt.map_or("NA".to_string(), |c| format!("{c:.2}")),
            price,
            m.pt_share_pct,
            m.welfare_per_capita,
            m.reward,
            m.toll_amplitude
        );
    }
    for f in &report.files {
        println!("wrote {}", args.out.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

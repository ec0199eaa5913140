use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;
use staysim::pipeline::{self, Layout};
use staysim::{CliError, Format, PipelineConfig};
use staysim_core::detect::Detector;

#[derive(Parser)]
#[command(name = "staysim", version, about = "Synthetic staypoint datasets with labeled anomalies")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Number of agents.
    #[arg(long, global = true, value_name = "N_AGENTS")]
    scale: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// POIs, road graph and population.
    World,
    /// Activity chains.
    Activities,
    /// POI for every activity.
    Assign,
    /// Routed staypoints for the train and test windows.
    Realize,
    /// Anomalous test file and manifest.
    Inject,
    /// Score the anomalous test file.
    Detect {
        #[arg(long)]
        detector: Option<Detector>,
    },
    /// AP and AUCROC of a score file.
    Evaluate {
        #[arg(long)]
        detector: Option<Detector>,
        /// Score file; defaults to the detector's file in the output directory.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Every stage in order.
    All,
}

fn config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(format) = cli.format {
        cfg.format = format;
    }
    if let Some(n) = cli.scale {
        cfg.n_agents = n;
        cfg.world = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Vec<Value>, CliError> {
    let cfg = config(cli)?;
    let layout = Layout::new(&cfg.out_dir, cfg.format);
    Ok(match &cli.command {
        Command::World => vec![pipeline::stage_world(&cfg, &layout)?],
        Command::Activities => vec![pipeline::stage_activities(&cfg, &layout)?],
        Command::Assign => vec![pipeline::stage_assign(&cfg, &layout)?],
        Command::Realize => vec![pipeline::stage_realize(&cfg, &layout)?],
        Command::Inject => vec![pipeline::stage_inject(&cfg, &layout)?],
        Command::Detect { detector } => vec![pipeline::stage_detect(&cfg, &layout, *detector)?],
        Command::Evaluate { detector, scores } => {
            vec![pipeline::stage_evaluate(&cfg, &layout, *detector, scores.as_deref())?]
        }
        Command::All => pipeline::run_all(&cfg, &layout)?,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summaries) => {
            for s in summaries {
                println!("{s}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use synergy_pipeline::synth::{write_world, WorldSpec};
use synergy_pipeline::{
    run_pipeline, run_stage, Overrides, PipelineConfig, PipelineError, RunOptions, Stage,
};

#[derive(Parser)]
#[command(
    name = "synergy",
    version,
    about = "Production-network synergy pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline configuration (JSON).
    #[arg(long, short)]
    config: PathBuf,
    /// Overwrite existing stage outputs.
    #[arg(long)]
    force: bool,
    /// Print stage timings to standard error.
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    Planted,
    Small,
}

#[derive(Subcommand)]
enum Command {
    /// Parse transactions and final demand into flow and fluctuation series.
    Ingest(StageArgs),
    /// Cluster countries by technology, per industry.
    Cluster(StageArgs),
    /// Score pairwise input synergy per industry and cluster.
    Synergy(StageArgs),
    /// Build synergy networks, backbones and their statistics.
    Network(StageArgs),
    /// Industry fitness and complexity from trade data.
    Complexity(StageArgs),
    /// Regress complexity on synergy.
    Regress(StageArgs),
    /// Run every stage in order.
    Pipeline(StageArgs),
    /// Write a synthetic input world with known synergy.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "planted")]
        scenario: Scenario,
    },
    /// Alternative complexity backend (not available).
    Genepy {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

fn load(a: &StageArgs) -> Result<(PipelineConfig, RunOptions), PipelineError> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    cfg.apply(&a.overrides);
    Ok((
        cfg,
        RunOptions {
            force: a.force,
            timings: a.timings,
        },
    ))
}

fn stage(a: &StageArgs, s: Stage) -> Result<(), PipelineError> {
    let (cfg, opts) = load(a)?;
    run_stage(&cfg, s, opts)
}

fn dispatch(cmd: Command) -> Result<(), PipelineError> {
    match cmd {
        Command::Ingest(a) => stage(&a, Stage::Ingest),
        Command::Cluster(a) => stage(&a, Stage::Cluster),
        Command::Synergy(a) => stage(&a, Stage::Synergy),
        Command::Network(a) => stage(&a, Stage::Network),
        Command::Complexity(a) => stage(&a, Stage::Complexity),
        Command::Regress(a) => stage(&a, Stage::Regress),
        Command::Pipeline(a) => {
            let (cfg, opts) = load(&a)?;
            let root = run_pipeline(&cfg, opts)?;
            log::info!("artifacts in {}", root.display());
            Ok(())
        }
        Command::Synth {
            out,
            seed,
            scenario,
        } => {
            let spec = match scenario {
                Scenario::Planted => WorldSpec::planted(seed),
                Scenario::Small => WorldSpec::small(seed),
            };
            let cfg = write_world(&spec, &out).map_err(|e| PipelineError::Stage {
                stage: "synth",
                error: e,
            })?;
            log::info!("wrote {}", cfg.display());
            Ok(())
        }
        Command::Genepy { .. } => Err(PipelineError::NotImplemented("the genepy backend")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

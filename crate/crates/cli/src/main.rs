//! `ggsp`: experiment runner for decorated-expander exploration.

mod commands;
mod config;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Status;
use config::{ExperimentConfig, Overrides};

#[derive(Parser, Debug)]
#[command(name = "ggsp", version, about = "Decorated-expander graphs, labeled oracles and exploration experiments")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, env = "GGSP_OUT_DIR")]
    out: Option<PathBuf>,
    /// Worker threads for trial-parallel commands.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a certified d_K-regular expander.
    GenExpander,
    /// Certify girth and spectral gap of an edge-list file.
    Certify {
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Certify the built-in Petersen graph instead.
        #[arg(long, conflicts_with = "graph")]
        petersen: bool,
    },
    /// Solve for lambda_G, the alpha_k and the norm split.
    Spectrum,
    /// Draw vertices from the guiding distribution.
    SampleGround {
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Exit-probability experiments on a standalone tree, joined with the analytic ceilings.
    ExploreTree,
    /// Local exploration of the main graph from guiding inputs.
    ExploreGraph,
    /// The guided localization game for the configured algorithm.
    Ggsp,
    /// Analytic bounds for the configured schedule.
    Bounds,
    /// Brute-force fixture suite.
    VerifySmall {
        /// Perturb one amplitude; the residual check must then fail.
        #[arg(long)]
        perturb: bool,
    },
    /// Collect every results.jsonl under the output directory.
    Report,
}

fn run(cli: Cli) -> Result<Status> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let overrides = Overrides {
        seed: cli.seed,
        trials: cli.trials,
        budget: cli.budget,
        out: cli.out,
    };
    let config = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::GenExpander => commands::gen_expander(&config),
        Command::Certify { graph, petersen } => commands::certify(&config, graph.as_deref(), petersen),
        Command::Spectrum => commands::spectrum(&config),
        Command::SampleGround { count } => commands::sample_ground(&config, count),
        Command::ExploreTree => commands::explore_tree(&config),
        Command::ExploreGraph => commands::explore_graph(&config),
        Command::Ggsp => commands::ggsp(&config),
        Command::Bounds => commands::bounds(&config),
        Command::VerifySmall { perturb } => verify::verify_small(&config, perturb),
        Command::Report => commands::report(&config),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ggsp_core::Error>() {
        Some(ggsp_core::Error::CertificationFailed { .. }) => 2,
        Some(ggsp_core::Error::BudgetExhausted { .. } | ggsp_core::Error::SamplingBudgetExhausted { .. }) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Rejected) => ExitCode::from(2),
        Ok(Status::BudgetExhausted) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

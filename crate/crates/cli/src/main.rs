use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ftrl_cli::{run, CliError, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(name = "ftrl-experiments", version, about = "Run FTRL expert-advice experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantile regret on the replicated Hadamard environment.
    Quantile(RunArgs),
    /// Best-expert regret on the semi-adversarial environments.
    Semiadv(RunArgs),
    /// Monte-Carlo quantile regret on Bernoulli losses against the lower bound.
    Lowerbound(RunArgs),
    /// Any algorithm on losses read from a CSV file.
    Custom(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Random seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(kind: ExperimentKind, args: RunArgs) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = args.threads {
        cfg.threads = Some(threads);
    }
    let out_dir = args
        .out_dir
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run(kind, &cfg, &out_dir)?;
    for f in &outcome.files {
        println!("{}", f.display());
    }
    if outcome.stats.solves > 0 {
        log::info!(
            "{} normalization solves, max residual {:e}",
            outcome.stats.solves,
            outcome.stats.max_residual
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Quantile(a) => (ExperimentKind::Quantile, a),
        Command::Semiadv(a) => (ExperimentKind::Semiadv, a),
        Command::Lowerbound(a) => (ExperimentKind::Lowerbound, a),
        Command::Custom(a) => (ExperimentKind::Custom, a),
    };
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

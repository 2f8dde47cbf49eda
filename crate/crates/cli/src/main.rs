use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridshare::{exit_code, run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "gridshare", version, about = "Microgrid resilience ranking and P2P energy-sharing reports")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Split the feeder into microgrids by switch states.
    Partition(Common),
    /// Percolation threshold of each microgrid's correlation network.
    Resilience(Common),
    /// Cooperative sharing in the selected microgrid and savings reports.
    Trade(Common),
    /// Thresholds of the grid-import series with and without sharing.
    Compare(Common),
    /// All stages in order.
    All(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Partition(c) => (Command::Partition, c),
        Cmd::Resilience(c) => (Command::Resilience, c),
        Cmd::Trade(c) => (Command::Trade, c),
        Cmd::Compare(c) => (Command::Compare, c),
        Cmd::All(c) => (Command::All, c),
    };
    let result = RunConfig::load(&common.config).map_err(anyhow::Error::from).and_then(|mut cfg| {
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        if let Some(out) = common.out {
            cfg.output_dir = out;
        }
        run(cmd, cfg)
    });
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

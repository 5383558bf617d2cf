//! Batch front end: `fdxsim <subcommand> --config <path> [--out <dir>]
//! [--seed <u64>]`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 pipeline error (with the
//! originating module named on stderr). The seed is resolved from, in
//! priority order: `--seed`, the config's `channel.seed`, the `FDXSIM_SEED`
//! environment variable, then 0.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};

use fdxsim::error::Error;
use fdxsim::report::{run, Subcommand};
use fdxsim::scenario::parse_scenario;

#[derive(Parser)]
#[command(
    name = "fdxsim",
    about = "Link-level simulator for full-duplex mmWave transceivers with hybrid beamforming",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file (sectioned key = value text).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's [output] dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config's channel seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Export the self-interference channel realization as CSV.
    Channel(RunArgs),
    /// Export array-factor patterns over the configured ranges.
    Af(RunArgs),
    /// Sweep the beamforming-cancellation regularizer and export the rate region.
    BfcSweep(RunArgs),
    /// Export the staged self-interference power-level budget.
    Levels(RunArgs),
    /// Score and select among the configured uplink users.
    Select(RunArgs),
    /// Export the codebook-pair isolation map.
    CodebookIso(RunArgs),
}

impl Command {
    fn split(self) -> (Subcommand, RunArgs) {
        match self {
            Command::Channel(a) => (Subcommand::Channel, a),
            Command::Af(a) => (Subcommand::Af, a),
            Command::BfcSweep(a) => (Subcommand::BfcSweep, a),
            Command::Levels(a) => (Subcommand::Levels, a),
            Command::Select(a) => (Subcommand::Select, a),
            Command::CodebookIso(a) => (Subcommand::CodebookIso, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (sub, args) = cli.command.split();

    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("fdxsim: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };

    let (mut scenario, defaults) = match parse_scenario(&text) {
        Ok(parsed) => parsed,
        Err(e) => {
            eprintln!("fdxsim: {e}");
            return ExitCode::from(2);
        }
    };
    for line in &defaults {
        eprintln!("fdxsim: default applied: {line}");
    }

    // Seed priority: --seed, config value, FDXSIM_SEED, 0.
    let seed_defaulted = defaults.iter().any(|d| d.starts_with("channel.seed"));
    if let Some(seed) = args.seed {
        scenario.channel.seed = seed;
        eprintln!("fdxsim: seed override from --seed: {seed}");
    } else if seed_defaulted {
        if let Ok(env_seed) = std::env::var("FDXSIM_SEED") {
            match env_seed.parse::<u64>() {
                Ok(seed) => {
                    scenario.channel.seed = seed;
                    eprintln!("fdxsim: seed from FDXSIM_SEED: {seed}");
                }
                Err(_) => {
                    eprintln!("fdxsim: FDXSIM_SEED '{env_seed}' is not a u64");
                    return ExitCode::from(2);
                }
            }
        }
    }

    let out_dir = args
        .out
        .unwrap_or_else(|| PathBuf::from(&scenario.output.dir));

    match run(sub, &scenario, &out_dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config { .. }) => {
            eprintln!("fdxsim: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("fdxsim: [{}] {e}", e.module());
            ExitCode::from(3)
        }
    }
}

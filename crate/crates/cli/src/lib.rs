//! `mrfgan`: simulate, learn, synthesize and evaluate MRF dictionaries.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use mrf_core::{Error, Result};

pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "mrfgan", version, about = "MR fingerprinting dictionaries: Bloch simulation, GAN synthesis, matching")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for splits, training, noise and seeded synthesis.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    /// Output directory for every artifact.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand a grid spec into `params.csv` and print the atom count.
    Grid {
        /// Grid spec TOML; overrides `paths.grid`.
        spec: Option<PathBuf>,
    },
    /// Bloch-simulate the dictionary for the grid and sequence.
    Simulate,
    /// Train the GAN on the simulated dictionary.
    Train,
    /// Sweep lambda on the validation split.
    Validate,
    /// Synthesize a dictionary from the trained generator.
    Synth(SynthArgs),
    /// Build the phantom and match it against one or more dictionaries.
    Match(MatchArgs),
    /// Aggregate timings, curves and map errors into `report.csv`.
    Report,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Draw seeded N(0, 1) noise per atom instead of z = 0.
    #[arg(long)]
    pub random_z: bool,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Dictionaries to match (MRFD). Defaults to the simulated and the
    /// synthesized dictionary in the output directory.
    #[arg(long = "dict")]
    pub dicts: Vec<PathBuf>,
}

/// Everything a command needs besides its own arguments.
#[derive(Debug)]
pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub out: PathBuf,
    /// Process start, for cold-start timing.
    pub started: Instant,
}

/// Exit status for a failed command: 2 configuration, 3 data or shape,
/// 4 numeric failure.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Shape(_) | Error::Format(_) | Error::Io(_) => 3,
        Error::Numeric(_) => 4,
    }
}

pub fn run(cli: Cli, started: Instant) -> Result<()> {
    // Fails only if a pool already exists, e.g. when called twice in-process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    std::fs::create_dir_all(&cli.out)?;
    let ctx = Context { config, seed: cli.seed, out: cli.out, started };
    match cli.command {
        Command::Grid { spec } => commands::grid(&ctx, spec.as_deref()),
        Command::Simulate => commands::simulate(&ctx),
        Command::Train => commands::train(&ctx),
        Command::Validate => commands::validate(&ctx),
        Command::Synth(args) => commands::synth(&ctx, &args),
        Command::Match(args) => commands::match_phantom(&ctx, &args),
        Command::Report => commands::report(&ctx),
    }
}

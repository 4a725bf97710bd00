//! `q2fmm`: synthesize, simulate and cost-analyze hierarchical-multipole
//! Coulomb circuits for the 2D extended Hubbard model.
//!
//! Exit codes: 0 success, 1 validation error, 2 internal invariant
//! violation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CmdError;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "q2fmm", version, about = "Hierarchical-multipole Coulomb circuits: synthesis, simulation, resource estimation")]
struct Cli {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the quadtree and dump boxes, near fields and interaction lists.
    Hierarchy,
    /// Hierarchical vs brute-force Coulomb energy of one state.
    Energy {
        /// Per-site occupation digits, row-major (e.g. 0110...).
        #[arg(long)]
        state: Option<String>,
        /// Seed for a random state at the configured electron count.
        #[arg(long)]
        state_seed: Option<u64>,
    },
    /// Synthesize the Trotter-step circuit and write it with its manifest.
    Synth,
    /// Check circuit phases against the quantized evaluator on basis states.
    Simulate,
    /// Schedule the synthesized circuit under all three hardware models.
    Estimate,
    /// Structural resource estimate of the configured size and model.
    OutlineEstimate,
    /// Error-vs-order and depth-vs-size sweeps with fit reports.
    Sweep,
}

fn run(cli: &Cli) -> Result<String, CmdError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())
        .map_err(|e| CmdError::Validation(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.run.jobs = jobs;
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir));

    if cfg.run.jobs > 0 {
        // ignore failures from configuring the pool twice in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.jobs)
            .build_global();
    }

    match &cli.command {
        Command::Hierarchy => commands::cmd_hierarchy(&cfg, &out),
        Command::Energy { state, state_seed } => {
            commands::cmd_energy(&cfg, &out, state.as_deref(), *state_seed)
        }
        Command::Synth => commands::cmd_synth(&cfg, &out),
        Command::Simulate => commands::cmd_simulate(&cfg, &out),
        Command::Estimate => commands::cmd_estimate(&cfg, &out),
        Command::OutlineEstimate => commands::cmd_outline_estimate(&cfg, &out),
        Command::Sweep => commands::cmd_sweep(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

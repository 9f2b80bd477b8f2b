use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridfno::commands::{self, SimulateArgs};
use gridfno::config::LoadedConfig;
use gridfno::error::{AppError, Result};

/// Transient-dynamics surrogate pipeline for power grids.
#[derive(Parser)]
#[command(name = "gridfno", version, about)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Override the config's RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (this build is single-threaded; accepted for
    /// interface stability, must be >= 1).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate one staged fault scenario and write the trajectory CSV.
    Simulate {
        /// Fault type: none|slg|llg|ll|3ph.
        #[arg(long, default_value = "none")]
        fault_type: String,
        /// Index of the faulted line in the network's line list.
        #[arg(long)]
        line_index: Option<usize>,
        /// Clearing delay in 60 Hz cycles after fault inception.
        #[arg(long, default_value_t = 5)]
        clear_cycles: u32,
        /// End time of the integration (s).
        #[arg(long, default_value_t = 5.0)]
        t_end: f64,
    },
    /// Generate a dataset of encoded fault scenarios.
    GenDataset,
    /// Train a surrogate on a generated dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Model kind: fno|dnn.
        #[arg(long, default_value = "fno")]
        model: String,
    },
    /// Predict one sample's trajectory and write it next to the truth.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        sample: usize,
    },
    /// Score a checkpoint on a dataset's test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Evaluate even if the artifact hashes disagree with the config.
        #[arg(long)]
        force: bool,
        /// Also regenerate per-cycle test sets for the timing breakdown.
        #[arg(long)]
        cycles: bool,
    },
    /// Compare simulation and surrogate inference wall time per horizon.
    Bench,
}

fn run(cli: &Cli) -> Result<i32> {
    if cli.threads == 0 {
        return Err(AppError::Config("--threads must be >= 1".into()));
    }
    let lc = LoadedConfig::load(&cli.config)?;
    let seed = cli.seed.unwrap_or(lc.cfg.seed);
    match &cli.cmd {
        Cmd::Simulate {
            fault_type,
            line_index,
            clear_cycles,
            t_end,
        } => commands::cmd_simulate(
            &lc,
            seed,
            &SimulateArgs {
                fault_type: fault_type.clone(),
                line_index: *line_index,
                clear_cycles: *clear_cycles,
                t_end: *t_end,
                out: cli.out.clone(),
            },
        ),
        Cmd::GenDataset => commands::cmd_gen_dataset(&lc, seed, &cli.out),
        Cmd::Train { dataset, model } => commands::cmd_train(&lc, seed, dataset, model, &cli.out),
        Cmd::Predict {
            checkpoint,
            dataset,
            sample,
        } => commands::cmd_predict(seed, checkpoint, dataset, *sample, &cli.out, &lc.sha256),
        Cmd::Eval {
            checkpoint,
            dataset,
            force,
            cycles,
        } => commands::cmd_eval(&lc, seed, checkpoint, dataset, *force, *cycles, &cli.out),
        Cmd::Bench => commands::cmd_bench(&lc, seed, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sail_harness::experiment::{ablation_cells, run_cells, scaling_cells};
use sail_harness::plot::emit_plots;
use sail_harness::replay::replay_file;
use sail_harness::results::read_csv_file;
use sail_harness::{summarize, write_outputs, ConfigError, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "sail", version, about = "Test-time trajectory search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the strategy x budget grid.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the retrieval and feedback ablations at the ablation budget.
    Ablate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Draw scaling curves from a results CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute node statistics of one seed from a tree log.
    Replay {
        #[arg(long)]
        tree_log: PathBuf,
        #[arg(long)]
        seed: u64,
    },
}

const CONFIG_ERROR: u8 = 1;
const ABORTED: u8 = 2;

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e: ConfigError| {
        eprintln!("error: {e}");
        ExitCode::from(CONFIG_ERROR)
    })
}

fn grid(config: &Path, ablate: bool) -> ExitCode {
    let cfg = match load(config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let (cells, name) = if ablate {
        (ablation_cells(&cfg), "ablation")
    } else {
        (scaling_cells(&cfg), "results")
    };
    let outcome = run_cells(&cfg, &cells).and_then(|out| {
        let written = write_outputs(&cfg.output_dir, name, &out)?;
        Ok((out, written))
    });
    match outcome {
        Ok((out, written)) => {
            print!("{}", summarize(&out.rows).to_text());
            println!("wrote {}", written.csv.display());
            if out.aborted.is_empty() {
                ExitCode::SUCCESS
            } else {
                eprintln!("{} seed(s) aborted; see {}", out.aborted.len(), written.aborted.unwrap().display());
                ExitCode::from(ABORTED)
            }
        }
        Err(HarnessError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ABORTED)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run { config } => grid(&config, false),
        Command::Ablate { config } => grid(&config, true),
        Command::Plot { csv, out } => {
            match read_csv_file(&csv).and_then(|rows| emit_plots(&rows, &out)) {
                Ok(paths) => {
                    for p in paths {
                        println!("wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(CONFIG_ERROR)
                }
            }
        }
        Command::Replay { tree_log, seed } => match replay_file(&tree_log, seed) {
            Ok(report) => {
                print!("{}", report.text);
                if report.mismatches == 0 {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(ABORTED)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(CONFIG_ERROR)
            }
        },
    }
}

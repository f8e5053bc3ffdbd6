use std::path::PathBuf;
use std::process::ExitCode;

use biot::{run, ExperimentConfig, ExperimentKind, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "biot", version, about = "Four-field Biot solver and stability verification")]
struct Cli {
    /// List the experiment kinds and exit.
    #[arg(long)]
    list_experiments: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        config: PathBuf,
        /// Overrides `[output] dir` (default: `out`).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `[experiment] seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Evaluate sweep points one at a time.
        #[arg(long)]
        sequential: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_experiments {
        for k in ExperimentKind::ALL {
            println!("{:<16} {}", k.name(), k.description());
        }
        return ExitCode::SUCCESS;
    }
    let Some(Command::Run {
        config,
        output_dir,
        seed,
        sequential,
    }) = cli.command
    else {
        eprintln!("error: nothing to do (try `biot run <config>` or `biot --list-experiments`)");
        return ExitCode::from(2);
    };
    let cfg = match ExperimentConfig::from_path(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        output_dir: output_dir.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out")),
        seed,
        sequential,
    };
    match run(&cfg, &opts) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{c}");
            }
            println!("artifacts in {}", opts.output_dir.display());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qcrb::cli::{run_file, EXIT_CONFIG};

#[derive(Parser)]
#[command(
    name = "qcrb",
    version,
    about = "Quantum Cramér-Rao bounds and adaptive estimation studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the computation described by a TOML configuration file.
    Run {
        config: PathBuf,
        /// Override a config field, e.g. `--set simulation.trials=2000`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Worker threads (0 = one per core). Results do not depend on it.
        #[arg(long, env = "QCRB_WORKERS", default_value_t = 0)]
        workers: usize,
        /// Output directory, replacing `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Cmd::Run {
        config,
        set,
        workers,
        out,
    } = cli.command;
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: cannot start {workers} workers: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match pool.install(|| run_file(&config, &set, out.as_deref())) {
        Ok(o) => {
            for line in o.summary {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

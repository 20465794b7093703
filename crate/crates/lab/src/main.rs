use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sieve_lab::{diagnose, run, RunOptions, EXIT_INVALID, EXIT_OK, FIXTURES};

#[derive(Debug, Parser)]
#[command(name = "sieve-lab", version, about = "Lattice sieve experiments: discrepancy, p-capacity, homogenization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write its tables, plots and manifest.
    Run {
        /// Config file, or `fixture:<name>` for a bundled one.
        #[arg(long)]
        config: PathBuf,
        /// Output root (default: the config's `output`, else `.`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, env = "SIEVE_HOMOG_THREADS")]
        threads: Option<usize>,
        /// Replaces the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// List the bundled configs.
    ListFixtures,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out, threads, seed } => {
            if threads == Some(0) {
                eprintln!("error: threads: must be at least 1");
                EXIT_INVALID
            } else {
                match run(&config, &RunOptions { out, threads, seed }) {
                    Ok(outcome) => {
                        if !cli.quiet {
                            for row in &outcome.manifest.rows {
                                println!("{}  {}", row[1], outcome.dir.join(&row[0]).display());
                            }
                        }
                        EXIT_OK
                    }
                    Err(e) => {
                        eprintln!("error: {e}");
                        e.exit_code()
                    }
                }
            }
        }
        Command::Validate { config } => match diagnose(&config) {
            Ok(d) => {
                if !cli.quiet || !d.is_ok() {
                    eprint!("{d}");
                }
                if d.is_ok() {
                    if !cli.quiet && d.is_empty() {
                        println!("ok");
                    }
                    EXIT_OK
                } else {
                    EXIT_INVALID
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::ListFixtures => {
            for (name, text) in FIXTURES {
                let summary = text.lines().next().unwrap_or("").trim_start_matches("# ");
                println!("{name:<22} {summary}");
            }
            EXIT_OK
        }
    };
    ExitCode::from(code as u8)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rstab::cache::{load_or_build, parse_grid_spec};
use rstab::catalog::catalog;
use rstab::{load_manifest, run, RunOptions, EXIT_FAIL, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "rstab", version, about = "Convergence studies and stability probes for spacelike graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a manifest.
    Run {
        manifest: PathBuf,
        /// Output directory (overrides the manifest).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for randomized sweeps (overrides the manifest).
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
        /// Reuse grids from this cache directory.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Print the family catalog as JSON.
    Families,
    /// Build or verify a cached grid, e.g. `sphere:64x128`.
    Cache {
        gridspec: String,
        /// Cache directory.
        #[arg(long, default_value = ".rstab-cache")]
        out: PathBuf,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { manifest, out, seed, jobs, cache } => {
            let opts = RunOptions { out, seed, jobs, cache };
            let outcome = load_manifest(&manifest).and_then(|m| run(m, &opts));
            match outcome {
                Ok(o) => {
                    let s = &o.report.summary;
                    println!(
                        "{} pass, {} fail, {} error; report in {}",
                        s.pass,
                        s.fail,
                        s.error,
                        o.out_dir.join("report.json").display()
                    );
                    for rec in o.report.failing() {
                        let r = rec.r.map(|r| format!(" r={r}")).unwrap_or_default();
                        eprintln!(
                            "{:?}: {}{r}: {}",
                            rec.status,
                            rec.task,
                            rec.message.as_deref().unwrap_or("")
                        );
                    }
                    code(o.exit_code())
                }
                Err(e) => {
                    eprint!("{e}");
                    if !e.to_string().ends_with('\n') {
                        eprintln!();
                    }
                    code(e.exit_code())
                }
            }
        }
        Command::Families => {
            println!("{}", serde_json::to_string_pretty(&catalog()).expect("catalog serializes"));
            code(0)
        }
        Command::Cache { gridspec, out } => {
            let spec = match parse_grid_spec(&gridspec) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return code(EXIT_USAGE);
                }
            };
            match load_or_build(&out, spec) {
                Ok((_, entry)) => {
                    println!("{}", serde_json::to_string_pretty(&entry).expect("entry serializes"));
                    code(0)
                }
                Err(e) => {
                    eprintln!("cache: {e}");
                    code(EXIT_FAIL)
                }
            }
        }
    }
}

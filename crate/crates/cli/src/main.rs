use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use nenmf_cli::compare::{comparison_csv, comparison_table};
use nenmf_cli::{cmd_compare, cmd_generate, cmd_run, SpecArgs};
use std::path::PathBuf;
use std::process::ExitCode;

/// Plain and randomized-compression NeNMF benchmarks.
#[derive(Parser, Debug)]
#[command(name = "nenmf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one synthetic instance per seed
    Generate(SpecArgs),
    /// Factorize each seed's instance and write traces plus a summary
    Run(SpecArgs),
    /// Compare run directories against the first one
    Compare {
        /// Run directories written by `run`
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
        /// RRE threshold for time- and iterations-to-target
        #[arg(long, default_value_t = 0.05)]
        target: f64,
        /// Also write the comparison as CSV
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(args) => {
            let spec = args.resolve()?;
            let dirs = cmd_generate(&spec)?;
            println!(
                "wrote {} instances under {}",
                dirs.len(),
                spec.output_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => {
            let spec = args.resolve()?;
            let report = cmd_run(&spec)?;
            for (_, message) in report.failures() {
                eprintln!("warning: {message}");
            }
            let ok = report.successes().count();
            println!(
                "{}: {ok}/{} seeds completed, median final RRE {}, results in {}",
                spec.method,
                spec.seeds.len(),
                report
                    .median_final_rre()
                    .map_or_else(|| "-".to_string(), |v| format!("{v:.5}")),
                spec.output_dir.display()
            );
            Ok(if ok == 0 {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Compare { dirs, target, out } => {
            let stats = cmd_compare(&dirs, target)?;
            print!("{}", comparison_table(&stats, target));
            if let Some(path) = out {
                std::fs::write(&path, comparison_csv(&stats))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use bsum_cli::experiment::{resolve_output_dir, run_experiment, to_json};
use bsum_cli::fsutil::write_atomic;
use bsum_cli::{certify, compare, gen, parse_config, CliError};
use clap::{Parser, Subcommand};

/// Block successive upper-bound minimization experiments.
///
/// Exit codes: 0 success, 1 configuration or input error, 2 run failure,
/// 3 a diagnostic check reported a violation.
#[derive(Parser)]
#[command(name = "bsum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured run and write traces, reports and summary.csv.
    Run {
        config: PathBuf,
        /// Overrides BSUM_OUTPUT_DIR and the config's output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Check a recorded trace against the run it came from.
    Certify {
        trace: PathBuf,
        config: PathBuf,
        /// Run id, required when the config defines several runs.
        #[arg(long)]
        run: Option<String>,
        /// Report file (default: stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Join the optimality gaps of several traces on r.
    Compare {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write a seeded instance file, e.g. `gen lasso rows=20 cols=50 -o a.txt`.
    Gen {
        family: String,
        /// Model parameters as key=value.
        params: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn emit(text: &str, output: Option<&PathBuf>) -> Result<(), CliError> {
    match output {
        Some(p) => write_atomic(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Run { config, output_dir } => {
            let spec = parse_config(&config)?;
            let out = resolve_output_dir(&spec, output_dir.as_deref());
            let outcome = run_experiment(&spec, &out)?;
            for r in &outcome.runs {
                match &r.result {
                    Ok(rep) => {
                        let verdict = match rep.all_checks_pass {
                            Some(true) => "checks pass",
                            Some(false) if rep.any_violated => "CHECK VIOLATED",
                            Some(false) => "checks inconclusive",
                            None => "no checks",
                        };
                        let slope = rep.fitted_slope.map_or("-".to_string(), |s| format!("{s:.3}"));
                        println!("{}: final gap {:.3e}, slope {slope}, {verdict}", r.id, rep.final_delta);
                    }
                    Err(e) => eprintln!("{}: failed: {e}", r.id),
                }
            }
            println!("wrote {}", outcome.output_dir.join("summary.csv").display());
            Ok(outcome.exit_code())
        }
        Command::Certify { trace, config, run, output } => {
            let report = certify::certify(&trace, &config, run.as_deref())?;
            emit(&to_json(&report)?, output.as_ref())?;
            Ok(if report.any_violated { 3 } else { 0 })
        }
        Command::Compare { traces, output } => {
            let paths: Vec<&std::path::Path> = traces.iter().map(PathBuf::as_path).collect();
            emit(&compare::compare(&paths)?, output.as_ref())?;
            Ok(0)
        }
        Command::Gen { family, params, seed, output } => {
            let spec = gen::parse_model(&family, &params)?;
            write_atomic(&output, &gen::generate(&spec, seed)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

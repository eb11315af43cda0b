use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cyberinsure::cli::{run, Overrides};

/// Solve an experiment config and write report.csv / report.json.
#[derive(Parser)]
#[command(name = "cyberinsure", version)]
struct Args {
    /// Experiment config in `key = value` form.
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo trials for `validate`.
    #[arg(long)]
    trials: Option<u64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Ok(raw) = std::env::var("SOLVER_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("SOLVER_THREADS must be a positive integer, got '{raw}'");
                return ExitCode::from(1);
            }
        }
    }
    let overrides = Overrides {
        output: args.output,
        seed: args.seed,
        trials: args.trials,
    };
    match run(&args.config, &overrides) {
        Ok(outcome) => {
            for v in &outcome.experiment.violations {
                eprintln!("property violated: {v}");
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ammmse::harness::{load_experiment, run_experiment};
use ammmse::Algorithm;

/// Seeded precoder-design experiments. Flags override the config file,
/// which overrides built-in defaults.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory for traces and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (0 = one per core).
        #[arg(long)]
        workers: Option<usize>,
        /// Run only this algorithm.
        #[arg(long, value_parser = parse_algorithm)]
        algo: Option<Algorithm>,
        /// Number of channel realizations.
        #[arg(long)]
        seeds: Option<usize>,
        /// Attach the oracle suite to every solve.
        #[arg(long)]
        verify: bool,
    },
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: ammmse::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run { config, out, workers, algo, seeds, verify } = cli.command;
    let mut spec = match load_experiment(&config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    if let Some(dir) = out {
        spec.output_dir = dir;
    }
    if let Some(n) = workers {
        spec.parallel_workers = n;
    }
    if let Some(a) = algo {
        spec.algorithms = vec![a];
        spec.solver.algorithm = a;
    }
    if let Some(n) = seeds {
        if n == 0 {
            eprintln!("error: --seeds must be at least 1");
            return ExitCode::FAILURE;
        }
        spec.n_realizations = n;
    }
    spec.verify |= verify;

    match run_experiment(&spec) {
        Ok(summary) => {
            println!("{:<16} {:<7} {:>12} {:>10} {:>10} {:>9}", "point", "algo", "wsr_bpcu", "iters", "switch", "conv");
            for c in &summary.configs {
                let wsr = c.final_wsr_bits.map_or(f64::NAN, |s| s.mean);
                let it = c.iterations.map_or(f64::NAN, |s| s.mean);
                let sw = c.mean_switch_iteration.unwrap_or(f64::NAN);
                println!(
                    "{:<16} {:<7} {:>12.4} {:>10.2} {:>10.2} {:>9.2}",
                    c.label, c.algorithm, wsr, it, sw, c.convergence_rate
                );
                for r in c.oracle_reports.iter().filter(|r| !r.passed) {
                    println!("  oracle {} FAILED: max_rel_error {:.3e}", r.name, r.max_rel_error);
                }
            }
            println!("wrote {}", spec.output_dir.join("summary.json").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

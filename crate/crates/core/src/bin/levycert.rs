use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use levycert::runner::{self, RunOptions, Verb, VerdictRow};

#[derive(Parser)]
#[command(name = "levycert", version, about = "Coupling simulations and contraction certificates for Levy-driven SDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed (overrides run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Issue the requested certificates.
    Certify { config: PathBuf },
    /// Certificates, coupled ensembles, rate fits and verdicts.
    Simulate { config: PathBuf },
    /// Recompute verdicts for an output directory.
    Compare { dir: PathBuf },
    /// Compare simulated coupling times with the lattice oracle.
    Oracle { config: PathBuf },
}

fn print_verdicts(verdicts: &[VerdictRow]) {
    for v in verdicts {
        println!("{:<24} {:<15} {:<15} {}", v.scenario, v.certificate, format!("{:?}", v.verdict), v.detail);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let opts = RunOptions { seed: cli.seed, workers: cli.workers, out: cli.out };
    let (verb, config) = match cli.command {
        Command::Compare { dir } => {
            return match runner::compare_dir(&dir) {
                Ok(v) => {
                    print_verdicts(&v);
                    ExitCode::from(runner::verdict_exit_code(&v) as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
        Command::Certify { config } => (Verb::Certify, config),
        Command::Simulate { config } => (Verb::Simulate, config),
        Command::Oracle { config } => (Verb::Oracle, config),
    };
    let cfg = match runner::load_config(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match runner::run(&cfg, verb, &opts) {
        Ok(outcome) => {
            for c in &outcome.certificates {
                println!(
                    "{:<24} {:<15} C={:<12} lambda={:<12} {}",
                    c.scenario,
                    c.kind,
                    c.big_c.map_or("-".into(), |v| format!("{v:.6e}")),
                    c.lambda.map_or("-".into(), |v| format!("{v:.6e}")),
                    c.status
                );
            }
            print_verdicts(&outcome.verdicts);
            if !outcome.oracle.is_empty() {
                let worst = outcome.oracle.iter().map(|r| r.deviation_in_se).fold(0.0, f64::max);
                println!("oracle: worst deviation {worst:.3} binomial SE over {} points", outcome.oracle.len());
            }
            for e in &outcome.manifest.errors {
                eprintln!("warning: {e}");
            }
            println!("wrote {}", outcome.out_dir.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

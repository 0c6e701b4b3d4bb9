use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use somor::campaign::{self, RunConfig, RunOptions, Status};
use somor::io::load_system;
use somor::metrics::{sweep_with, FrequencyGrid};
use somor::Execution;

#[derive(Parser)]
#[command(name = "somor", version, about = "Structure-preserving model order reduction campaigns")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every combination of a campaign config and write curves and scores.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check a config without reducing anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the transfer function of a system manifest as CSV.
    Sweep {
        #[arg(long)]
        system: PathBuf,
        #[arg(long)]
        fmin: f64,
        #[arg(long)]
        fmax: f64,
        #[arg(long)]
        points: usize,
    },
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, jobs: Option<usize>) -> Result<ExitCode> {
    if jobs == Some(0) {
        bail!("--jobs must be at least 1");
    }
    let cfg = RunConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
    let output = campaign::run(&cfg, &RunOptions { out, seed, jobs })?;
    let mut failed = 0;
    for rep in &output.summary.combinations {
        let score = rep.score.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into());
        let reason = rep.reason.as_deref().unwrap_or("");
        println!("{:<28} {:<15} score {score:<8} {reason}", rep.tag, rep.status.name());
        if rep.status == Status::Failed {
            failed += 1;
        }
    }
    println!("wrote {}", output.out_dir.display());
    if failed > 0 {
        eprintln!("{failed} combination(s) failed");
    }
    Ok(ExitCode::SUCCESS)
}

fn validate(config: PathBuf) -> Result<ExitCode> {
    let cfg = RunConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
    let diags = campaign::validate(&cfg);
    if diags.is_empty() {
        println!("ok");
        return Ok(ExitCode::SUCCESS);
    }
    for d in &diags {
        println!("{d}");
    }
    Ok(ExitCode::from(1))
}

fn sweep(system: PathBuf, fmin: f64, fmax: f64, points: usize) -> Result<ExitCode> {
    let sys = load_system(&system).with_context(|| format!("loading {}", system.display()))?;
    let grid = FrequencyGrid::linspace_hz(fmin, fmax, points)?;
    let result = sweep_with(&sys, &grid, Execution::Parallel);
    let stdout = std::io::stdout();
    let mut w = std::io::BufWriter::new(stdout.lock());
    writeln!(w, "f_hz,output,input,re,im")?;
    for (f, h) in grid.hz().iter().zip(&result.values) {
        match h {
            Ok(h) => {
                for j in 0..h.ncols() {
                    for i in 0..h.nrows() {
                        writeln!(w, "{f:e},{i},{j},{:e},{:e}", h[(i, j)].re, h[(i, j)].im)?;
                    }
                }
            }
            Err(e) => eprintln!("{f} Hz: {e}"),
        }
    }
    w.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, out, seed, jobs } => run(config, out, seed, jobs),
        Command::Validate { config } => validate(config),
        Command::Sweep { system, fmin, fmax, points } => sweep(system, fmin, fmax, points),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

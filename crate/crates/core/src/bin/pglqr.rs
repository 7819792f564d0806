use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pglqr::cli::{bench_configs, run, Algorithm, RunConfig, RunSummary};
use pglqr::Error;

const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "pglqr", version, about = "Policy optimization for continuous-time LQR")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gradient, natural-gradient or Kleinman–Newton iteration (gd, ngd, kn).
    Descent(RunArgs),
    /// Continuous-time flow integration (flow:*).
    Flow(RunArgs),
    /// Projected gradient descent over a sparsity pattern (pgd).
    Pgd(RunArgs),
    /// Runs every method on both presets, one subdirectory per run.
    Bench(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stopping tolerance on the (projected) gradient norm.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap for discrete methods.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Curvature-adaptive stepsize for projected gradient descent.
    #[arg(long)]
    adaptive: bool,
}

impl RunArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        cfg.tol = self.tol.or(cfg.tol);
        if !cfg.algorithm.is_flow() {
            cfg.max_iter = self.max_iter.or(cfg.max_iter);
        }
        cfg.adaptive |= self.adaptive && cfg.algorithm == Algorithm::Pgd;
    }
}

fn single(args: &RunArgs, accepts: fn(&Algorithm) -> bool, command: &str) -> Result<Vec<RunConfig>, Error> {
    let path = args.config.as_ref().ok_or_else(|| Error::Config(format!("{command} needs --config")))?;
    let mut cfg = RunConfig::load(path)?;
    if !accepts(&cfg.algorithm) {
        return Err(Error::Config(format!("algorithm {} does not belong to `{command}`", cfg.algorithm)));
    }
    if args.max_iter.is_some() && cfg.algorithm.is_flow() {
        return Err(Error::Config("flows take a horizon, not --max-iter".into()));
    }
    if args.adaptive && cfg.algorithm != Algorithm::Pgd {
        return Err(Error::Config("--adaptive applies to pgd only".into()));
    }
    args.apply(&mut cfg);
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(vec![cfg])
}

fn configs(command: &Command) -> Result<Vec<RunConfig>, Error> {
    match command {
        Command::Descent(a) => single(a, Algorithm::is_descent, "descent"),
        Command::Flow(a) => single(a, Algorithm::is_flow, "flow"),
        Command::Pgd(a) => single(a, |alg| *alg == Algorithm::Pgd, "pgd"),
        Command::Bench(a) => {
            let out = a.out.clone().unwrap_or_else(|| PathBuf::from("bench"));
            let mut cfgs = bench_configs(&out);
            for cfg in &mut cfgs {
                a.apply(cfg);
            }
            Ok(cfgs)
        }
    }
}

fn report(s: &RunSummary) {
    let count = match (s.iterations, s.final_time) {
        (Some(n), _) => format!("{n} iterations"),
        (None, Some(t)) => format!("t = {t:.4}"),
        _ => String::new(),
    };
    println!(
        "{:<13} {:<14} {:<16} f = {:.12e}  gap = {:.3e}  |grad| = {:.3e}  {count}",
        s.plant,
        s.algorithm,
        format!("{:?}", s.status),
        s.f,
        s.f_gap,
        s.grad_norm
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PGLQR_LOG_LEVEL", "error")).init();
    let cli = Cli::parse();
    let cfgs = match configs(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mut code = 0;
    for cfg in &cfgs {
        match run(cfg) {
            Ok(summary) => {
                report(&summary);
                if !summary.converged {
                    eprintln!("error: {} stopped above tolerance ({:?})", summary.algorithm, summary.status);
                    code = code.max(EXIT_NOT_CONVERGED);
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        }
    }
    ExitCode::from(code)
}

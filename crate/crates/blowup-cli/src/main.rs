//! `blowup` — finite-time blow-up analysis from the command line.
//!
//! Exit codes: 0 decided/success, 1 usage or configuration error,
//! 2 undecided (Unknown verdict), 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CliError, Outcome};
use config::Config;

#[derive(Parser)]
#[command(
    name = "blowup",
    version,
    about = "Explosion verdicts, explosion-time distributions, Laplace transforms, \
             and Monte Carlo samples for ODEs and SDEs",
    after_help = "Problem definitions come from a flat key=value config file \
                  (--config); the flags below override file values, which override \
                  defaults. Set BLOWUP_LOG=info (or debug) for progress logging."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed (required for stochastic subcommands)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for CSV/JSON artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Distribution source: analytic, mc, pde, or all
    #[arg(long, global = true)]
    method: Option<String>,

    /// Tail exponent hint forwarded to the improper-integral classifier
    #[arg(long, global = true)]
    hint_tail_exponent: Option<f64>,

    /// Numerical tolerance override
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide explosion / no explosion / unknown with supporting evidence
    Verdict,
    /// Compute explosion-time distribution curves and cross-compare methods
    Dist,
    /// Laplace transform of the explosion time (CDF quadrature + resolvent ODE)
    Laplace,
    /// Draw Monte Carlo explosion-time samples to CSV
    Simulate,
    /// Check the noise-intensity growth hypothesis for f(t)
    H4check,
    /// Exact deterministic explosion time via the Osgood integral
    Odetime,
}

fn resolve_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::from_file(path).map_err(|e| CliError::Usage(e.to_string()))?,
        None => Config::default(),
    };
    // CLI flags override file values
    if let Some(seed) = cli.seed {
        cfg.set("seed", seed);
    }
    if let Some(method) = &cli.method {
        cfg.set("method", method);
    }
    if let Some(p) = cli.hint_tail_exponent {
        cfg.set("hint_tail_exponent", p);
    }
    if let Some(tol) = cli.tol {
        cfg.set("tol", tol);
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = resolve_config(cli)?;
    let out = cli.out.as_deref();
    let method = cfg.get_or("method", "all");
    match cli.command {
        Command::Verdict => commands::cmd_verdict(&cfg, out),
        Command::Dist => commands::cmd_dist(&cfg, out, &method),
        Command::Laplace => commands::cmd_laplace(&cfg, out, &method),
        Command::Simulate => commands::cmd_simulate(&cfg, out),
        Command::H4check => commands::cmd_h4check(&cfg, out),
        Command::Odetime => commands::cmd_odetime(&cfg, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("BLOWUP_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success; everything else is usage
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run(&cli) {
        Ok(Outcome::Decided) => ExitCode::SUCCESS,
        Ok(Outcome::Undecided) => ExitCode::from(2),
        Err(e @ CliError::Usage(_)) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
        Err(e @ CliError::Numerical(_)) => {
            eprintln!("{e}");
            ExitCode::from(3)
        }
    }
}

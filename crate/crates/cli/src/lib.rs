//! Command-line front end: `simulate`, `verify` and `transport`.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 invalid configuration or
//! input data, 3 numerical abort, 4 failed invariant.

pub mod config;
pub mod error;
pub mod simulate;
pub mod transport_cmd;
pub mod verify;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{io_error, CliError, CliResult};
use crate::transport_cmd::{KindArg, PrandtlArgs, UnitsArg};
use crate::verify::{parse_count, Suite, VerifyOptions};

#[derive(Debug, Parser)]
#[command(name = "polykin", version, about = "Polyatomic Boltzmann DSMC solver, verification suites and transport fits")]
pub struct Cli {
    /// Worker threads; 1 gives bit-reproducible runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a DSMC simulation from a JSON config.
    Simulate {
        config: PathBuf,
    },
    /// Run an invariant suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Random states; accepts float notation such as 1e6.
        #[arg(long, value_parser = parse_count, default_value = "100000")]
        samples: usize,
        /// Draws per regime for the (r, R) sampler tests.
        #[arg(long, value_parser = parse_count, default_value = "100000")]
        sampler_samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        zeta: f64,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        /// Largest moment order for `averaging`.
        #[arg(long, default_value_t = 40.0)]
        kmax: f64,
        #[arg(long, default_value_t = 2.0)]
        kstep: f64,
        /// Sampled states for `averaging`.
        #[arg(long, value_parser = parse_count)]
        states: Option<usize>,
        /// Monte-Carlo draws per state for `averaging`.
        #[arg(long, value_parser = parse_count)]
        mc: Option<usize>,
        /// Bootstrap resamples for `averaging`.
        #[arg(long, value_parser = parse_count)]
        bootstrap: Option<usize>,
    },
    /// Transport-coefficient pipeline.
    Transport {
        #[command(subcommand)]
        command: TransportCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum TransportCommand {
    /// Fit value ∝ (T/T0)^{1-ζ/2} to a `T,value` CSV.
    Fit {
        #[arg(long, value_enum)]
        kind: KindArg,
        csv: PathBuf,
        #[arg(long, default_value_t = polykin::transport::T0)]
        t0: f64,
        /// Measurement that K_scale is expressed against (default 1).
        #[arg(long)]
        reference: Option<f64>,
        /// Units file; defaults to `<stem>.units.json` beside the CSV.
        #[arg(long)]
        units: Option<PathBuf>,
    },
    /// Prandtl number from measured μ and κ.
    Prandtl {
        /// JSON gas description (name, mass, c_v_hat, mu0, kappa0, t0, units).
        #[arg(long)]
        gas: Option<PathBuf>,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        mass: Option<f64>,
        #[arg(long)]
        cv: Option<f64>,
        #[arg(long)]
        mu0: Option<f64>,
        #[arg(long)]
        kappa0: Option<f64>,
        #[arg(long, value_enum)]
        units: Option<UnitsArg>,
        #[arg(long)]
        t0: Option<f64>,
    },
    /// Admissible range p < p̄ for given α, ζ.
    FeasibleP {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long)]
        zeta: f64,
    },
    /// Recompute the bundled gas tables cell by cell.
    Tables {
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Exit 4 when any cell is outside tolerance.
        #[arg(long)]
        strict: bool,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::other(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &std::path::Path, value: &T) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::other(e.to_string()))?;
    std::fs::write(path, s + "\n").map_err(|e| io_error(path, e))
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { config } => {
            let out = simulate::simulate(&config, cli.threads)?;
            let s = &out.report.run;
            eprintln!(
                "{} steps, {} exchange and {} frozen collisions; drift mass {:.2e} momentum {:.2e} energy {:.2e}",
                s.steps, s.counters.exchange, s.counters.frozen, s.mass_drift, s.momentum_drift, s.energy_drift
            );
            eprintln!("wrote {} and {}", out.timeseries.display(), out.summary.display());
            Ok(())
        }
        Command::Verify {
            suite,
            samples,
            sampler_samples,
            seed,
            report,
            alpha,
            zeta,
            eta,
            kmax,
            kstep,
            states,
            mc,
            bootstrap,
        } => {
            let mut opts = VerifyOptions {
                samples,
                sampler_samples,
                seed,
                alpha,
                zeta,
                eta,
                kmax,
                kstep,
                ..VerifyOptions::default()
            };
            if let Some(n) = states {
                opts.ck.n_states = n;
            }
            if let Some(n) = mc {
                opts.ck.n_mc = n;
            }
            if let Some(n) = bootstrap {
                opts.ck.bootstrap = n;
            }
            let rep = verify::run_suite(suite, &opts)?;
            match &report {
                Some(path) => write_json(path, &rep)?,
                None => print_json(&rep)?,
            }
            for c in &rep.checks {
                if !c.passed {
                    let level = if c.hard { "FAIL" } else { "warn" };
                    eprintln!("{level} {}: {} (limit {}) {}", c.name, c.value, c.tolerance, c.detail);
                }
            }
            if rep.passed {
                Ok(())
            } else {
                let cases = serde_json::to_string(&rep.failing_cases).unwrap_or_default();
                let names: Vec<_> = rep.hard_failures().iter().map(|c| c.name.clone()).collect();
                Err(CliError::Invariant(format!(
                    "hard invariants failed: {}; failing cases: {cases}",
                    names.join(", ")
                )))
            }
        }
        Command::Transport { command } => match command {
            TransportCommand::Fit {
                kind,
                csv,
                t0,
                reference,
                units,
            } => print_json(&transport_cmd::fit(&csv, kind.into(), t0, reference, units.as_deref())?),
            TransportCommand::Prandtl {
                gas,
                name,
                mass,
                cv,
                mu0,
                kappa0,
                units,
                t0,
            } => print_json(&transport_cmd::prandtl(&PrandtlArgs {
                gas,
                name,
                mass,
                cv,
                mu0,
                kappa0,
                units,
                t0,
            })?),
            TransportCommand::FeasibleP { alpha, zeta } => print_json(&transport_cmd::feasible_p(alpha, zeta)?),
            TransportCommand::Tables { json, strict } => {
                let table = polykin::GasTable::load().map_err(|e| CliError::config(e.to_string()))?;
                let rep = polykin::transport::reproduce_tables(&table).map_err(|e| CliError::config(e.to_string()))?;
                let stdout = std::io::stdout();
                transport_cmd::write_tables(stdout.lock(), &rep, Some(&table))
                    .map_err(|e| CliError::other(e.to_string()))?;
                if let Some(path) = json {
                    write_json(&path, &rep)?;
                }
                if strict && rep.failures() > 0 {
                    return Err(CliError::Invariant(format!("{} cells outside tolerance", rep.failures())));
                }
                Ok(())
            }
        },
    }
}

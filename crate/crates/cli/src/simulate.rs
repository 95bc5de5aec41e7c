//! `simulate`: run the DSMC solver from a config file and write the time series and summary.

use std::io::Write;
use std::path::{Path, PathBuf};

use polykin::diagnostics::maxwellian_entropy;
use polykin::dsmc::{generation_envelope, relaxation_rates, run, validate_initial_data, RelaxationFit, RelaxationKind, RunSummary};
use polykin::stats::{mann_kendall, MannKendall};
use polykin::TimeSeriesRecord;
use serde::Serialize;

use crate::config::{RunConfig, ValidatedRun};
use crate::error::{io_error, CliError, CliResult};

/// Column label for a moment order: `m1_k3` for 3, `m1_k2.5` for 2.5.
pub fn moment_column(k: f64) -> String {
    format!("m1_k{k}")
}

/// Header of the time-series CSV.
pub fn csv_header(moment_orders: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["t", "mass", "px", "py", "pz", "energy"].iter().map(|s| s.to_string()).collect();
    h.extend(moment_orders.iter().map(|&k| moment_column(k)));
    h.extend(["entropy", "n_collisions_exchange", "n_collisions_frozen"].iter().map(|s| s.to_string()));
    h
}

/// Shortest representation that parses back to the same `f64`.
fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn write_timeseries<W: Write>(out: W, records: &[TimeSeriesRecord], moment_orders: &[f64]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::other(format!("writing time series: {e}"));
    w.write_record(csv_header(moment_orders)).map_err(err)?;
    for r in records {
        let mut row = vec![num(r.t), num(r.mass)];
        row.extend(r.momentum.iter().map(|&p| num(p)));
        row.push(num(r.energy));
        row.extend(r.moments.iter().map(|&m| num(m)));
        row.push(num(r.entropy));
        row.push(r.counters.exchange.to_string());
        row.push(r.counters.frozen.to_string());
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::other(format!("writing time series: {e}")))?;
    Ok(())
}

/// Writes `t, m1_k{k}, envelope_k{k}, ...`, each envelope scaled through the first record with `t > 0`.
pub fn write_envelope<W: Write>(out: W, records: &[TimeSeriesRecord], moment_orders: &[f64], zeta: f64) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::other(format!("writing envelope: {e}"));
    let mut header = vec!["t".to_string()];
    for &k in moment_orders {
        header.push(moment_column(k));
        header.push(format!("envelope_k{k}"));
    }
    w.write_record(&header).map_err(err)?;
    let Some(reference) = records.iter().find(|r| r.t > 0.0) else {
        return Ok(());
    };
    for r in records.iter().filter(|r| r.t > 0.0) {
        let mut row = vec![num(r.t)];
        for (j, &k) in moment_orders.iter().enumerate() {
            row.push(num(r.moments[j]));
            row.push(num(generation_envelope(k, zeta, r.t, reference.t, reference.moments[j])));
        }
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::other(format!("writing envelope: {e}")))?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Relaxation {
    pub stress_deviator: Option<RelaxationFit>,
    pub energy_imbalance: Option<RelaxationFit>,
}

#[derive(Debug, Serialize)]
pub struct EntropyReport {
    pub initial: f64,
    pub last: f64,
    /// `H(M)` of the Maxwellian with the conserved mass, momentum and energy.
    pub maxwellian: f64,
    /// Trend test on the recorded series; absent when entropy recording is off.
    pub trend: Option<MannKendall>,
}

#[derive(Debug, Serialize)]
pub struct SimulationReport {
    pub config: RunConfig,
    pub run: RunSummary,
    pub entropy: EntropyReport,
    pub relaxation: Relaxation,
    pub records: usize,
}

pub struct SimulateOutcome {
    pub report: SimulationReport,
    pub timeseries: PathBuf,
    pub summary: PathBuf,
}

/// Runs a simulation; `threads` overrides the solver's thread count.
pub fn simulate(config_path: &Path, threads: Option<usize>) -> CliResult<SimulateOutcome> {
    let mut cfg = RunConfig::from_path(config_path)?;
    if let Some(t) = threads {
        cfg.solver.threads = t;
    }
    let v = cfg.validate()?;
    simulate_validated(v)
}

pub fn simulate_validated(v: ValidatedRun) -> CliResult<SimulateOutcome> {
    let dir = v.create_output_dir()?;
    let ValidatedRun { species, kernel, config } = v;
    let mut ens = config
        .initial
        .distribution
        .sample(&species, config.initial.particles, config.initial.seed)
        .map_err(|e| CliError::config(format!("initial: {e}")))?;
    validate_initial_data(&ens).map_err(|e| CliError::config(format!("initial: {e}")))?;

    let out = run(&mut ens, &kernel, &config.solver).map_err(CliError::from_run)?;

    let entropies: Vec<f64> = out.records.iter().map(|r| r.entropy).collect();
    let equilibrium = ens.matched_maxwellian();
    let entropy = EntropyReport {
        initial: entropies.first().copied().unwrap_or(f64::NAN),
        last: entropies.last().copied().unwrap_or(f64::NAN),
        maxwellian: maxwellian_entropy(&equilibrium, &species).map_err(CliError::from_run)?,
        trend: if config.solver.entropy {
            mann_kendall(&entropies).ok()
        } else {
            None
        },
    };
    let relaxation = Relaxation {
        stress_deviator: relaxation_rates(&out.records, RelaxationKind::StressDeviator).ok(),
        energy_imbalance: relaxation_rates(&out.records, RelaxationKind::EnergyImbalance).ok(),
    };

    let ts_path = dir.join(&config.output.timeseries);
    let file = std::fs::File::create(&ts_path).map_err(|e| io_error(&ts_path, e))?;
    write_timeseries(std::io::BufWriter::new(file), &out.records, &config.solver.moment_orders)?;
    if config.output.envelope {
        let env_path = dir.join("envelope.csv");
        let file = std::fs::File::create(&env_path).map_err(|e| io_error(&env_path, e))?;
        write_envelope(std::io::BufWriter::new(file), &out.records, &config.solver.moment_orders, kernel.zeta())?;
    }
    let report = SimulationReport {
        records: out.records.len(),
        config,
        run: out.summary,
        entropy,
        relaxation,
    };
    let summary_path = dir.join(&report.config.output.summary);
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::other(e.to_string()))?;
    std::fs::write(&summary_path, json + "\n").map_err(|e| io_error(&summary_path, e))?;
    Ok(SimulateOutcome {
        report,
        timeseries: ts_path,
        summary: summary_path,
    })
}

//! `transport`: power-law fits, Prandtl numbers, the admissible `p` range and the gas tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use polykin::transport::{
    conjugate, feasible_p_range, fit_power_law, prandtl_from_measurements, reproduce_tables, rho_transition_consistent,
    FeasibleP, PowerLawFit, TablesReport,
};
use polykin::{GasSpec, GasTable, TransportDataset, TransportKind, UnitSystem};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindArg {
    Viscosity,
    Conductivity,
}

impl From<KindArg> for TransportKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Viscosity => TransportKind::Viscosity,
            KindArg::Conductivity => TransportKind::Conductivity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum UnitsArg {
    Si,
    Reduced,
}

impl From<UnitsArg> for UnitSystem {
    fn from(u: UnitsArg) -> Self {
        match u {
            UnitsArg::Si => UnitSystem::Si,
            UnitsArg::Reduced => UnitSystem::Reduced,
        }
    }
}

fn domain_to_config(e: polykin::Error) -> CliError {
    match e {
        polykin::Error::Domain(m) => CliError::config(m),
        polykin::Error::Insufficient(m) => CliError::config(m),
        polykin::Error::Data(m) => CliError::config(m),
        other => CliError::other(other.to_string()),
    }
}

/// Reads a `T,value` CSV. Errors carry the 1-based line number.
pub fn read_dataset(path: &Path, kind: TransportKind) -> CliResult<TransportDataset> {
    let file = std::fs::File::open(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let name = path.display();
    let headers = rdr
        .headers()
        .map_err(|e| CliError::config(format!("{name}: line 1: {e}")))?
        .clone();
    if headers.len() != 2 || &headers[0] != "T" || &headers[1] != "value" {
        return Err(CliError::config(format!(
            "{name}: line 1: header must be `T,value`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut points = Vec::new();
    let mut prev: Option<(f64, u64)> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::config(format!("{name}: line {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize, label: &str| -> CliResult<f64> {
            let s = &rec[i];
            let x: f64 = s
                .parse()
                .map_err(|_| CliError::config(format!("{name}: line {line}: {label} `{s}` is not a number")))?;
            if !(x > 0.0 && x.is_finite()) {
                return Err(CliError::config(format!("{name}: line {line}: {label} must be positive, got {s}")));
            }
            Ok(x)
        };
        let t = field(0, "T")?;
        let v = field(1, "value")?;
        if let Some((tp, lp)) = prev {
            if t <= tp {
                return Err(CliError::config(format!(
                    "{name}: line {line}: temperatures must be strictly increasing ({t} after {tp} on line {lp})"
                )));
            }
        }
        prev = Some((t, line));
        points.push((t, v));
    }
    TransportDataset::new(kind, points).map_err(|e| CliError::config(format!("{name}: {e}")))
}

#[derive(Debug, Deserialize)]
struct UnitsSidecar {
    #[serde(rename = "T")]
    t: String,
    value: String,
}

fn normalise_unit(s: &str) -> String {
    s.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            'μ' | 'µ' => 'u',
            '·' | '*' => '.',
            c => c.to_ascii_lowercase(),
        })
        .collect::<String>()
        .replace(['(', ')'], "")
}

/// Unit expected for each kind: μPa·s for viscosity, mW/(m·K) for conductivity.
pub fn expected_unit(kind: TransportKind) -> &'static str {
    match kind {
        TransportKind::Viscosity => "uPa.s",
        TransportKind::Conductivity => "mW/m.K",
    }
}

/// `<stem>.units.json` next to the CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.units.json"))
}

/// Checks the units sidecar. Returns a warning when no sidecar exists.
pub fn check_units(csv: &Path, explicit: Option<&Path>, kind: TransportKind) -> CliResult<Option<String>> {
    let path = explicit.map(Path::to_path_buf).unwrap_or_else(|| sidecar_path(csv));
    if !path.exists() {
        if explicit.is_some() {
            return Err(CliError::config(format!("{}: units file not found", path.display())));
        }
        return Ok(Some(format!(
            "no units file {}; assuming T in K and values in {}",
            path.display(),
            expected_unit(kind)
        )));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let u: UnitsSidecar =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if normalise_unit(&u.t) != "k" {
        return Err(CliError::config(format!("{}: T must be in K, got `{}`", path.display(), u.t)));
    }
    let want = expected_unit(kind);
    if normalise_unit(&u.value) != normalise_unit(want) {
        return Err(CliError::config(format!(
            "{}: value must be in {want} for {kind:?}, got `{}`",
            path.display(),
            u.value
        )));
    }
    Ok(None)
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub kind: TransportKind,
    pub t0: f64,
    pub reference: f64,
    pub fit: PowerLawFit,
    pub warnings: Vec<String>,
}

pub fn fit(csv: &Path, kind: TransportKind, t0: f64, reference: Option<f64>, units: Option<&Path>) -> CliResult<FitReport> {
    let mut warnings: Vec<String> = check_units(csv, units, kind)?.into_iter().collect();
    let data = read_dataset(csv, kind)?;
    let fit = fit_power_law(&data, t0, reference).map_err(domain_to_config)?;
    if fit.clamped {
        warnings.push(format!("zeta = {} lies outside (0, 2]; reported value clamped to {}", fit.zeta, fit.zeta_reported));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(FitReport {
        kind,
        t0,
        reference: reference.unwrap_or(1.0),
        fit,
        warnings,
    })
}

#[derive(Debug, Serialize)]
pub struct FeasiblePReport {
    pub alpha: f64,
    pub zeta: f64,
    #[serde(flatten)]
    pub range: FeasibleP,
    /// Conjugate exponent `q = p̄/(p̄-1)` of the binding limit.
    pub q_bar: f64,
    /// `ρ_q` is finite just below `p̄_ρ` and infinite just above.
    pub rho_transition_ok: bool,
}

pub fn feasible_p(alpha: f64, zeta: f64) -> CliResult<FeasiblePReport> {
    let range = feasible_p_range(alpha, zeta).map_err(domain_to_config)?;
    let rho_transition_ok = rho_transition_consistent(alpha, zeta, range.p_bar_rho).map_err(domain_to_config)?;
    Ok(FeasiblePReport {
        alpha,
        zeta,
        q_bar: conjugate(range.p_bar),
        range,
        rho_transition_ok,
    })
}

/// Prandtl inputs given on the command line instead of a gas file.
#[derive(Debug, Clone, Default)]
pub struct PrandtlArgs {
    pub gas: Option<PathBuf>,
    pub name: Option<String>,
    pub mass: Option<f64>,
    pub cv: Option<f64>,
    pub mu0: Option<f64>,
    pub kappa0: Option<f64>,
    pub units: Option<UnitsArg>,
    pub t0: Option<f64>,
}

pub fn gas_spec(a: &PrandtlArgs) -> CliResult<GasSpec> {
    if let Some(path) = &a.gas {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let mut g: GasSpec = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::config(format!("{}: field `{}`: {}", path.display(), e.path(), e.inner())))?;
        if let Some(u) = a.units {
            g.units = u.into();
        }
        if let Some(t0) = a.t0 {
            g.t0 = t0;
        }
        return Ok(g);
    }
    let need = |x: Option<f64>, flag: &str| x.ok_or_else(|| CliError::config(format!("--{flag} is required without --gas")));
    Ok(GasSpec {
        name: a.name.clone().unwrap_or_else(|| "gas".into()),
        mass: need(a.mass, "mass")?,
        c_v_hat: need(a.cv, "cv")?,
        mu0: need(a.mu0, "mu0")?,
        kappa0: need(a.kappa0, "kappa0")?,
        t0: a.t0.unwrap_or(polykin::transport::T0),
        units: a.units.map(Into::into).unwrap_or(UnitSystem::Si),
    })
}

#[derive(Debug, Serialize)]
pub struct PrandtlOutput {
    pub gas: GasSpec,
    pub pr: f64,
    pub alpha: f64,
    pub warnings: Vec<String>,
}

pub fn prandtl(a: &PrandtlArgs) -> CliResult<PrandtlOutput> {
    let gas = gas_spec(a)?;
    let r = prandtl_from_measurements(&gas).map_err(domain_to_config)?;
    for w in &r.warnings {
        log::warn!("{w}");
    }
    Ok(PrandtlOutput {
        gas,
        pr: r.pr,
        alpha: r.alpha,
        warnings: r.warnings,
    })
}

pub fn tables() -> CliResult<TablesReport> {
    let table = GasTable::load().map_err(|e| CliError::config(e.to_string()))?;
    reproduce_tables(&table).map_err(domain_to_config)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_else(|| "-".into())
}

/// Human-readable per-cell report.
pub fn write_tables<W: Write>(mut out: W, rep: &TablesReport, table: Option<&GasTable>) -> std::io::Result<()> {
    writeln!(out, "delta = 2(alpha + 1), tolerance {}", rep.tolerance)?;
    for c in &rep.delta {
        writeln!(
            out,
            "{} delta {:<3} {:<9} printed {:<8} computed {:<10.6} diff {:.2e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.gas,
            c.pressure,
            c.printed,
            c.computed,
            c.diff
        )?;
    }
    writeln!(out, "p_bar, tolerance {}", rep.tolerance)?;
    for c in &rep.p_bar {
        let omegas = table
            .and_then(|t| t.find(&c.gas, &c.pressure))
            .and_then(|g| g.scenarios.iter().find(|s| s.scenario == c.scenario))
            .map(|s| {
                format!(
                    " omega(Pr14) {} omega(Pr17) {} omega(nu/mu) {}",
                    fmt_opt(s.omega_fits.pr14.omega),
                    fmt_opt(s.omega_fits.pr17.omega),
                    fmt_opt(s.omega_fits.nu_mu.omega)
                )
            })
            .unwrap_or_default();
        writeln!(
            out,
            "{} p_bar {:<3} {:<9} ({:<3}) printed {:<8} computed {:<10.6} diff {:.2e} rounding [{:.5}, {:.5}]{} binding {}{}",
            if c.pass { "PASS" } else { "FAIL" },
            c.gas,
            c.pressure,
            c.scenario,
            c.printed,
            c.computed,
            c.diff,
            c.rounding_interval[0],
            c.rounding_interval[1],
            if c.within_rounding { "" } else { " (printed value outside)" },
            c.binding.join(", "),
            omegas
        )?;
    }
    for s in &rep.skipped {
        writeln!(out, "SKIP {s}")?;
    }
    let cells = rep.delta.len() + rep.p_bar.len();
    writeln!(
        out,
        "{} of {cells} cells within tolerance; restriction (ii) {}",
        cells - rep.failures(),
        if rep.restriction_ii_binds { "binds somewhere" } else { "never binds" }
    )
}

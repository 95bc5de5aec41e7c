//! Calibration of kernel parameters against transport data.
//!
//! A polytropic gas with dimensionless specific heat `ĉ_v` has `α = ĉ_v - 5/2`
//! and `δ = 2(α + 1)` internal degrees of freedom. The kernel exponent `ζ`
//! follows from the temperature dependence of shear viscosity or thermal
//! conductivity, both modelled as `value(T)/value(T₀) = (T/T₀)^{1-ζ/2}`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gas::UnitSystem;
use crate::kernel::rho_q;
use crate::stats::linear_regression;

/// Reference temperature of the bundled data, K.
pub const T0: f64 = 300.0;

/// Absolute tolerance for recomputed table entries (inputs are rounded to 4 decimals).
pub const TABLE_TOLERANCE: f64 = 2e-3;

const BUNDLED_TABLE: &str = include_str!("../data/table1.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaDelta {
    pub alpha: f64,
    pub delta: f64,
}

/// `α = ĉ_v - 5/2`, `δ = 2(α + 1)`.
pub fn alpha_from_cv(c_v_hat: f64) -> Result<AlphaDelta> {
    if !(c_v_hat > 1.5 && c_v_hat.is_finite()) {
        return Err(domain(format!("c_v_hat must exceed 3/2, got {c_v_hat}")));
    }
    let alpha = c_v_hat - 2.5;
    Ok(AlphaDelta {
        alpha,
        delta: 2.0 * (alpha + 1.0),
    })
}

/// Inverse of [`alpha_from_cv`].
pub fn cv_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > -1.0 && alpha.is_finite()) {
        return Err(domain(format!("alpha must exceed -1, got {alpha}")));
    }
    Ok(alpha + 2.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Viscosity,
    Conductivity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportDataset {
    pub kind: TransportKind,
    #[serde(default)]
    pub pressure: Option<String>,
    /// `(T [K], value)` pairs.
    pub points: Vec<(f64, f64)>,
}

impl TransportDataset {
    pub fn new(kind: TransportKind, points: Vec<(f64, f64)>) -> Result<Self> {
        let d = Self {
            kind,
            pressure: None,
            points,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, &(t, v)) in self.points.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(domain(format!("point {i}: temperature must be positive, got {t}")));
            }
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("point {i}: value must be positive, got {v}")));
            }
        }
        if let Some(w) = self.points.windows(2).position(|w| w[1].0 <= w[0].0) {
            return Err(domain(format!("temperatures must be strictly increasing (point {})", w + 1)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// `ζ = 2(1 - slope)`, unclamped.
    pub zeta: f64,
    /// `ζ` clamped to `(0, 2]`.
    pub zeta_reported: f64,
    pub clamped: bool,
    pub slope: f64,
    /// Fitted value at `T₀`.
    pub value_at_t0: f64,
    /// Fitted value at `T₀` divided by the reference measurement.
    pub k_scale: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `log value` against `log(T/T₀)`.
///
/// `reference` is the measurement that `K_scale` is expressed against; `None` uses 1.
pub fn fit_power_law(data: &TransportDataset, t0: f64, reference: Option<f64>) -> Result<PowerLawFit> {
    if data.points.len() < 3 {
        return Err(Error::Insufficient(format!(
            "power-law fit needs at least 3 points, got {}",
            data.points.len()
        )));
    }
    if !(t0 > 0.0) {
        return Err(domain(format!("T0 must be positive, got {t0}")));
    }
    for &(t, v) in &data.points {
        if !(t > 0.0 && v > 0.0) {
            return Err(domain("temperatures and values must be positive"));
        }
    }
    let x: Vec<f64> = data.points.iter().map(|(t, _)| (t / t0).ln()).collect();
    let y: Vec<f64> = data.points.iter().map(|(_, v)| v.ln()).collect();
    let fit = linear_regression(&x, &y).map_err(|e| match e {
        Error::Domain(_) => domain("degenerate data: all temperatures are equal"),
        other => other,
    })?;
    let zeta = 2.0 * (1.0 - fit.slope);
    let zeta_reported = zeta.clamp(f64::MIN_POSITIVE, 2.0);
    let reference = reference.unwrap_or(1.0);
    if !(reference > 0.0) {
        return Err(domain(format!("reference value must be positive, got {reference}")));
    }
    let value_at_t0 = fit.intercept.exp();
    Ok(PowerLawFit {
        zeta,
        zeta_reported,
        clamped: zeta_reported != zeta,
        slope: fit.slope,
        value_at_t0,
        k_scale: value_at_t0 / reference,
        r_squared: fit.r_squared,
        points: data.points.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasSpec {
    pub name: String,
    /// Molecular mass, kg (SI) or reduced.
    pub mass: f64,
    pub c_v_hat: f64,
    /// Shear viscosity at `T₀`: μPa·s in SI, plain number in reduced units.
    pub mu0: f64,
    /// Thermal conductivity at `T₀`: mW/(m·K) in SI, plain number in reduced units.
    pub kappa0: f64,
    #[serde(default = "default_t0")]
    pub t0: f64,
    #[serde(default)]
    pub units: UnitSystem,
}

fn default_t0() -> f64 {
    T0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrandtlReport {
    pub pr: f64,
    pub alpha: f64,
    pub warnings: Vec<String>,
}

/// `Pr = (α + 7/2)(k_B/m)(μ₀/κ₀)`.
pub fn prandtl_from_measurements(gas: &GasSpec) -> Result<PrandtlReport> {
    if !(gas.mass > 0.0) {
        return Err(domain(format!("mass must be positive, got {}", gas.mass)));
    }
    if !(gas.kappa0 > 0.0) {
        return Err(domain(format!("kappa0 must be positive, got {}", gas.kappa0)));
    }
    if !(gas.mu0 > 0.0) {
        return Err(domain(format!("mu0 must be positive, got {}", gas.mu0)));
    }
    let alpha = alpha_from_cv(gas.c_v_hat)?.alpha;
    let (mu, kappa) = match gas.units {
        UnitSystem::Si => (gas.mu0 * 1e-6, gas.kappa0 * 1e-3),
        UnitSystem::Reduced => (gas.mu0, gas.kappa0),
    };
    let pr = (alpha + 3.5) * gas.units.boltzmann() / gas.mass * mu / kappa;
    let mut warnings = Vec::new();
    if !(0.3..=1.5).contains(&pr) {
        warnings.push(format!(
            "Pr = {pr:.4} is outside the plausible range [0.3, 1.5]; check the units of mass, mu0 and kappa0"
        ));
    }
    Ok(PrandtlReport { pr, alpha, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PConstraint {
    pub name: String,
    pub applies: bool,
    /// Upper bound on `p` (infinite when the constraint does not apply).
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibleP {
    /// Binding upper limit over all constraints, `+∞` if none applies.
    pub p_bar: f64,
    /// Limit from the `ρ_q` finiteness constraints (i) and (ii) alone.
    pub p_bar_rho: f64,
    pub constraints: Vec<PConstraint>,
    pub binding: Vec<String>,
}

/// Admissible range `p < p̄`:
/// (i) if `α < ζ/2`, `p < (1+ζ/2)/(ζ/2-α)`; (ii) if `α < -1/2`, `p < -1/(2α+1)`;
/// (iii) `pα > -1`, which bounds `p < -1/α` when `α < 0`.
pub fn feasible_p_range(alpha: f64, zeta: f64) -> Result<FeasibleP> {
    if !(alpha > -1.0 && alpha.is_finite()) {
        return Err(domain(format!("alpha must exceed -1, got {alpha}")));
    }
    if !(zeta > 0.0 && zeta <= 2.0) {
        return Err(domain(format!("zeta must lie in (0, 2], got {zeta}")));
    }
    let z2 = 0.5 * zeta;
    let c1 = if alpha < z2 {
        PConstraint {
            name: "(i) alpha < zeta/2".into(),
            applies: true,
            bound: (1.0 + z2) / (z2 - alpha),
        }
    } else {
        PConstraint {
            name: "(i) alpha < zeta/2".into(),
            applies: false,
            bound: f64::INFINITY,
        }
    };
    let c2 = PConstraint {
        name: "(ii) alpha < -1/2".into(),
        applies: alpha < -0.5,
        bound: if alpha < -0.5 { -1.0 / (2.0 * alpha + 1.0) } else { f64::INFINITY },
    };
    let c3 = PConstraint {
        name: "(iii) p alpha > -1".into(),
        applies: alpha < 0.0,
        bound: if alpha < 0.0 { -1.0 / alpha } else { f64::INFINITY },
    };
    let p_bar_rho = c1.bound.min(c2.bound);
    let p_bar = p_bar_rho.min(c3.bound);
    let binding = [&c1, &c2, &c3]
        .iter()
        .filter(|c| c.applies && c.bound == p_bar)
        .map(|c| c.name.clone())
        .collect();
    Ok(FeasibleP {
        p_bar,
        p_bar_rho,
        constraints: vec![c1, c2, c3],
        binding,
    })
}

/// `q = p/(p-1)`, the conjugate exponent.
pub fn conjugate(p: f64) -> f64 {
    if p == 1.0 {
        f64::INFINITY
    } else if p.is_infinite() {
        1.0
    } else {
        p / (p - 1.0)
    }
}

/// Whether `ρ_q` is finite just below and infinite just above `p̄_ρ` (factors `0.99`, `1.01`).
pub fn rho_transition_consistent(alpha: f64, zeta: f64, p_bar_rho: f64) -> Result<bool> {
    if p_bar_rho.is_infinite() {
        return Ok(rho_q(alpha, zeta, 1.0)?.is_finite());
    }
    let below = rho_q(alpha, zeta, conjugate(0.99 * p_bar_rho))?;
    let above = rho_q(alpha, zeta, conjugate(1.01 * p_bar_rho))?;
    Ok(below.is_finite() && above.is_infinite())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Joint,
    Infeasible,
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaCell {
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub omega: Option<f64>,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaFits {
    pub pr14: OmegaCell,
    pub pr17: OmegaCell,
    pub nu_mu: OmegaCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub scenario: String,
    pub zeta: Option<f64>,
    pub p_bar: Option<f64>,
    pub omega_fits: OmegaFits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasRecord {
    pub gas: String,
    pub pressure: String,
    pub pressure_bar: f64,
    pub t0: f64,
    pub t1: f64,
    pub alpha: f64,
    pub delta: f64,
    pub scenarios: Vec<ScenarioRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasTable {
    #[serde(default)]
    pub description: String,
    pub entries: Vec<GasRecord>,
}

impl GasTable {
    pub fn parse(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    /// Bundled table, or `$POLYKIN_DATA_DIR/table1.json` when that variable is set.
    pub fn load() -> Result<Self> {
        match std::env::var_os("POLYKIN_DATA_DIR") {
            Some(dir) => {
                let path = PathBuf::from(dir).join("table1.json");
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
                Self::parse(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
            }
            None => Self::bundled(),
        }
    }

    pub fn bundled() -> Result<Self> {
        Self::parse(BUNDLED_TABLE)
    }

    pub fn find(&self, gas: &str, pressure: &str) -> Option<&GasRecord> {
        self.entries
            .iter()
            .find(|e| e.gas.eq_ignore_ascii_case(gas) && e.pressure.eq_ignore_ascii_case(pressure))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaCell {
    pub gas: String,
    pub pressure: String,
    pub alpha: f64,
    pub printed: f64,
    pub computed: f64,
    pub diff: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PBarCell {
    pub gas: String,
    pub pressure: String,
    pub scenario: String,
    pub alpha: f64,
    pub zeta: f64,
    pub printed: f64,
    pub computed: f64,
    pub diff: f64,
    pub pass: bool,
    /// Range of `p̄` over inputs within ±5e-5 of the printed `α`, `ζ`.
    pub rounding_interval: [f64; 2],
    /// Printed value lies within the rounding interval (widened by its own rounding).
    pub within_rounding: bool,
    pub binding: Vec<String>,
    pub rho_transition_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TablesReport {
    pub tolerance: f64,
    pub delta: Vec<DeltaCell>,
    pub p_bar: Vec<PBarCell>,
    pub skipped: Vec<String>,
    /// Restriction (ii) never binds when every `α ≥ -1/2`.
    pub restriction_ii_binds: bool,
    pub all_pass: bool,
}

impl TablesReport {
    pub fn failures(&self) -> usize {
        self.delta.iter().filter(|c| !c.pass).count() + self.p_bar.iter().filter(|c| !c.pass).count()
    }
}

/// Recomputes `δ = 2(α+1)` for every row and `p̄` for every scenario with data.
pub fn reproduce_tables(table: &GasTable) -> Result<TablesReport> {
    let tol = TABLE_TOLERANCE;
    let h = 5e-5;
    let mut delta = Vec::new();
    let mut p_bar = Vec::new();
    let mut skipped = Vec::new();
    let mut restriction_ii_binds = false;
    for e in &table.entries {
        let computed = alpha_from_cv(cv_from_alpha(e.alpha)?)?.delta;
        let diff = (computed - e.delta).abs();
        delta.push(DeltaCell {
            gas: e.gas.clone(),
            pressure: e.pressure.clone(),
            alpha: e.alpha,
            printed: e.delta,
            computed,
            diff,
            pass: diff <= tol,
        });
        for s in &e.scenarios {
            let (zeta, printed) = match (s.zeta, s.p_bar) {
                (Some(z), Some(p)) => (z, p),
                _ => {
                    skipped.push(format!("{} {} ({}): no data", e.gas, e.pressure, s.scenario));
                    continue;
                }
            };
            let fp = feasible_p_range(e.alpha, zeta)?;
            restriction_ii_binds |= fp.constraints[1].applies;
            let lo = feasible_p_range(e.alpha - h, (zeta + h).min(2.0))?.p_bar_rho;
            let hi = feasible_p_range(e.alpha + h, zeta - h)?.p_bar_rho;
            let diff = (fp.p_bar_rho - printed).abs();
            p_bar.push(PBarCell {
                gas: e.gas.clone(),
                pressure: e.pressure.clone(),
                scenario: s.scenario.clone(),
                alpha: e.alpha,
                zeta,
                printed,
                computed: fp.p_bar_rho,
                diff,
                pass: diff <= tol,
                rounding_interval: [lo, hi],
                within_rounding: printed >= lo - h && printed <= hi + h,
                binding: fp.binding.clone(),
                rho_transition_ok: rho_transition_consistent(e.alpha, zeta, fp.p_bar_rho)?,
            });
        }
    }
    let all_pass = delta.iter().all(|c| c.pass) && p_bar.iter().all(|c| c.pass);
    Ok(TablesReport {
        tolerance: tol,
        delta,
        p_bar,
        skipped,
        restriction_ii_binds,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn alpha_examples() {
        let a = alpha_from_cv(2.5).unwrap();
        assert_eq!((a.alpha, a.delta), (0.0, 2.0));
        assert_relative_eq!(alpha_from_cv(2.5035).unwrap().alpha, 0.0035, epsilon = 1e-12);
        assert_relative_eq!(alpha_from_cv(cv_from_alpha(-0.0304).unwrap()).unwrap().delta, 1.9392, epsilon = 1e-12);
        assert!(alpha_from_cv(1.5).is_err());
    }

    #[test]
    fn prandtl_reduced_example() {
        let g = GasSpec {
            name: "synthetic".into(),
            mass: 1.0,
            c_v_hat: 2.5,
            mu0: 2.0,
            kappa0: 10.0,
            t0: T0,
            units: UnitSystem::Reduced,
        };
        let r = prandtl_from_measurements(&g).unwrap();
        assert_relative_eq!(r.pr, 0.7, max_relative = 1e-14);
        assert!(r.warnings.is_empty());
        let doubled = prandtl_from_measurements(&GasSpec { mu0: 4.0, ..g.clone() }).unwrap();
        assert_relative_eq!(doubled.pr, 1.4, max_relative = 1e-14);
        assert!(prandtl_from_measurements(&GasSpec { kappa0: 0.0, ..g }).is_err());
    }

    #[test]
    fn feasible_p_unconstrained() {
        let f = feasible_p_range(1.0, 1.0).unwrap();
        assert_eq!(f.p_bar, f64::INFINITY);
        assert!(f.binding.is_empty());
    }

    #[test]
    fn feasible_p_negative_alpha() {
        let f = feasible_p_range(-0.7, 1.0).unwrap();
        // (i) 1.5/1.2 = 1.25, (ii) 1/0.4 = 2.5, (iii) 1/0.7
        assert_relative_eq!(f.p_bar, 1.25, max_relative = 1e-14);
        assert_relative_eq!(f.constraints[1].bound, 2.5, max_relative = 1e-14);
        assert_eq!(f.binding, vec!["(i) alpha < zeta/2".to_string()]);
    }

    #[test]
    fn fit_requires_three_points() {
        let d = TransportDataset {
            kind: TransportKind::Viscosity,
            pressure: None,
            points: vec![(300.0, 1.0), (400.0, 2.0)],
        };
        assert!(fit_power_law(&d, T0, None).is_err());
    }

    #[test]
    fn constant_data_gives_zeta_two() {
        let d = TransportDataset::new(TransportKind::Conductivity, vec![(300.0, 5.0), (400.0, 5.0), (500.0, 5.0)]).unwrap();
        let f = fit_power_law(&d, T0, Some(5.0)).unwrap();
        assert_relative_eq!(f.zeta, 2.0, epsilon = 1e-12);
        assert_relative_eq!(f.k_scale, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn bundled_table_parses() {
        let t = GasTable::bundled().unwrap();
        assert_eq!(t.entries.len(), 10);
        assert!(t.find("n2", "low").is_some());
    }
}

//! `verify`: invariant suites over randomized inputs.
//!
//! Every suite produces a [`VerifyReport`]. A failed hard check makes the command
//! exit with code 4; the report then carries up to [`MAX_DUMP`] failing inputs in
//! a form that can be replayed.

use std::f64::consts::PI;

use polykin::collision::{apply_exchange_collision, apply_frozen_collision, sample_hemisphere, sample_sphere};
use polykin::diagnostics::{empirical_ck, energy_identity_check};
use polykin::kernel::{
    bracket_sandwich_slack, d_alpha_mass, d_alpha_weight, evaluate_physical_kernel, kappa_bounds,
    kappa_upper_closed_form, pair_rate_physical, rho_q, rho_q_by_quadrature, rho_q_exponents, sandwich_bounds,
};
use polykin::quad::{integrate_rectangle, TanhSinh};
use polykin::stats::{chi_square, ks_one_sample};
use polykin::{AngularModel, CkConfig, CollisionSampler, KernelParams, KernelSettings, PairState, SimRng, Vec3};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

/// Failing inputs kept in a report.
pub const MAX_DUMP: usize = 20;

/// Conservation tolerance for single collisions.
pub const CONSERVATION_TOL: f64 = 1e-12;
/// Tolerance on the energy-identity representation and its bounds.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Significance level of the sampler goodness-of-fit tests.
pub const SIGNIFICANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Collision,
    Averaging,
    KernelConstants,
    EnergyIdentity,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOptions {
    /// Random states (collision, energy-identity, kernel-constants sandwich checks).
    pub samples: usize,
    /// Draws per regime for the `(r, R)` sampler tests.
    pub sampler_samples: usize,
    pub seed: u64,
    pub alpha: f64,
    pub zeta: f64,
    pub eta: f64,
    pub kmax: f64,
    pub kstep: f64,
    pub ck: CkConfig,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 100_000,
            sampler_samples: 100_000,
            seed: 1,
            alpha: 0.0,
            zeta: 1.0,
            eta: 0.5,
            kmax: 40.0,
            kstep: 2.0,
            ck: CkConfig::default(),
        }
    }
}

impl VerifyOptions {
    pub fn kernel(&self) -> CliResult<KernelParams> {
        let settings = KernelSettings {
            zeta: self.zeta,
            eta: self.eta,
            ..KernelSettings::default()
        };
        KernelParams::new(self.alpha, settings).map_err(|e| CliError::config(e.to_string()))
    }

    fn orders(&self) -> CliResult<Vec<f64>> {
        if !(self.kstep > 0.0) || !(self.kmax >= 0.0) {
            return Err(CliError::config(format!(
                "kmax must be non-negative and kstep positive, got kmax {} and kstep {}",
                self.kmax, self.kstep
            )));
        }
        let n = (self.kmax / self.kstep + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| i as f64 * self.kstep).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Hard checks decide the exit code; soft ones are reported only.
    pub hard: bool,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub options: VerifyOptions,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub failing_cases: Vec<Value>,
    /// Suite-specific output, e.g. the full `C_k` table for `averaging`.
    pub details: Value,
}

impl VerifyReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn hard_failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.hard && !c.passed).collect()
    }
}

#[derive(Default)]
struct Recorder {
    checks: Vec<Check>,
    cases: Vec<Value>,
}

impl Recorder {
    /// Records `value <= tolerance`.
    fn at_most(&mut self, name: &str, value: f64, tolerance: f64, detail: impl Into<String>) {
        self.push(name, true, value <= tolerance, value, tolerance, detail);
    }

    /// Records `value >= tolerance`.
    fn at_least(&mut self, name: &str, value: f64, tolerance: f64, detail: impl Into<String>) {
        self.push(name, true, value >= tolerance, value, tolerance, detail);
    }

    fn push(&mut self, name: &str, hard: bool, passed: bool, value: f64, tolerance: f64, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            hard,
            passed,
            value,
            tolerance,
            detail: detail.into(),
        });
    }

    fn dump(&mut self, case: Value) {
        if self.cases.len() < MAX_DUMP {
            self.cases.push(case);
        }
    }

    fn finish(self, suite: Suite, options: &VerifyOptions, details: Value) -> VerifyReport {
        VerifyReport {
            suite,
            options: options.clone(),
            passed: self.checks.iter().all(|c| !c.hard || c.passed),
            checks: self.checks,
            failing_cases: self.cases,
            details,
        }
    }
}

fn state_json(p: &PairState) -> Value {
    json!({
        "v": [p.v.x, p.v.y, p.v.z],
        "internal": p.internal,
        "v_star": [p.v_star.x, p.v_star.y, p.v_star.z],
        "internal_star": p.internal_star,
        "mass": p.mass,
    })
}

fn vec_json(v: &Vec3) -> Value {
    json!([v.x, v.y, v.z])
}

/// Random pair over six decades of energy: Gaussian velocities and exponential
/// internal energies at a common log-uniform scale, log-uniform mass.
pub fn random_state(rng: &mut SimRng) -> PairState {
    let scale = 10f64.powf(rng.random_range(-1.5..1.5));
    let mass = 10f64.powf(rng.random_range(-1.0..1.0));
    let mut g = || {
        let z: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        Vec3::from(z) * scale
    };
    let (v, vs) = (g(), g());
    let e = Exp::new(1.0).expect("unit rate");
    let i = mass * scale * scale * e.sample(rng);
    let is = mass * scale * scale * e.sample(rng);
    PairState::new(v, i, vs, is, mass).expect("finite state")
}

fn momentum(v: &Vec3, vs: &Vec3, m: f64) -> Vec3 {
    (v + vs) * m
}

fn energy(v: &Vec3, i: f64, vs: &Vec3, is: f64, m: f64) -> f64 {
    0.5 * m * (v.norm_squared() + vs.norm_squared()) + i + is
}

fn bracket_energy(v: &Vec3, i: f64, vs: &Vec3, is: f64, m: f64) -> f64 {
    2.0 + 0.5 * (v.norm_squared() + vs.norm_squared()) + (i + is) / m
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> CliResult<VerifyReport> {
    match suite {
        Suite::Collision => collision_suite(opts),
        Suite::Averaging => averaging_suite(opts),
        Suite::KernelConstants => kernel_constants_suite(opts),
        Suite::EnergyIdentity => energy_identity_suite(opts),
    }
}

/// Conservation of exchange and frozen collisions, then sampler goodness of fit.
pub fn collision_suite(opts: &VerifyOptions) -> CliResult<VerifyReport> {
    let mut rec = Recorder::default();
    let details = conservation(opts, &mut rec)?;
    let sampler = sampler_checks(opts, &mut rec)?;
    Ok(rec.finish(Suite::Collision, opts, json!({ "conservation": details, "sampler": sampler })))
}

/// Only the conservation half of the collision suite.
pub fn conservation_suite(opts: &VerifyOptions) -> CliResult<VerifyReport> {
    let mut rec = Recorder::default();
    let details = conservation(opts, &mut rec)?;
    Ok(rec.finish(Suite::Collision, opts, details))
}

/// Only the sampler half of the collision suite.
pub fn sampler_suite(opts: &VerifyOptions) -> CliResult<VerifyReport> {
    let mut rec = Recorder::default();
    let details = sampler_checks(opts, &mut rec)?;
    Ok(rec.finish(Suite::Collision, opts, details))
}

fn conservation(opts: &VerifyOptions, rec: &mut Recorder) -> CliResult<Value> {
    let kp = opts.kernel()?;
    let sampler = CollisionSampler::new(&kp).map_err(|e| CliError::config(e.to_string()))?;
    let mut rng = SimRng::seed_from_u64(opts.seed);
    let mut worst = [0.0f64; 5];
    let mut negative_internal = 0usize;
    let mut zero_rate = 0usize;
    for _ in 0..opts.samples {
        let p = random_state(&mut rng);
        let Ok((sigma, r, big_r)) = sampler.sample_exchange(&p, &mut rng) else {
            zero_rate += 1;
            continue;
        };
        let o = apply_exchange_collision(&p, &sigma, r, big_r).map_err(|e| CliError::other(e.to_string()))?;
        let m = p.mass;
        let p0 = momentum(&p.v, &p.v_star, m);
        let e0 = energy(&p.v, p.internal, &p.v_star, p.internal_star, m);
        let b0 = bracket_energy(&p.v, p.internal, &p.v_star, p.internal_star, m);
        let mom_scale = m * (p.v.norm() + p.v_star.norm()) + f64::MIN_POSITIVE;
        let split = (1.0 - big_r) * p.energy();
        let errs = [
            (momentum(&o.v, &o.v_star, m) - p0).norm() / mom_scale,
            (energy(&o.v, o.internal, &o.v_star, o.internal_star, m) - e0).abs() / e0,
            (bracket_energy(&o.v, o.internal, &o.v_star, o.internal_star, m) - b0).abs() / b0,
            (o.internal + o.internal_star - split).abs() / split.max(f64::MIN_POSITIVE),
            0.0,
        ];
        let negative = o.internal < 0.0 || o.internal_star < 0.0;
        negative_internal += usize::from(negative);
        if errs[..4].iter().any(|e| *e > CONSERVATION_TOL || !e.is_finite()) || negative {
            rec.dump(json!({
                "kind": "exchange",
                "state": state_json(&p),
                "sigma": vec_json(&sigma),
                "r": r,
                "R": big_r,
                "errors": { "momentum": errs[0], "energy": errs[1], "bracket_energy": errs[2], "internal_split": errs[3] },
            }));
        }
        for j in 0..4 {
            worst[j] = worst[j].max(errs[j]);
        }

        let sigma = sample_sphere(&mut rng);
        let f = apply_frozen_collision(&p, &sigma).map_err(|e| CliError::other(e.to_string()))?;
        let u = (p.v - p.v_star).norm();
        let speed_err = ((f.v - f.v_star).norm() - u).abs() / u.max(f64::MIN_POSITIVE);
        let bit_exact = f.internal.to_bits() == p.internal.to_bits() && f.internal_star.to_bits() == p.internal_star.to_bits();
        let fe = (energy(&f.v, f.internal, &f.v_star, f.internal_star, m) - e0).abs() / e0;
        let fp = (momentum(&f.v, &f.v_star, m) - p0).norm() / mom_scale;
        worst[4] = worst[4].max(speed_err);
        worst[1] = worst[1].max(fe);
        worst[0] = worst[0].max(fp);
        if !bit_exact || speed_err > CONSERVATION_TOL || fe > CONSERVATION_TOL || fp > CONSERVATION_TOL {
            rec.dump(json!({
                "kind": "frozen",
                "state": state_json(&p),
                "sigma": vec_json(&sigma),
                "internal_bit_exact": bit_exact,
                "errors": { "relative_speed": speed_err, "energy": fe, "momentum": fp },
            }));
        }
        if !bit_exact {
            worst[4] = f64::INFINITY;
        }
    }
    let n = opts.samples;
    rec.at_most("momentum", worst[0], CONSERVATION_TOL, format!("max relative momentum error over {n} exchange and {n} frozen collisions"));
    rec.at_most("energy", worst[1], CONSERVATION_TOL, "max relative energy error");
    rec.at_most("bracket_energy", worst[2], CONSERVATION_TOL, "max relative error of the summed squared brackets");
    rec.at_most("internal_split", worst[3], CONSERVATION_TOL, "max relative error of I' + I'* = (1-R)E");
    rec.at_most("internal_non_negative", negative_internal as f64, 0.0, "exchange outcomes with negative internal energy");
    rec.at_most(
        "frozen_internal_and_speed",
        worst[4],
        CONSERVATION_TOL,
        "frozen collisions: I bit-exact (infinite value otherwise) and max relative |u| error",
    );
    if zero_rate > 0 {
        rec.push("zero_rate_states", false, true, zero_rate as f64, 0.0, "states skipped because every exchange term vanished");
    }
    Ok(json!({
        "collisions": n,
        "max_errors": {
            "momentum": worst[0], "energy": worst[1], "bracket_energy": worst[2],
            "internal_split": worst[3], "frozen_relative_speed": worst[4],
        },
        "zero_rate_states": zero_rate,
    }))
}

/// Named `(kernel, pair)` settings for the sampler tests.
pub fn sampler_regimes() -> Vec<(&'static str, KernelParams, PairState)> {
    let kp = |alpha: f64, zeta: f64, eta: f64| {
        KernelParams::new(
            alpha,
            KernelSettings {
                zeta,
                eta,
                ..KernelSettings::default()
            },
        )
        .expect("valid regime")
    };
    let st = |v: [f64; 3], i: f64, vs: [f64; 3], is: f64| {
        PairState::new(Vec3::from(v), i, Vec3::from(vs), is, 1.0).expect("valid regime")
    };
    vec![
        ("translational", kp(0.0, 1.0, 0.5), st([3.0, 0.0, 0.0], 0.1, [-3.0, 0.0, 0.0], 0.2)),
        ("h2-internal", kp(-0.0304, 0.6076, 1.0), st([0.1, 0.0, 0.0], 4.0, [0.0, 0.0, 0.0], 0.5)),
        ("mixed", kp(0.5, 2.0, 0.5), st([1.0, 1.0, 0.0], 1.0, [-1.0, 0.0, 0.5], 2.0)),
        ("strong-singular", kp(-0.4, 0.3, 2.0), st([0.5, 0.0, 0.0], 1.5, [0.0, 0.5, 0.0], 0.2)),
    ]
}

/// Probabilities of the `nr × nbig` grid cells in `(r, R)` under `B̃ d_α`, by quadrature.
pub fn cell_probabilities(p: &PairState, kp: &KernelParams, nr: usize, nbig: usize) -> Vec<f64> {
    let alpha = kp.alpha();
    let density = |r: f64, s: f64| {
        let big_r = 1.0 - s;
        evaluate_physical_kernel(p, r, big_r, kp).unwrap_or(0.0) * d_alpha_weight(r, big_r, alpha).unwrap_or(0.0)
    };
    let outer = TanhSinh::with_tol(1e-9);
    let inner = TanhSinh::with_tol(1e-10);
    let mut probs = vec![0.0; nr * nbig];
    for i in 0..nr {
        for j in 0..nbig {
            let r = (i as f64 / nr as f64, (i + 1) as f64 / nr as f64);
            // s = 1 - R keeps the (1-R)^{2α+1} singularity at an endpoint
            let s = (1.0 - (j + 1) as f64 / nbig as f64, 1.0 - j as f64 / nbig as f64);
            probs[i * nbig + j] = integrate_rectangle(&outer, &inner, density, r, s, &[], |_| vec![]).value;
        }
    }
    let total: f64 = probs.iter().sum();
    probs.iter().map(|q| q / total).collect()
}

fn binned_p_value(samples: &[(f64, f64)], probs: &[f64], nr: usize, nbig: usize) -> CliResult<f64> {
    let mut observed = vec![0.0; nr * nbig];
    for &(r, big_r) in samples {
        let i = ((r * nr as f64) as usize).min(nr - 1);
        let j = ((big_r * nbig as f64) as usize).min(nbig - 1);
        observed[i * nbig + j] += 1.0;
    }
    let n = samples.len() as f64;
    let expected: Vec<f64> = probs.iter().map(|q| q * n).collect();
    chi_square(&observed, &expected, 0).map(|t| t.p_value).map_err(|e| CliError::other(e.to_string()))
}

fn sampler_checks(opts: &VerifyOptions, rec: &mut Recorder) -> CliResult<Value> {
    let n = opts.sampler_samples;
    let mut out = Vec::new();
    for (idx, (name, kp, p)) in sampler_regimes().into_iter().enumerate() {
        let sampler = CollisionSampler::new(&kp).map_err(|e| CliError::other(e.to_string()))?;
        let mut rng = SimRng::seed_from_u64(opts.seed.wrapping_add(1000 + idx as u64));
        let draws: Vec<(f64, f64)> = (0..n)
            .map(|_| sampler.sample_exchange(&p, &mut rng).map(|(_, r, big_r)| (r, big_r)))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::other(e.to_string()))?;
        let mut regime = serde_json::Map::new();
        for (label, nr, nbig) in [("joint", 8, 8), ("r_marginal", 25, 1), ("R_marginal", 1, 25)] {
            let probs = cell_probabilities(&p, &kp, nr, nbig);
            let pv = binned_p_value(&draws, &probs, nr, nbig)?;
            let check = format!("sampler_{name}_{label}");
            rec.at_least(&check, pv, SIGNIFICANCE, format!("chi-square p-value, {n} draws, {nr}x{nbig} cells"));
            if pv < SIGNIFICANCE {
                rec.dump(json!({
                    "kind": "sampler",
                    "regime": name,
                    "test": label,
                    "alpha": kp.alpha(), "zeta": kp.zeta(), "eta": kp.eta(),
                    "state": state_json(&p),
                    "seed": opts.seed.wrapping_add(1000 + idx as u64),
                    "p_value": pv,
                }));
            }
            regime.insert(label.into(), json!(pv));
        }
        regime.insert("alpha".into(), json!(kp.alpha()));
        regime.insert("zeta".into(), json!(kp.zeta()));
        regime.insert("eta".into(), json!(kp.eta()));
        out.push(json!({ name: Value::Object(regime) }));
    }
    // σ·û for a cosine-power kernel has CDF x^{γ+1}
    let u = Vec3::new(1.0, -2.0, 0.5).normalize();
    let angular = AngularModel::CosinePower { exponent: 2.0 };
    let mut rng = SimRng::seed_from_u64(opts.seed.wrapping_add(2000));
    let xs: Vec<f64> = (0..n).map(|_| sample_hemisphere(&u, &angular, &mut rng).dot(&u)).collect();
    let ks = ks_one_sample(&xs, |x: f64| x.clamp(0.0, 1.0).powi(3)).map_err(|e| CliError::other(e.to_string()))?;
    rec.at_least("hemisphere_cosine_power", ks.p_value, SIGNIFICANCE, "KS p-value of σ·û against x^3");
    Ok(json!({ "draws_per_regime": n, "regimes": out, "hemisphere_ks_p_value": ks.p_value }))
}

pub fn averaging_suite(opts: &VerifyOptions) -> CliResult<VerifyReport> {
    let kp = opts.kernel()?;
    let ks = opts.orders()?;
    let cfg = CkConfig {
        seed: opts.seed,
        ..opts.ck
    };
    let report = empirical_ck(&ks, &kp, &cfg).map_err(|e| CliError::config(e.to_string()))?;
    let mut rec = Recorder::default();
    rec.push(
        "non_increasing",
        true,
        report.non_increasing,
        f64::from(u8::from(report.non_increasing)),
        1.0,
        "C_k non-increasing in k",
    );
    let find = |k: f64| report.estimates.iter().find(|e| e.k == k).map(|e| e.c_k);
    if let Some(c0) = find(0.0) {
        let err = (c0 - 2.0 * report.kappa_ub).abs() / (2.0 * report.kappa_ub);
        rec.at_most("c0_equals_two_kappa_ub", err, 1e-12, format!("C_0 = {c0}, 2 κ_ub = {}", 2.0 * report.kappa_ub));
    }
    if let Some(c2) = find(2.0) {
        let err = (c2 - report.kappa_ub).abs() / report.kappa_ub;
        rec.at_most("c2_equals_kappa_ub", err, 1e-12, format!("C_2 = {c2}, κ_ub = {}", report.kappa_ub));
    }
    match report.k_star {
        Some(k) => rec.push("k_star", false, true, k, report.kappa_lb, "smallest k with C_k below κ_lb"),
        None => rec.push("k_star", false, false, f64::NAN, report.kappa_lb, "no tested k has C_k below κ_lb"),
    }
    if !report.non_increasing {
        rec.dump(json!({
            "kind": "averaging",
            "alpha": opts.alpha, "zeta": opts.zeta, "eta": opts.eta,
            "orders": ks,
            "config": cfg,
            "c_k": report.estimates.iter().map(|e| (e.k, e.c_k)).collect::<Vec<_>>(),
        }));
    }
    let details = serde_json::to_value(&report).map_err(|e| CliError::other(e.to_string()))?;
    Ok(rec.finish(Suite::Averaging, opts, details))
}

pub fn energy_identity_suite(opts: &VerifyOptions) -> CliResult<VerifyReport> {
    let mut rec = Recorder::default();
    let mut rng = SimRng::seed_from_u64(opts.seed);
    let (mut worst_err, mut worst_slack) = (0.0f64, f64::INFINITY);
    let mut degenerate = 0usize;
    for _ in 0..opts.samples {
        let p = random_state(&mut rng);
        let sigma = sample_sphere(&mut rng);
        let (r, big_r): (f64, f64) = (rng.random(), rng.random());
        let res = energy_identity_check(&p, &sigma, r, big_r).map_err(|e| CliError::other(e.to_string()))?;
        let err = res.max_representation_error();
        let slack = res.min_slack();
        degenerate += usize::from(res.degenerate_v);
        if !(err <= IDENTITY_TOL) || !(slack >= -IDENTITY_TOL) {
            rec.dump(json!({
                "kind": "energy-identity",
                "state": state_json(&p),
                "sigma": vec_json(&sigma),
                "r": r, "R": big_r,
                "residual": res,
            }));
        }
        worst_err = worst_err.max(if err.is_nan() { f64::INFINITY } else { err });
        worst_slack = worst_slack.min(if slack.is_nan() { f64::NEG_INFINITY } else { slack });
    }
    rec.at_most(
        "representation",
        worst_err,
        IDENTITY_TOL,
        format!("max residual of the bracket representation over {} states", opts.samples),
    );
    rec.at_least("bounds", worst_slack, -IDENTITY_TOL, "min slack of λ ≤ s/2 and the two bracket bounds");
    let details = json!({ "states": opts.samples, "max_error": worst_err, "min_slack": worst_slack, "degenerate_v": degenerate });
    Ok(rec.finish(Suite::EnergyIdentity, opts, details))
}

/// `ρ_q` closed form against quadrature on `points` random finite-region parameters.
pub fn rho_q_grid(points: usize, seed: u64) -> Vec<(f64, f64, f64, f64, f64)> {
    let mut rng = SimRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(points + 1);
    out.push((0.0, 1.0, 2.0, rho_q(0.0, 1.0, 2.0).unwrap_or(f64::NAN), rho_q_by_quadrature(0.0, 1.0, 2.0).unwrap_or(f64::NAN)));
    while out.len() < points {
        let alpha = rng.random_range(-0.45..1.5);
        let zeta = rng.random_range(0.05..2.0);
        let q = 1.0 + 10f64.powf(rng.random_range(-0.3..2.0));
        let (er, e1) = rho_q_exponents(alpha, zeta, q);
        // keep clear of the divergence boundary where the quadrature loses accuracy
        if er < -0.85 || e1 < -0.85 {
            continue;
        }
        let exact = rho_q(alpha, zeta, q).unwrap_or(f64::NAN);
        let quad = rho_q_by_quadrature(alpha, zeta, q).unwrap_or(f64::NAN);
        out.push((alpha, zeta, q, exact, quad));
    }
    out
}

fn weighted_integral<F: Fn(f64, f64) -> f64>(alpha: f64, f: F) -> f64 {
    integrate_rectangle(
        &TanhSinh::with_tol(1e-11),
        &TanhSinh::with_tol(1e-12),
        |r, s| {
            let big_r = 1.0 - s;
            f(r, big_r) * (r * (1.0 - r)).powf(alpha) * s.powf(2.0 * alpha + 1.0) * big_r.sqrt()
        },
        (0.0, 1.0),
        (0.0, 1.0),
        &[],
        |_| vec![],
    )
    .value
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs()
    }
}

pub fn kernel_constants_suite(opts: &VerifyOptions) -> CliResult<VerifyReport> {
    let mut rec = Recorder::default();

    let grid = rho_q_grid(50, opts.seed);
    let mut worst = 0.0f64;
    for &(alpha, zeta, q, exact, quad) in &grid {
        let e = rel(exact, quad);
        if !(e <= 1e-8) {
            rec.dump(json!({ "kind": "rho_q", "alpha": alpha, "zeta": zeta, "q": q, "closed": exact, "quadrature": quad }));
        }
        worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
    }
    rec.at_most("rho_q_grid", worst, 1e-8, format!("max relative closed-form vs quadrature gap over {} points", grid.len()));
    let half_pi = rho_q(0.0, 1.0, 2.0).unwrap_or(f64::NAN);
    rec.at_most("rho_q_half_pi", rel(half_pi, PI / 2.0), 1e-14, format!("ρ_2(α=0, ζ=1) = {half_pi}"));

    let mut worst_mass = 0.0f64;
    for &alpha in &[-0.4, -0.0304, 0.0, 0.0901, 1.0] {
        worst_mass = worst_mass.max(rel(d_alpha_mass(alpha), weighted_integral(alpha, |_, _| 1.0)));
    }
    rec.at_most("d_alpha_mass", worst_mass, 1e-9, "closed-form mass of d_α vs quadrature");

    let mut worst_kappa = 0.0f64;
    let mut lower_ok = true;
    for &alpha in &[-0.0304, 0.0, 0.4] {
        for &zeta in &[0.2584, 1.0, 2.0] {
            let kp = KernelParams::new(alpha, KernelSettings { zeta, ..KernelSettings::default() })
                .map_err(|e| CliError::other(e.to_string()))?;
            let kb = kappa_bounds(&kp);
            let e = rel(kb.upper, kappa_upper_closed_form(&kp));
            if !(e <= 1e-8) || !(kb.lower > 0.0 && kb.lower < kb.upper) {
                rec.dump(json!({ "kind": "kappa", "alpha": alpha, "zeta": zeta, "bounds": kb }));
            }
            worst_kappa = worst_kappa.max(e);
            lower_ok &= kb.lower > 0.0 && kb.lower < kb.upper;
        }
    }
    rec.at_most("kappa_ub_closed_form", worst_kappa, 1e-8, "κ_ub closed form vs quadrature");
    rec.push("kappa_lb_positive", true, lower_ok, f64::from(u8::from(lower_ok)), 1.0, "0 < κ_lb < κ_ub");

    let mut rng = SimRng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut worst_rate = 0.0f64;
    for &alpha in &[-0.3, 0.0, 0.5, 1.0] {
        for &zeta in &[0.5, 1.0, 2.0] {
            for angular in [AngularModel::Uniform, AngularModel::CosinePower { exponent: 2.0 }] {
                let kp = KernelParams::new(alpha, KernelSettings { zeta, eta: 0.7, angular, ..KernelSettings::default() })
                    .map_err(|e| CliError::other(e.to_string()))?;
                let p = random_state(&mut rng);
                let exact = pair_rate_physical(&p, &kp);
                let quad = angular.l1_norm()
                    * weighted_integral(alpha, |r, rr| evaluate_physical_kernel(&p, r, rr, &kp).unwrap_or(f64::NAN));
                let e = rel(exact, quad);
                if !(e <= 1e-8) {
                    rec.dump(json!({ "kind": "pair_rate", "alpha": alpha, "zeta": zeta, "angular": angular,
                        "state": state_json(&p), "closed": exact, "quadrature": quad }));
                }
                worst_rate = worst_rate.max(if e.is_nan() { f64::INFINITY } else { e });
            }
        }
    }
    rec.at_most("exchange_rate_closed_form", worst_rate, 1e-8, "per-pair exchange rate closed form vs quadrature");

    let kp = opts.kernel()?;
    let sb = sandwich_bounds(&kp);
    let (mut sandwich_violations, mut upper_violations, mut lower_violations) = (0usize, 0usize, 0usize);
    for _ in 0..opts.samples {
        let p = random_state(&mut rng);
        let (r, rr): (f64, f64) = (rng.random(), rng.random());
        let b = evaluate_physical_kernel(&p, r, rr, &kp).map_err(|e| CliError::other(e.to_string()))?;
        let e = (p.energy() / p.mass).powf(0.5 * kp.zeta());
        let tol = 1e-12 * b.max(f64::MIN_POSITIVE);
        if !(sb.lower(r, rr) * e <= b + tol && b <= sb.upper(r, rr) * e + tol) {
            sandwich_violations += 1;
            rec.dump(json!({ "kind": "kernel_sandwich", "state": state_json(&p), "r": r, "R": rr, "kernel": b }));
        }
        let (lo, hi) = bracket_sandwich_slack(&p, kp.zeta());
        if hi < -1e-12 * (1.0 + hi.abs()) {
            upper_violations += 1;
            rec.dump(json!({ "kind": "bracket_sandwich_upper", "state": state_json(&p), "zeta": kp.zeta(), "slack": hi }));
        }
        lower_violations += usize::from(lo < 0.0);
    }
    rec.at_most("kernel_sandwich", sandwich_violations as f64, 0.0, format!("violations over {} states", opts.samples));
    rec.at_most("bracket_sandwich_upper", upper_violations as f64, 0.0, "violations of (E/m)^{ζ/2} ≤ ⟨v,I⟩^ζ + ⟨v*,I*⟩^ζ");
    rec.push(
        "bracket_sandwich_lower",
        false,
        lower_violations == 0,
        lower_violations as f64,
        0.0,
        "violations of the lower bracket bound (reported only)",
    );
    let details = json!({
        "rho_q": grid.iter().map(|g| json!({"alpha": g.0, "zeta": g.1, "q": g.2, "closed": g.3, "quadrature": g.4})).collect::<Vec<_>>(),
        "kappa": kappa_bounds(&kp),
    });
    Ok(rec.finish(Suite::KernelConstants, opts, details))
}

/// Parses a count written as an integer or in float notation such as `1e6`.
pub fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !(x >= 0.0 && x.fract() == 0.0 && x <= 1e15) {
        return Err(format!("`{s}` is not a non-negative whole number"));
    }
    Ok(x as usize)
}

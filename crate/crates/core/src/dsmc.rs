//! Space-homogeneous DSMC solver for the convex operator `ω Q + (1-ω) Q^f`.
//!
//! Each step draws candidate pairs uniformly (no-time-counter selection). The
//! expected number of candidates is `(n/N) · N(N-1)/2 · W_maj · dt`, and a
//! candidate is accepted with probability `(ω W_ex + (1-ω) W_fr) / W_maj`.
//!
//! The majorant comes from the upper kernel bound `W ≤ c (E/m)^{ζ/2}`. With
//! `ε_i = m|v_i - c|²/2 + I_i` measured in the mean-velocity frame,
//! `E_ij ≤ ε_i + ε_j`, so the two largest `ε` bound every pair. The bound is
//! recomputed every step and is invariant under a uniform shift of velocities.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::CollisionSampler;
use crate::diagnostics::{empirical_entropy, equilibrium_tests, EquilibriumTests};
use crate::error::{domain, Error, Result};
use crate::gas::{maxwellian_l1_moment, Ensemble, Particle};
use crate::kernel::{pair_rates, KernelParams, PairState};
use crate::stats::linear_regression;
use crate::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Time step; when absent it is chosen so that each particle collides about 0.1 times per step.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_moment_orders")]
    pub moment_orders: Vec<f64>,
    #[serde(default = "default_safety")]
    pub majorant_safety: f64,
    /// 1 runs the reproducible sequential loop; more splits each step over disjoint particle groups.
    #[serde(default = "default_threads")]
    pub threads: usize,
    /// Record the histogram entropy estimate (costs a sort per record).
    #[serde(default = "default_true")]
    pub entropy: bool,
}

fn default_record_every() -> usize {
    10
}
fn default_moment_orders() -> Vec<f64> {
    vec![3.0, 4.0, 6.0]
}
fn default_safety() -> f64 {
    1.1
}
fn default_threads() -> usize {
    1
}
fn default_true() -> bool {
    true
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: None,
            t_end: 1.0,
            seed: 0,
            record_every: default_record_every(),
            moment_orders: default_moment_orders(),
            majorant_safety: default_safety(),
            threads: 1,
            entropy: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(domain(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(domain(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(domain("record_every must be at least 1"));
        }
        if !(self.majorant_safety >= 1.0 && self.majorant_safety.is_finite()) {
            return Err(domain(format!("majorant_safety must be at least 1, got {}", self.majorant_safety)));
        }
        if self.threads == 0 {
            return Err(domain("threads must be at least 1"));
        }
        if let Some(k) = self.moment_orders.iter().find(|k| !(**k >= 0.0)) {
            return Err(domain(format!("moment_orders must be non-negative, got {k}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollisionCounters {
    pub candidates: u64,
    pub accepted: u64,
    pub exchange: u64,
    pub frozen: u64,
}

impl std::ops::AddAssign for CollisionCounters {
    fn add_assign(&mut self, o: Self) {
        self.candidates += o.candidates;
        self.accepted += o.accepted;
        self.exchange += o.exchange;
        self.frozen += o.frozen;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeriesRecord {
    pub step: usize,
    pub t: f64,
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
    /// `L¹_k` moments in the order of `SolverConfig::moment_orders`.
    pub moments: Vec<f64>,
    /// `NaN` when entropy recording is disabled.
    pub entropy: f64,
    pub translational_temperature: f64,
    pub internal_temperature: f64,
    /// Frobenius norm of the traceless part of the pressure tensor.
    pub stress_deviator: f64,
    /// Cumulative counters up to this record.
    pub counters: CollisionCounters,
}

impl TimeSeriesRecord {
    pub fn temperature_gap(&self) -> f64 {
        self.translational_temperature - self.internal_temperature
    }
}

/// Checks that initial data have positive mass, finite energy and a finite `L¹_{2+}` moment.
pub fn validate_initial_data(ens: &Ensemble) -> Result<()> {
    let totals = ens.conserved_totals();
    if !(totals.mass > 0.0) {
        return Err(domain("initial data must have positive mass"));
    }
    if !totals.energy.is_finite() {
        return Err(domain("initial data must have finite energy"));
    }
    let m = ens.l1_moment(2.5)?;
    if !m.is_finite() {
        return Err(domain("initial data must have a finite L1_{2+} moment"));
    }
    Ok(())
}

/// Traceless part of `(n/N) m Σ (v_i - c)(v_i - c)ᵀ`, Frobenius norm.
pub fn stress_deviator_norm(ens: &Ensemble) -> f64 {
    let c = ens.mean_velocity();
    let mut p = nalgebra::Matrix3::<f64>::zeros();
    for q in ens.particles() {
        let w = q.v - c;
        p += w * w.transpose();
    }
    p *= ens.weight() * ens.species().mass;
    let tr = p.trace() / 3.0;
    for i in 0..3 {
        p[(i, i)] -= tr;
    }
    p.norm()
}

fn record(ens: &Ensemble, cfg: &SolverConfig, step: usize, t: f64, counters: CollisionCounters) -> Result<TimeSeriesRecord> {
    let totals = ens.conserved_totals();
    let moments = cfg
        .moment_orders
        .iter()
        .map(|&k| ens.l1_moment(k))
        .collect::<Result<Vec<_>>>()?;
    let entropy = if cfg.entropy { empirical_entropy(ens)? } else { f64::NAN };
    Ok(TimeSeriesRecord {
        step,
        t,
        mass: totals.mass,
        momentum: [totals.momentum.x, totals.momentum.y, totals.momentum.z],
        energy: totals.energy,
        moments,
        entropy,
        translational_temperature: ens.translational_temperature(),
        internal_temperature: ens.internal_temperature(),
        stress_deviator: stress_deviator_norm(ens),
        counters,
    })
}

/// Per-pair majorant `safety · (c_ex + c_fr) · (E_max/m)^{ζ/2}` for the current ensemble.
pub fn pair_majorant(ens: &Ensemble, kp: &KernelParams, safety: f64) -> f64 {
    let (cex, cfr) = kp.majorant_coefficients();
    if cex + cfr == 0.0 {
        return 0.0;
    }
    let m = ens.species().mass;
    let c = ens.mean_velocity();
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for p in ens.particles() {
        let e = 0.5 * m * (p.v - c).norm_squared() + p.internal;
        if e > e1 {
            e2 = e1;
            e1 = e;
        } else if e > e2 {
            e2 = e;
        }
    }
    safety * (cex + cfr) * ((e1 + e2) / m).powf(0.5 * kp.zeta())
}

/// Time step giving about `target` collisions per particle per step, from the mean pair
/// rate over `samples` random pairs.
pub fn suggest_time_step(ens: &Ensemble, kp: &KernelParams, target: f64, samples: usize, seed: u64) -> Result<f64> {
    let n = ens.len();
    if n < 2 {
        return Err(Error::Insufficient("need at least two particles".into()));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let m = ens.species().mass;
    let ps = ens.particles();
    let mut sum = 0.0;
    for _ in 0..samples.max(1) {
        let (i, j) = draw_pair(n, &mut rng);
        let (ex, fr) = pair_rates(&PairState::from_particles(&ps[i], &ps[j], m), kp);
        sum += ex + fr;
    }
    let per_particle = ens.number_density() * sum / samples.max(1) as f64;
    if !(per_particle > 0.0) {
        return Err(Error::ZeroRate);
    }
    Ok(target / per_particle)
}

#[inline]
fn draw_pair<G: Rng + ?Sized>(n: usize, rng: &mut G) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

struct LoopCtx<'a> {
    sampler: &'a CollisionSampler,
    majorant: f64,
    mass: f64,
    step: usize,
}

/// Runs `n_candidates` candidate collisions among `parts`.
fn collide_group<G: Rng + ?Sized>(parts: &mut [Particle], n_candidates: u64, ctx: &LoopCtx, rng: &mut G) -> Result<CollisionCounters> {
    let mut counters = CollisionCounters::default();
    let n = parts.len();
    if n < 2 {
        return Ok(counters);
    }
    let kp = ctx.sampler.params();
    for _ in 0..n_candidates {
        counters.candidates += 1;
        let (i, j) = draw_pair(n, rng);
        let pair = PairState::from_particles(&parts[i], &parts[j], ctx.mass);
        let (ex, fr) = pair_rates(&pair, kp);
        let total = ex + fr;
        if total > ctx.majorant {
            return Err(Error::MajorantViolation {
                rate: total,
                majorant: ctx.majorant,
                step: ctx.step,
            });
        }
        if !(rng.random::<f64>() * ctx.majorant < total) {
            continue;
        }
        let out = ctx.sampler.dispatch(&pair, ex, total, rng);
        let a = Particle {
            v: out.v,
            internal: out.internal,
        };
        let b = Particle {
            v: out.v_star,
            internal: out.internal_star,
        };
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite {
                step: ctx.step,
                dump: format!("pre {pair:?} post {out:?}"),
            });
        }
        parts[i] = a;
        parts[j] = b;
        counters.accepted += 1;
        if out.frozen {
            counters.frozen += 1;
        } else {
            counters.exchange += 1;
        }
    }
    Ok(counters)
}

/// Stateful time stepper; owns the master RNG and the fractional candidate carry.
pub struct Solver {
    kp: KernelParams,
    sampler: CollisionSampler,
    cfg: SolverConfig,
    rng: SimRng,
    pool: Option<rayon::ThreadPool>,
    carry: f64,
    steps_done: usize,
    counters: CollisionCounters,
}

impl Solver {
    pub fn new(kp: &KernelParams, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let pool = if cfg.threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(cfg.threads)
                    .build()
                    .map_err(|e| domain(format!("thread pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            kp: *kp,
            sampler: CollisionSampler::new(kp)?,
            cfg: cfg.clone(),
            rng: SimRng::seed_from_u64(cfg.seed),
            pool,
            carry: 0.0,
            steps_done: 0,
            counters: CollisionCounters::default(),
        })
    }

    pub fn counters(&self) -> CollisionCounters {
        self.counters
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    /// Advances `ens` by one step of length `dt`.
    pub fn step(&mut self, ens: &mut Ensemble, dt: f64) -> Result<CollisionCounters> {
        let n = ens.len();
        if n < 2 {
            return Err(Error::Insufficient("collision stepping needs at least two particles".into()));
        }
        if ens.species().alpha != self.kp.alpha() {
            return Err(domain("ensemble alpha differs from kernel alpha"));
        }
        let step_index = self.steps_done;
        let majorant = pair_majorant(ens, &self.kp, self.cfg.majorant_safety);
        let mass = ens.species().mass;
        let weight = ens.weight();
        let ctx = LoopCtx {
            sampler: &self.sampler,
            majorant,
            mass,
            step: step_index,
        };
        let counters = if majorant == 0.0 {
            CollisionCounters::default()
        } else if let Some(pool) = &self.pool {
            let groups = self.cfg.threads.min(n / 2).max(1);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut self.rng);
            let mut buf: Vec<Particle> = order.iter().map(|&i| ens.particles()[i]).collect();
            let chunk = n.div_ceil(groups);
            let per_particle = 0.5 * weight * (n as f64 - 1.0) * majorant * dt;
            let seeds: Vec<(u64, f64)> = (0..groups).map(|_| (self.rng.random(), self.rng.random())).collect();
            let results: Vec<Result<CollisionCounters>> = pool.install(|| {
                buf.par_chunks_mut(chunk)
                    .zip(seeds.par_iter())
                    .map(|(parts, &(seed, u))| {
                        let expected = per_particle * parts.len() as f64;
                        let n_cand = expected.floor() as u64 + u64::from(u < expected.fract());
                        let mut rng = SimRng::seed_from_u64(seed);
                        collide_group(parts, n_cand, &ctx, &mut rng)
                    })
                    .collect()
            });
            let mut total = CollisionCounters::default();
            for r in results {
                total += r?;
            }
            let dst = ens.particles_mut();
            for (k, &i) in order.iter().enumerate() {
                dst[i] = buf[k];
            }
            total
        } else {
            let expected = weight * 0.5 * n as f64 * (n as f64 - 1.0) * majorant * dt + self.carry;
            let n_cand = expected.floor();
            self.carry = expected - n_cand;
            collide_group(ens.particles_mut(), n_cand as u64, &ctx, &mut self.rng)?
        };
        self.steps_done += 1;
        self.counters += counters;
        Ok(counters)
    }
}

/// One equilibrium comparison at the final time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentMismatch {
    pub k: f64,
    pub empirical: f64,
    pub maxwellian: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    pub final_time: f64,
    pub n_particles: usize,
    pub counters: CollisionCounters,
    pub mass_drift: f64,
    /// `|Δ momentum|` relative to `ρ √(2e/m)`, the thermal momentum scale.
    pub momentum_drift: f64,
    pub energy_drift: f64,
    /// Equilibrium temperature fixed by the conserved energy.
    pub temperature: f64,
    pub moments: Vec<MomentMismatch>,
    pub equilibrium: EquilibriumTests,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub records: Vec<TimeSeriesRecord>,
    pub summary: RunSummary,
}

/// Number of steps for `t_end` at `dt` (a final partial step is rounded up).
pub fn step_count(t_end: f64, dt: f64) -> usize {
    let s = t_end / dt;
    let r = s.round();
    if (s - r).abs() < 1e-9 * s.max(1.0) {
        r as usize
    } else {
        s.ceil() as usize
    }
}

/// Runs the solver to `t_end`, recording every `record_every` steps.
pub fn run(ens: &mut Ensemble, kp: &KernelParams, cfg: &SolverConfig) -> Result<RunOutput> {
    cfg.validate()?;
    validate_initial_data(ens)?;
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => suggest_time_step(ens, kp, 0.1, 2000, cfg.seed ^ 0x5eed)?,
    };
    let steps = step_count(cfg.t_end, dt);
    let mut solver = Solver::new(kp, cfg)?;
    let initial = ens.conserved_totals();
    let mut records = vec![record(ens, cfg, 0, 0.0, solver.counters())?];
    for s in 1..=steps {
        solver.step(ens, dt)?;
        if s % cfg.record_every == 0 {
            records.push(record(ens, cfg, s, s as f64 * dt, solver.counters())?);
        }
    }
    let fin = ens.conserved_totals();
    let m = ens.species().mass;
    let energy_scale = initial.energy.abs().max(f64::MIN_POSITIVE);
    let momentum_scale = initial.mass * (2.0 * ens.peculiar_energy_per_particle() / m).sqrt() + initial.momentum.norm();
    let params = ens.matched_maxwellian();
    let moments = cfg
        .moment_orders
        .iter()
        .map(|&k| {
            let empirical = ens.l1_moment(k)?;
            let maxwellian = maxwellian_l1_moment(&params, ens.species(), k)?;
            Ok(MomentMismatch {
                k,
                empirical,
                maxwellian,
                relative_error: (empirical - maxwellian) / maxwellian,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = RunSummary {
        steps,
        dt,
        final_time: steps as f64 * dt,
        n_particles: ens.len(),
        counters: solver.counters(),
        mass_drift: (fin.mass - initial.mass).abs() / initial.mass,
        momentum_drift: if momentum_scale > 0.0 {
            (fin.momentum - initial.momentum).norm() / momentum_scale
        } else {
            0.0
        },
        energy_drift: (fin.energy - initial.energy).abs() / energy_scale,
        temperature: ens.temperature(),
        moments,
        equilibrium: equilibrium_tests(ens, 40)?,
    };
    Ok(RunOutput { records, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelaxationKind {
    StressDeviator,
    EnergyImbalance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationFit {
    /// Decay rate `λ` in `|x(t)| ≈ |x(0)| e^{-λ t}`.
    pub rate: f64,
    pub rate_stderr: f64,
    pub r_squared: f64,
    pub points: usize,
    /// `false` when `R² < 0.9`.
    pub reliable: bool,
}

/// Log-linear fit of the decay of the stress deviator or of `T_tr - T_int`.
///
/// Only records with `|x| ≥ 0.1 |x(0)|` enter the fit, keeping the noise floor out.
pub fn relaxation_rates(records: &[TimeSeriesRecord], which: RelaxationKind) -> Result<RelaxationFit> {
    let value = |r: &TimeSeriesRecord| match which {
        RelaxationKind::StressDeviator => r.stress_deviator.abs(),
        RelaxationKind::EnergyImbalance => r.temperature_gap().abs(),
    };
    let first = records.first().ok_or_else(|| Error::Insufficient("no records".into()))?;
    let x0 = value(first);
    if !(x0 > 0.0) {
        return Err(domain("initial perturbation is zero"));
    }
    let (mut ts, mut ys) = (Vec::new(), Vec::new());
    for r in records {
        let x = value(r);
        if x < 0.1 * x0 {
            break;
        }
        ts.push(r.t);
        ys.push(x.ln());
    }
    if ts.len() < 3 {
        return Err(Error::Insufficient(format!(
            "only {} records above 10% of the initial perturbation",
            ts.len()
        )));
    }
    let fit = linear_regression(&ts, &ys)?;
    Ok(RelaxationFit {
        rate: -fit.slope,
        rate_stderr: fit.slope_stderr,
        r_squared: fit.r_squared,
        points: ts.len(),
        reliable: fit.r_squared >= 0.9,
    })
}

/// Shape `t^{-(k-2)/ζ}` of the moment-generation envelope, scaled to pass through `(t_ref, value_ref)`.
pub fn generation_envelope(k: f64, zeta: f64, t: f64, t_ref: f64, value_ref: f64) -> f64 {
    value_ref * (t / t_ref).powf(-(k - 2.0) / zeta)
}

//! Entropy and equilibrium estimators, and numerical checks of the moment machinery:
//! the energy identity, the averaging operator `S_k` and the Povzner constants `C_k`.
//!
//! Exchange collisions conserve the bracket energy `E^⟨⟩ = ⟨v,I⟩² + ⟨v*,I*⟩²`.
//! Writing `x = ⟨v',I'⟩²/E^⟨⟩`, the post-collision brackets are `x` and `1-x`
//! times `E^⟨⟩`, so `S_k / (E^⟨⟩)^{k/2} = κ^{ub} E[x^{k/2} + (1-x)^{k/2}]` with
//! `(σ, r, R)` drawn from `b b̃^{ub} d_α`. The integrand is pointwise
//! non-increasing in `k`, and so is any supremum of it over states.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist, Normal};
use statrs::function::gamma::ln_gamma;

use crate::collision::{exchange, sample_hemisphere, CollisionSampler};
use crate::error::{domain, Error, Result};
use crate::gas::{bracket_sq, Ensemble, MaxwellianParams, Species, Vec3};
use crate::kernel::{kappa_bounds, kappa_upper_closed_form, KernelParams, PairState};
use crate::stats::{chi_square_vs_cdf, TestResult};
use crate::SimRng;

fn quantile_in_place(xs: &mut [f64], q: f64) -> f64 {
    let idx = ((xs.len() as f64 - 1.0) * q).round() as usize;
    let (_, v, _) = xs.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    *v
}

/// Histogram estimate of `H(f) = ∫ f log(f I^{-α}) dv dI`.
///
/// Velocities are taken isotropic about the mean, so the density is binned on
/// `(|v - c|, I)` with `⌈N^{1/3}⌉` bins per axis up to the 99.9% quantiles.
/// A speed shell `[c_lo, c_hi)` has volume `4π(c_hi³ - c_lo³)/3`. Particles
/// beyond the quantile range are left out.
pub fn empirical_entropy(ens: &Ensemble) -> Result<f64> {
    let n = ens.len();
    if n == 0 {
        return Err(Error::Insufficient("empty ensemble".into()));
    }
    let alpha = ens.species().alpha;
    let c = ens.mean_velocity();
    let speeds: Vec<f64> = ens.particles().iter().map(|p| (p.v - c).norm()).collect();
    let internals: Vec<f64> = ens.particles().iter().map(|p| p.internal).collect();
    let bins = ((n as f64).cbrt().ceil() as usize).max(1);
    let c_max = quantile_in_place(&mut speeds.clone(), 0.999);
    let i_max = quantile_in_place(&mut internals.clone(), 0.999);
    if !(c_max > 0.0 && i_max > 0.0) {
        return Err(domain("degenerate ensemble: zero speed or internal-energy spread"));
    }
    let dc = c_max / bins as f64;
    let di = i_max / bins as f64;
    let mut counts = vec![0u32; bins * bins];
    for (s, i) in speeds.iter().zip(&internals) {
        if *s > c_max || *i > i_max {
            continue;
        }
        let a = ((s / dc) as usize).min(bins - 1);
        let b = ((i / di) as usize).min(bins - 1);
        counts[a * bins + b] += 1;
    }
    let w = ens.weight();
    let mut h = 0.0;
    for a in 0..bins {
        let lo = a as f64 * dc;
        let hi = lo + dc;
        let shell = 4.0 / 3.0 * std::f64::consts::PI * (hi * hi * hi - lo * lo * lo);
        let vol = shell * di;
        for b in 0..bins {
            let cnt = counts[a * bins + b];
            if cnt == 0 {
                continue;
            }
            let f = cnt as f64 * w / vol;
            let i_c = (b as f64 + 0.5) * di;
            h += f * (f.ln() - alpha * i_c.ln()) * vol;
        }
    }
    Ok(h)
}

/// `H(M) = n (log A - (α + 5/2))` with `A = n / ((k_B T)^{α+1} Γ(α+1)) · (m / 2π k_B T)^{3/2}`.
pub fn maxwellian_entropy(params: &MaxwellianParams, sp: &Species) -> Result<f64> {
    if !(params.temperature > 0.0 && params.density > 0.0) {
        return Err(domain("Maxwellian entropy needs positive density and temperature"));
    }
    let n = params.density / sp.mass;
    let kt = sp.boltzmann() * params.temperature;
    let ln_a = n.ln() - (sp.alpha + 1.0) * kt.ln() - ln_gamma(sp.alpha + 1.0)
        + 1.5 * (sp.mass / (2.0 * std::f64::consts::PI * kt)).ln();
    Ok(n * (ln_a - (sp.alpha + 2.5)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumTests {
    /// Temperature fixed by the conserved energy.
    pub temperature: f64,
    pub bins: usize,
    pub vx: TestResult,
    pub vy: TestResult,
    pub vz: TestResult,
    pub internal: TestResult,
}

impl EquilibriumTests {
    pub fn min_p_value(&self) -> f64 {
        self.vx.p_value.min(self.vy.p_value).min(self.vz.p_value).min(self.internal.p_value)
    }

    pub fn velocity_min_p_value(&self) -> f64 {
        self.vx.p_value.min(self.vy.p_value).min(self.vz.p_value)
    }
}

/// Chi-square tests of each velocity component against `N(c_i, k_B T/m)` and of `I`
/// against `Gamma(α+1, k_B T)`, with `T` from the conserved energy.
pub fn equilibrium_tests(ens: &Ensemble, bins: usize) -> Result<EquilibriumTests> {
    let sp = ens.species();
    let t = ens.temperature();
    let kt = sp.boltzmann() * t;
    let sd = (kt / sp.mass).sqrt();
    let c = ens.mean_velocity();
    let bins = bins.min(ens.len() / 5).max(2);
    let comp = |axis: usize| -> Result<TestResult> {
        let xs: Vec<f64> = ens.particles().iter().map(|p| p.v[axis]).collect();
        let normal = Normal::new(c[axis], sd).map_err(|e| domain(e.to_string()))?;
        chi_square_vs_cdf(&xs, |x| normal.cdf(x), bins)
    };
    let gamma = GammaDist::new(sp.alpha + 1.0, 1.0 / kt).map_err(|e| domain(e.to_string()))?;
    let internals: Vec<f64> = ens.particles().iter().map(|p| p.internal).collect();
    Ok(EquilibriumTests {
        temperature: t,
        bins,
        vx: comp(0)?,
        vy: comp(1)?,
        vz: comp(2)?,
        internal: chi_square_vs_cdf(&internals, |x| gamma.cdf(x), bins)?,
    })
}

/// Residuals of the energy-identity representation
/// `⟨v',I'⟩² = E^⟨⟩(s/2 + r(1-s) + λ V̂·σ)`, `⟨v'*,I'*⟩² = E^⟨⟩(s/2 + (1-r)(1-s) - λ V̂·σ)`.
///
/// All quantities are relative to `E^⟨⟩`. The representation residuals should
/// be at rounding level; the slacks should be non-negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIdentityResidual {
    pub s: f64,
    pub lambda: f64,
    pub line1: f64,
    pub line2: f64,
    /// `s/2 - |λ|`.
    pub lambda_slack: f64,
    pub bound1_slack: f64,
    pub bound2_slack: f64,
    /// `(⟨v',I'⟩² + ⟨v'*,I'*⟩² - E^⟨⟩) / E^⟨⟩`.
    pub bracket_energy: f64,
    /// `V = 0`, where `V̂ = (0, 0, 1)` is used.
    pub degenerate_v: bool,
}

impl EnergyIdentityResidual {
    pub fn max_representation_error(&self) -> f64 {
        self.line1.abs().max(self.line2.abs()).max(self.bracket_energy.abs())
    }

    pub fn min_slack(&self) -> f64 {
        self.lambda_slack.min(self.bound1_slack).min(self.bound2_slack)
    }
}

/// Evaluates the energy identity for one collision.
///
/// `s = 1 - (1-R)E/(m E^⟨⟩)` and, matching the `V·σ` terms, `λ = √(RE/m)|V| / E^⟨⟩`.
pub fn energy_identity_check(p: &PairState, sigma: &Vec3, r: f64, big_r: f64) -> Result<EnergyIdentityResidual> {
    let out = crate::collision::apply_exchange_collision(p, sigma, r, big_r)?;
    let m = p.mass;
    let e = p.energy();
    let e_br = p.bracket_energy();
    let v = p.centre_velocity();
    let vn = v.norm();
    let degenerate_v = vn == 0.0;
    let v_hat = if degenerate_v { Vec3::z() } else { v / vn };
    let s = 1.0 - (1.0 - big_r) * e / (m * e_br);
    let lambda = (big_r * e / m).sqrt() * vn / e_br;
    let vs = v_hat.dot(sigma);
    let b1 = bracket_sq(&out.v, out.internal, m) / e_br;
    let b2 = bracket_sq(&out.v_star, out.internal_star, m) / e_br;
    Ok(EnergyIdentityResidual {
        s,
        lambda,
        line1: b1 - (0.5 * s + r * (1.0 - s) + lambda * vs),
        line2: b2 - (0.5 * s + (1.0 - r) * (1.0 - s) - lambda * vs),
        lambda_slack: 0.5 * s - lambda.abs(),
        bound1_slack: r * (1.0 - s) + 0.5 * s * (1.0 + vs.abs()) - b1,
        bound2_slack: (1.0 - r) * (1.0 - s) + 0.5 * s * (1.0 + vs.abs()) - b2,
        bracket_energy: b1 + b2 - 1.0,
        degenerate_v,
    })
}

/// Sampler of `(σ, r, R)` from `b b̃^{ub} d_α`, which has total mass `κ^{ub}`.
///
/// `b̃^{ub}` is the exchange kernel with `|u|^ζ → 2^ζ` and `I/m, I*/m → 1`, so the
/// same Beta composition applies with fixed term weights.
#[derive(Debug, Clone)]
pub struct UpperBoundSampler {
    sampler: CollisionSampler,
    weights: [f64; 3],
    total: f64,
    kappa_ub: f64,
}

impl UpperBoundSampler {
    pub fn new(kp: &KernelParams) -> Result<Self> {
        let weights = [
            2f64.powf(kp.zeta()) * kp.translational_integral(),
            kp.eta() * kp.internal_integral(),
            kp.eta() * kp.internal_integral(),
        ];
        Ok(Self {
            sampler: CollisionSampler::new(kp)?,
            weights,
            total: weights.iter().sum(),
            kappa_ub: kappa_upper_closed_form(kp),
        })
    }

    pub fn kappa_ub(&self) -> f64 {
        self.kappa_ub
    }

    /// `x = ⟨v',I'⟩² / E^⟨⟩` for one draw; the partner's share is `1 - x`.
    pub fn sample_share<G: Rng + ?Sized>(&self, p: &PairState, e_br: f64, rng: &mut G) -> f64 {
        let (r, big_r) = self.sampler.sample_r_big_r(&self.weights, self.total, rng);
        let sigma = sample_hemisphere(&p.u_hat(), &self.sampler.params().angular(), rng);
        let out = exchange(p, &sigma, r, big_r);
        (bracket_sq(&out.v, out.internal, p.mass) / e_br).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Monte-Carlo estimate of `S_k(v, v*, I, I*)`.
pub fn averaging_operator_sk<G: Rng + ?Sized>(
    p: &PairState,
    k: f64,
    kp: &KernelParams,
    n_mc: usize,
    rng: &mut G,
) -> Result<McEstimate> {
    if n_mc < 2 {
        return Err(Error::Insufficient("need at least two Monte-Carlo samples".into()));
    }
    let ub = UpperBoundSampler::new(kp)?;
    let e_br = p.bracket_energy();
    let scale = ub.kappa_ub() * e_br.powf(0.5 * k);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..n_mc {
        let x = ub.sample_share(p, e_br, rng);
        let g = x.powf(0.5 * k) + (1.0 - x).powf(0.5 * k);
        sum += g;
        sum2 += g * g;
    }
    let nf = n_mc as f64;
    let mean = sum / nf;
    let var = (sum2 / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
    Ok(McEstimate {
        value: scale * mean,
        stderr: scale * (var / nf).sqrt(),
        samples: n_mc,
    })
}

/// Settings for [`empirical_ck`]. States are drawn per particle: bracket
/// `⟨v,I⟩` log-uniform on `[1, bracket_max]`, a uniform fraction of
/// `⟨v,I⟩² - 1` in translation, velocity direction isotropic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CkConfig {
    pub n_states: usize,
    pub n_mc: usize,
    pub bracket_max: f64,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for CkConfig {
    fn default() -> Self {
        Self {
            n_states: 2000,
            n_mc: 20_000,
            bracket_max: 1e3,
            bootstrap: 200,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CkEstimate {
    pub k: f64,
    /// Empirical supremum over the sampled states of `S_k / (E^⟨⟩)^{k/2}`.
    pub c_k: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub argmax_state: usize,
    /// `(L/2)(κ^{lb} - C_k)`.
    pub a_tilde: f64,
    /// `2^{k/2+2} κ^{ub}`.
    pub d_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AveragingReport {
    pub label: String,
    pub alpha: f64,
    pub zeta: f64,
    pub eta: f64,
    pub kappa_lb: f64,
    pub kappa_ub: f64,
    pub estimates: Vec<CkEstimate>,
    /// Smallest tested `k` with upper confidence bound of `C_k` below `κ^{lb}`.
    pub k_star: Option<f64>,
    pub non_increasing: bool,
    pub config: CkConfig,
    pub warnings: Vec<String>,
}

fn state_sample<G: Rng + ?Sized>(bracket_max: f64, m: f64, rng: &mut G) -> (Vec3, f64) {
    let b = bracket_max.powf(rng.random::<f64>());
    let excess = b * b - 1.0;
    let theta: f64 = rng.random();
    let speed = (2.0 * theta * excess).sqrt();
    let dir = crate::collision::sample_sphere(rng);
    (dir * speed, m * (1.0 - theta) * excess)
}

fn state_rng(seed: u64, index: usize) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Draws state `index` and its `n_mc` shares.
fn state_shares(ub: &UpperBoundSampler, cfg: &CkConfig, index: usize) -> Vec<f64> {
    let mut rng = state_rng(cfg.seed, index);
    let (v, i) = state_sample(cfg.bracket_max, 1.0, &mut rng);
    let (vs, is) = state_sample(cfg.bracket_max, 1.0, &mut rng);
    let p = PairState::unchecked(v, i, vs, is, 1.0);
    let e_br = p.bracket_energy();
    (0..cfg.n_mc).map(|_| ub.sample_share(&p, e_br, &mut rng)).collect()
}

#[inline]
fn povzner_integrand(x: f64, half_k: f64) -> f64 {
    if half_k.fract() == 0.0 && half_k.abs() < i32::MAX as f64 {
        let n = half_k as i32;
        x.powi(n) + (1.0 - x).powi(n)
    } else {
        x.powf(half_k) + (1.0 - x).powf(half_k)
    }
}

/// Empirical Povzner constants `C_k` with bootstrap confidence intervals, and `k*`.
///
/// `C_k` is the maximum over the sampled states of the Monte-Carlo average. All
/// `k` share the same random draws. The interval is a 95% percentile bootstrap
/// over the draws of the maximising state.
pub fn empirical_ck(ks: &[f64], kp: &KernelParams, cfg: &CkConfig) -> Result<AveragingReport> {
    if ks.is_empty() {
        return Err(domain("no moment orders given"));
    }
    if let Some(k) = ks.iter().find(|k| !(**k >= 0.0)) {
        return Err(domain(format!("moment orders must be non-negative, got {k}")));
    }
    if cfg.n_states == 0 || cfg.n_mc < 2 || !(cfg.bracket_max >= 1.0) {
        return Err(domain("empirical_ck needs n_states ≥ 1, n_mc ≥ 2 and bracket_max ≥ 1"));
    }
    let mut warnings = Vec::new();
    if cfg.n_mc < 10_000 || cfg.n_states < 100 {
        warnings.push(format!(
            "few samples ({} states, {} draws each): the supremum and its interval are rough",
            cfg.n_states, cfg.n_mc
        ));
    }
    let ub = UpperBoundSampler::new(kp)?;
    let kappa = kappa_bounds(kp);
    if let Some(w) = &kappa.warning {
        warnings.push(w.clone());
    }
    let kappa_ub = ub.kappa_ub();
    let half: Vec<f64> = ks.iter().map(|k| 0.5 * k).collect();

    // per state: mean of the integrand for every k
    let means: Vec<Vec<f64>> = (0..cfg.n_states)
        .into_par_iter()
        .map(|s| {
            let xs = state_shares(&ub, cfg, s);
            let mut acc = vec![0.0; half.len()];
            for &x in &xs {
                for (a, &h) in acc.iter_mut().zip(&half) {
                    *a += povzner_integrand(x, h);
                }
            }
            acc.iter().map(|a| a / xs.len() as f64).collect()
        })
        .collect();

    let l = 2f64.powf(-kp.zeta()) * 1f64.min(2f64.powf(1.0 - kp.zeta()));
    let mut estimates = Vec::with_capacity(ks.len());
    let mut boot_rng = SimRng::seed_from_u64(cfg.seed ^ 0xb007);
    for (j, (&k, &h)) in ks.iter().zip(&half).enumerate() {
        let (argmax, best) = means
            .iter()
            .enumerate()
            .map(|(s, m)| (s, m[j]))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        let c_k = kappa_ub * best;
        let (ci_lower, ci_upper) = if h == 0.0 || h == 1.0 {
            (c_k, c_k)
        } else {
            let xs = state_shares(&ub, cfg, argmax);
            let vals: Vec<f64> = xs.iter().map(|&x| povzner_integrand(x, h)).collect();
            let mut boots: Vec<f64> = (0..cfg.bootstrap.max(1))
                .map(|_| {
                    let s: f64 = (0..vals.len()).map(|_| vals[boot_rng.random_range(0..vals.len())]).sum();
                    kappa_ub * s / vals.len() as f64
                })
                .collect();
            boots.sort_by(|a, b| a.total_cmp(b));
            let lo = boots[((boots.len() as f64 - 1.0) * 0.025).round() as usize];
            let hi = boots[((boots.len() as f64 - 1.0) * 0.975).round() as usize];
            (lo.min(c_k), hi.max(c_k))
        };
        estimates.push(CkEstimate {
            k,
            c_k,
            ci_lower,
            ci_upper,
            argmax_state: argmax,
            a_tilde: 0.5 * l * (kappa.lower - c_k),
            d_tilde: 2f64.powf(0.5 * k + 2.0) * kappa_ub,
        });
    }

    let mut order: Vec<usize> = (0..ks.len()).collect();
    order.sort_by(|&a, &b| ks[a].total_cmp(&ks[b]));
    let non_increasing = order.windows(2).all(|w| estimates[w[1]].c_k <= estimates[w[0]].c_k);
    let k_star = order
        .iter()
        .map(|&i| &estimates[i])
        .find(|e| e.ci_upper < kappa.lower)
        .map(|e| e.k);
    if k_star.is_none() {
        warnings.push("no tested k has C_k below kappa_lb".into());
    }
    Ok(AveragingReport {
        label: "empirical supremum over sampled states".into(),
        alpha: kp.alpha(),
        zeta: kp.zeta(),
        eta: kp.eta(),
        kappa_lb: kappa.lower,
        kappa_ub,
        estimates,
        k_star,
        non_increasing,
        config: *cfg,
        warnings,
    })
}

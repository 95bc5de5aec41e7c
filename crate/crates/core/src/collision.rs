//! Post-collision states and exact sampling of the Borgnakke-Larsen parameters.
//!
//! An exchange collision draws `(σ, r, R)` and sets
//!
//! ```text
//! v'  = V + √(RE/m) σ,   I'  = r (1-R) E,
//! v'* = V - √(RE/m) σ,   I'* = (1-r)(1-R) E,
//! ```
//!
//! with `V = (v + v*)/2`. A frozen collision rotates the relative velocity,
//! `v' = V + |u|/2 σ`, `v'* = V - |u|/2 σ`, and leaves `I`, `I*` untouched.
//!
//! The strong form of the gain operator carries the factor `(I I* / I' I*')^α`
//! in front of `f' f'*`. A particle method never evaluates it: particles sample
//! `f` against `dv dI`, and the weak form of the operator,
//!
//! ```text
//! ∫ Q(f,f) ψ = ½ ∫ f f* (ψ' + ψ'* - ψ - ψ*) B b d_α dσ dr dR dv dv* dI dI*,
//! ```
//!
//! involves only `B b d_α`. Drawing pre-collision pairs from the ensemble and
//! `(σ, r, R)` from the density proportional to `B b d_α` realises exactly this
//! bilinear form.

use rand::Rng;
use rand_distr::{Beta, Distribution, UnitSphere};

use crate::error::{domain, Error, Result};
use crate::gas::Vec3;
use crate::kernel::{exchange_term_rates, pair_rates, AngularModel, KernelParams, PairState};

const UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionOutcome {
    pub v: Vec3,
    pub v_star: Vec3,
    pub internal: f64,
    pub internal_star: f64,
    pub sigma: Vec3,
    /// `r`, `R`; for frozen collisions these are `NaN`.
    pub r: f64,
    pub big_r: f64,
    pub frozen: bool,
}

fn check_sigma(sigma: &Vec3) -> Result<()> {
    let n = sigma.norm();
    if (n - 1.0).abs() > UNIT_TOL || !n.is_finite() {
        return Err(domain(format!("sigma must be a unit vector, |sigma| = {n}")));
    }
    Ok(())
}

/// Borgnakke-Larsen exchange collision.
pub fn apply_exchange_collision(p: &PairState, sigma: &Vec3, r: f64, big_r: f64) -> Result<CollisionOutcome> {
    check_sigma(sigma)?;
    if !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&big_r) {
        return Err(domain(format!("r and R must lie in [0, 1], got r = {r}, R = {big_r}")));
    }
    Ok(exchange(p, sigma, r, big_r))
}

#[inline]
pub(crate) fn exchange(p: &PairState, sigma: &Vec3, r: f64, big_r: f64) -> CollisionOutcome {
    let e = p.energy();
    let centre = p.centre_velocity();
    let dv = sigma * (big_r * e / p.mass).sqrt();
    let internal_total = (1.0 - big_r) * e;
    let internal = r * internal_total;
    CollisionOutcome {
        v: centre + dv,
        v_star: centre - dv,
        internal,
        // written as a difference so that I' + I'* = (1-R)E holds exactly
        internal_star: internal_total - internal,
        sigma: *sigma,
        r,
        big_r,
        frozen: false,
    }
}

/// Frozen collision: elastic in the translational variables, internal energies unchanged.
pub fn apply_frozen_collision(p: &PairState, sigma: &Vec3) -> Result<CollisionOutcome> {
    check_sigma(sigma)?;
    Ok(frozen(p, sigma))
}

#[inline]
pub(crate) fn frozen(p: &PairState, sigma: &Vec3) -> CollisionOutcome {
    let centre = p.centre_velocity();
    let dv = sigma * (0.5 * p.relative_velocity().norm());
    CollisionOutcome {
        v: centre + dv,
        v_star: centre - dv,
        internal: p.internal,
        internal_star: p.internal_star,
        sigma: *sigma,
        r: f64::NAN,
        big_r: f64::NAN,
        frozen: true,
    }
}

/// Exact sampler for `(σ, r, R)` with density proportional to `B̃ b d_α`.
///
/// `B̃` is a sum of three terms, each of which times `d_α` factorises into
/// Beta densities in `r` and `R`:
///
/// | term | `r` | `R` |
/// |------|-----|-----|
/// | `R^{ζ/2}\|u\|^ζ` | `Beta(α+1, α+1)` | `Beta((ζ+3)/2, 2α+2)` |
/// | `(r(1-R)I/m)^{ζ/2}` | `Beta(α+1+ζ/2, α+1)` | `Beta(3/2, 2α+2+ζ/2)` |
/// | `((1-r)(1-R)I*/m)^{ζ/2}` | `Beta(α+1, α+1+ζ/2)` | `Beta(3/2, 2α+2+ζ/2)` |
///
/// A term is picked with probability proportional to its closed-form integral.
#[derive(Debug, Clone)]
pub struct CollisionSampler {
    kp: KernelParams,
    trans_r: Beta<f64>,
    trans_big_r: Beta<f64>,
    int_r: Beta<f64>,
    int_r_star: Beta<f64>,
    int_big_r: Beta<f64>,
}

fn beta_dist(a: f64, b: f64) -> Result<Beta<f64>> {
    Beta::new(a, b).map_err(|e| domain(format!("Beta({a}, {b}): {e}")))
}

impl CollisionSampler {
    pub fn new(kp: &KernelParams) -> Result<Self> {
        let a = kp.alpha();
        let z2 = 0.5 * kp.zeta();
        Ok(Self {
            kp: *kp,
            trans_r: beta_dist(a + 1.0, a + 1.0)?,
            trans_big_r: beta_dist(1.5 + z2, 2.0 * a + 2.0)?,
            int_r: beta_dist(a + 1.0 + z2, a + 1.0)?,
            int_r_star: beta_dist(a + 1.0, a + 1.0 + z2)?,
            int_big_r: beta_dist(1.5, 2.0 * a + 2.0 + z2)?,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.kp
    }

    /// Draws `(σ, r, R)` for an exchange collision of `p`.
    pub fn sample_exchange<G: Rng + ?Sized>(&self, p: &PairState, rng: &mut G) -> Result<(Vec3, f64, f64)> {
        let w = exchange_term_rates(p, &self.kp);
        let total = w[0] + w[1] + w[2];
        if !(total > 0.0) {
            return Err(Error::ZeroRate);
        }
        let (r, big_r) = self.sample_r_big_r(&w, total, rng);
        Ok((sample_hemisphere(&p.u_hat(), &self.kp.angular(), rng), r, big_r))
    }

    /// Draws `(r, R)` given the three term weights and their sum.
    pub(crate) fn sample_r_big_r<G: Rng + ?Sized>(&self, w: &[f64; 3], total: f64, rng: &mut G) -> (f64, f64) {
        let pick = rng.random::<f64>() * total;
        if pick < w[0] {
            (self.trans_r.sample(rng), self.trans_big_r.sample(rng))
        } else if pick < w[0] + w[1] {
            (self.int_r.sample(rng), self.int_big_r.sample(rng))
        } else {
            (self.int_r_star.sample(rng), self.int_big_r.sample(rng))
        }
    }

    /// Draws an exchange or frozen collision according to `ω W_ex : (1-ω) W_fr`.
    /// Returns `None` when both rates vanish.
    pub fn collide<G: Rng + ?Sized>(&self, p: &PairState, rng: &mut G) -> Option<CollisionOutcome> {
        let (ex, fr) = pair_rates(p, &self.kp);
        let total = ex + fr;
        if !(total > 0.0) {
            return None;
        }
        Some(self.dispatch(p, ex, total, rng))
    }

    /// Performs an exchange collision with probability `ex / total`, frozen otherwise.
    pub(crate) fn dispatch<G: Rng + ?Sized>(&self, p: &PairState, ex: f64, total: f64, rng: &mut G) -> CollisionOutcome {
        if ex >= total || rng.random::<f64>() * total < ex {
            let w = exchange_term_rates(p, &self.kp);
            let (r, big_r) = self.sample_r_big_r(&w, w[0] + w[1] + w[2], rng);
            let sigma = sample_hemisphere(&p.u_hat(), &self.kp.angular(), rng);
            exchange(p, &sigma, r, big_r)
        } else {
            frozen(p, &sample_sphere(rng))
        }
    }
}

/// Uniform direction on `S²`.
pub fn sample_sphere<G: Rng + ?Sized>(rng: &mut G) -> Vec3 {
    let s: [f64; 3] = UnitSphere.sample(rng);
    Vec3::from(s)
}

/// Direction on the hemisphere `σ·û ≥ 0` with density proportional to `b(σ·û)`.
pub fn sample_hemisphere<G: Rng + ?Sized>(u_hat: &Vec3, angular: &AngularModel, rng: &mut G) -> Vec3 {
    loop {
        let mut s = sample_sphere(rng);
        let mut x = s.dot(u_hat);
        if x < 0.0 {
            s = -s;
            x = -x;
        }
        if angular.is_uniform() || rng.random::<f64>() * angular.sup() <= angular.value(x) {
            return s;
        }
    }
}

/// One-shot form of [`CollisionSampler::sample_exchange`].
pub fn sample_exchange_parameters<G: Rng + ?Sized>(
    p: &PairState,
    kp: &KernelParams,
    rng: &mut G,
) -> Result<(Vec3, f64, f64)> {
    CollisionSampler::new(kp)?.sample_exchange(p, rng)
}

/// One-shot form of [`CollisionSampler::collide`].
pub fn collide<G: Rng + ?Sized>(p: &PairState, kp: &KernelParams, rng: &mut G) -> Result<Option<CollisionOutcome>> {
    Ok(CollisionSampler::new(kp)?.collide(p, rng))
}

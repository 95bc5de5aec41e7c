//! Collision kernels, the Borgnakke-Larsen weight `d_α`, and closed-form kernel integrals.
//!
//! The exchange kernel factorises as `b(û·σ) · B̃(v, v*, I, I*, r, R)` with
//!
//! ```text
//! B̃ = K N_α [ R^{ζ/2} |u|^ζ + η (r(1-R) I/m)^{ζ/2} + η ((1-r)(1-R) I*/m)^{ζ/2} ],
//! N_α = 2 Γ(2α + 7/2) / (√π Γ(α+1)²),
//! ```
//!
//! and the frozen (internal-energy preserving) kernel is
//!
//! ```text
//! B^f = K [ |u|^{2ζ} / (4E/m)^{ζ/2} + η_f (I^ζ + I*^ζ) / (mE)^{ζ/2} ].
//! ```
//!
//! Because `d_α` factorises into an `r` part and an `R` part, each of the three
//! terms of `B̃` integrates against `d_α` to a product of Beta functions. Those
//! closed forms drive both the pair rates and the exact parameter sampler in
//! [`crate::collision`].

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gas::{bracket_sq, Particle, Vec3};
use crate::quad::{integrate_rectangle, TanhSinh};
use crate::special::{beta, kernel_normalisation};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Angular factor `b(x)`, `x = û·σ ∈ [0, 1]`, supported on the hemisphere `û·σ ≥ 0`.
///
/// A user-chosen `b` is taken as already symmetrised onto the hemisphere; nothing
/// here folds `b(-x)` back in.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngularModel {
    /// `b ≡ 1`, `‖b‖_{L¹} = 2π`.
    #[default]
    Uniform,
    /// `b(x) = x^γ`, `γ ≥ 0`.
    CosinePower { exponent: f64 },
}

impl AngularModel {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            AngularModel::Uniform => 1.0,
            AngularModel::CosinePower { exponent } => x.max(0.0).powf(exponent),
        }
    }

    /// `∫_{S²₊} b(û·σ) dσ = 2π ∫₀¹ b(x) dx`.
    pub fn l1_norm(&self) -> f64 {
        match *self {
            AngularModel::Uniform => TWO_PI,
            AngularModel::CosinePower { exponent } => TWO_PI / (exponent + 1.0),
        }
    }

    /// `‖b‖_∞`, the majorant used for rejection sampling of σ.
    pub fn sup(&self) -> f64 {
        1.0
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, AngularModel::Uniform)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            AngularModel::Uniform => Ok(()),
            AngularModel::CosinePower { exponent } if exponent >= 0.0 && exponent.is_finite() => Ok(()),
            AngularModel::CosinePower { exponent } => {
                Err(domain(format!("angular.exponent must be non-negative, got {exponent}")))
            }
        }
    }
}

/// User-facing kernel settings; `α` comes from the species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSettings {
    pub zeta: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub eta_f: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub angular: AngularModel,
}

fn default_omega() -> f64 {
    1.0
}

impl Default for KernelSettings {
    fn default() -> Self {
        Self {
            zeta: 1.0,
            k: 1.0,
            eta: 0.5,
            eta_f: 0.5,
            omega: 1.0,
            angular: AngularModel::Uniform,
        }
    }
}

/// Validated kernel parameters with cached normalisation and Beta-function integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    alpha: f64,
    settings: KernelSettings,
    normalisation: f64,
    a_trans: f64,
    a_int: f64,
}

impl KernelParams {
    pub fn new(alpha: f64, settings: KernelSettings) -> Result<Self> {
        let s = settings;
        if !(alpha > -1.0 && alpha.is_finite()) {
            return Err(domain(format!("alpha must exceed -1, got {alpha}")));
        }
        if !(s.zeta > 0.0 && s.zeta <= 2.0) {
            return Err(domain(format!("zeta must lie in (0, 2], got {}", s.zeta)));
        }
        if !(s.k >= 0.0 && s.k.is_finite()) {
            return Err(domain(format!("K must be non-negative, got {}", s.k)));
        }
        if !(s.eta >= 0.0 && s.eta.is_finite()) {
            return Err(domain(format!("eta must be non-negative, got {}", s.eta)));
        }
        if !(s.eta_f >= 0.0 && s.eta_f.is_finite()) {
            return Err(domain(format!("eta_f must be non-negative, got {}", s.eta_f)));
        }
        if !(0.0..=1.0).contains(&s.omega) {
            return Err(domain(format!("omega must lie in [0, 1], got {}", s.omega)));
        }
        s.angular.validate()?;
        let z2 = 0.5 * s.zeta;
        Ok(Self {
            alpha,
            settings: s,
            normalisation: kernel_normalisation(alpha),
            a_trans: beta(alpha + 1.0, alpha + 1.0) * beta(1.5 + z2, 2.0 * alpha + 2.0),
            a_int: beta(alpha + 1.0 + z2, alpha + 1.0) * beta(1.5, 2.0 * alpha + 2.0 + z2),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn zeta(&self) -> f64 {
        self.settings.zeta
    }
    pub fn k(&self) -> f64 {
        self.settings.k
    }
    pub fn eta(&self) -> f64 {
        self.settings.eta
    }
    pub fn eta_f(&self) -> f64 {
        self.settings.eta_f
    }
    pub fn omega(&self) -> f64 {
        self.settings.omega
    }
    pub fn angular(&self) -> AngularModel {
        self.settings.angular
    }
    pub fn settings(&self) -> &KernelSettings {
        &self.settings
    }

    /// `N_α = 2Γ(2α+7/2) / (√π Γ(α+1)²)`.
    pub fn normalisation(&self) -> f64 {
        self.normalisation
    }

    /// `A_R = ∫ R^{ζ/2} d_α dr dR = B(α+1, α+1) B((ζ+3)/2, 2α+2)`.
    pub fn translational_integral(&self) -> f64 {
        self.a_trans
    }

    /// `A_r = ∫ (r(1-R))^{ζ/2} d_α dr dR = B(α+1+ζ/2, α+1) B(3/2, 2α+2+ζ/2)`.
    pub fn internal_integral(&self) -> f64 {
        self.a_int
    }

    /// Same parameters with `K` replaced.
    pub fn with_k(&self, k: f64) -> Result<Self> {
        Self::new(self.alpha, KernelSettings { k, ..self.settings })
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self> {
        Self::new(self.alpha, KernelSettings { omega, ..self.settings })
    }

    /// Constants `(c_ex, c_fr)` with `ω W_ex ≤ c_ex (E/m)^{ζ/2}` and `(1-ω) W_fr ≤ c_fr (E/m)^{ζ/2}`.
    pub fn majorant_coefficients(&self) -> (f64, f64) {
        let s = &self.settings;
        let two_zeta = 2f64.powf(s.zeta);
        let ex = s.angular.l1_norm() * s.k * self.normalisation * (two_zeta * self.a_trans + 2.0 * s.eta * self.a_int);
        let fr = FOUR_PI * s.k * (two_zeta + 2.0 * s.eta_f);
        (s.omega * ex, (1.0 - s.omega) * fr)
    }
}

/// Two colliding molecules together with `u = v - v*` and the collision energy `E = m|u|²/4 + I + I*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairState {
    pub v: Vec3,
    pub v_star: Vec3,
    pub internal: f64,
    pub internal_star: f64,
    pub mass: f64,
    u: Vec3,
    energy: f64,
}

impl PairState {
    pub fn new(v: Vec3, internal: f64, v_star: Vec3, internal_star: f64, mass: f64) -> Result<Self> {
        if internal < 0.0 || internal_star < 0.0 {
            return Err(domain("internal energies must be non-negative"));
        }
        if !(mass > 0.0) {
            return Err(domain(format!("mass must be positive, got {mass}")));
        }
        Ok(Self::unchecked(v, internal, v_star, internal_star, mass))
    }

    pub fn from_particles(a: &Particle, b: &Particle, mass: f64) -> Self {
        Self::unchecked(a.v, a.internal, b.v, b.internal, mass)
    }

    #[inline]
    pub(crate) fn unchecked(v: Vec3, internal: f64, v_star: Vec3, internal_star: f64, mass: f64) -> Self {
        let u = v - v_star;
        let energy = 0.25 * mass * u.norm_squared() + internal + internal_star;
        Self {
            v,
            v_star,
            internal,
            internal_star,
            mass,
            u,
            energy,
        }
    }

    /// Relative velocity `u = v - v*`.
    pub fn relative_velocity(&self) -> Vec3 {
        self.u
    }

    /// Collision energy `E`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `û`, with the convention `(0, 0, 1)` when `u = 0`.
    pub fn u_hat(&self) -> Vec3 {
        let n = self.u.norm();
        if n > 0.0 {
            self.u / n
        } else {
            Vec3::new(0.0, 0.0, 1.0)
        }
    }

    /// Centre-of-mass velocity `V = (v + v*)/2`.
    pub fn centre_velocity(&self) -> Vec3 {
        0.5 * (self.v + self.v_star)
    }

    /// Bracket energy `⟨v, I⟩² + ⟨v*, I*⟩²`.
    pub fn bracket_energy(&self) -> f64 {
        bracket_sq(&self.v, self.internal, self.mass) + bracket_sq(&self.v_star, self.internal_star, self.mass)
    }
}

fn check_unit(x: f64, name: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in [0, 1], got {x}")))
    }
}

/// `d_α(r, R) = r^α (1-r)^α (1-R)^{2α+1} √R`.
pub fn d_alpha_weight(r: f64, big_r: f64, alpha: f64) -> Result<f64> {
    check_unit(r, "r")?;
    check_unit(big_r, "R")?;
    Ok(d_alpha(r, big_r, alpha))
}

#[inline]
pub(crate) fn d_alpha(r: f64, big_r: f64, alpha: f64) -> f64 {
    if big_r == 0.0 {
        return 0.0;
    }
    let rr = if alpha == 0.0 { 1.0 } else { (r * (1.0 - r)).powf(alpha) };
    rr * (1.0 - big_r).powf(2.0 * alpha + 1.0) * big_r.sqrt()
}

/// `d_α` in terms of `s = 1 - R`.
#[inline]
fn d_alpha_s(r: f64, s: f64, alpha: f64) -> f64 {
    if s == 1.0 {
        return 0.0;
    }
    let rr = if alpha == 0.0 { 1.0 } else { (r * (1.0 - r)).powf(alpha) };
    rr * s.powf(2.0 * alpha + 1.0) * (1.0 - s).sqrt()
}

/// Total mass `∫ d_α dr dR = B(α+1, α+1) B(3/2, 2α+2)`.
pub fn d_alpha_mass(alpha: f64) -> f64 {
    beta(alpha + 1.0, alpha + 1.0) * beta(1.5, 2.0 * alpha + 2.0)
}

/// The σ-independent exchange kernel `B̃(v, v*, I, I*, r, R)`.
pub fn evaluate_physical_kernel(p: &PairState, r: f64, big_r: f64, kp: &KernelParams) -> Result<f64> {
    check_unit(r, "r")?;
    check_unit(big_r, "R")?;
    Ok(physical_kernel(p, r, big_r, kp))
}

pub(crate) fn physical_kernel(p: &PairState, r: f64, big_r: f64, kp: &KernelParams) -> f64 {
    let z2 = 0.5 * kp.zeta();
    let m = p.mass;
    let trans = big_r.powf(z2) * p.u.norm().powf(kp.zeta());
    let a = (r * (1.0 - big_r) * p.internal / m).powf(z2);
    let b = ((1.0 - r) * (1.0 - big_r) * p.internal_star / m).powf(z2);
    kp.k() * kp.normalisation() * (trans + kp.eta() * (a + b))
}

/// The frozen-collision kernel `B^f(v, v*, I, I*)`; defined as 0 at `E = 0`.
pub fn evaluate_frozen_kernel(p: &PairState, kp: &KernelParams) -> f64 {
    let e = p.energy;
    if e <= 0.0 {
        return 0.0;
    }
    let z = kp.zeta();
    let m = p.mass;
    let u2 = p.u.norm_squared();
    let trans = if u2 > 0.0 {
        u2.powf(z) / (4.0 * e / m).powf(0.5 * z)
    } else {
        0.0
    };
    let internal = if kp.eta_f() > 0.0 {
        kp.eta_f() * (p.internal.powf(z) + p.internal_star.powf(z)) / (m * e).powf(0.5 * z)
    } else {
        0.0
    };
    kp.k() * (trans + internal)
}

/// The three closed-form integrals `‖b‖ ∫ (term_i) d_α dr dR` of the exchange kernel:
/// translational, `I`-term and `I*`-term. Their sum is the pair rate.
pub fn exchange_term_rates(p: &PairState, kp: &KernelParams) -> [f64; 3] {
    let z2 = 0.5 * kp.zeta();
    let m = p.mass;
    let scale = kp.angular().l1_norm() * kp.k() * kp.normalisation();
    let trans = scale * p.u.norm().powf(kp.zeta()) * kp.translational_integral();
    if kp.eta() == 0.0 {
        return [trans, 0.0, 0.0];
    }
    let c = scale * kp.eta() * kp.internal_integral();
    [trans, c * (p.internal / m).powf(z2), c * (p.internal_star / m).powf(z2)]
}

/// Exchange pair rate `W_ex = ∫ B̃ b d_α dσ dR dr`.
pub fn pair_rate_physical(p: &PairState, kp: &KernelParams) -> f64 {
    exchange_term_rates(p, kp).iter().sum()
}

/// Frozen pair rate `W_fr = ∫_{S²} B^f dσ = 4π B^f`.
pub fn pair_rate_frozen(p: &PairState, kp: &KernelParams) -> f64 {
    FOUR_PI * evaluate_frozen_kernel(p, kp)
}

/// Pair rate of the convex operator, `ω W_ex + (1-ω) W_fr`, with its two parts.
pub fn pair_rates(p: &PairState, kp: &KernelParams) -> (f64, f64) {
    let w = kp.omega();
    let ex = if w > 0.0 { w * pair_rate_physical(p, kp) } else { 0.0 };
    let fr = if w < 1.0 { (1.0 - w) * pair_rate_frozen(p, kp) } else { 0.0 };
    (ex, fr)
}

/// Explicit `b̃^{lb}`, `b̃^{ub}` with `b̃^{lb}(E/m)^{ζ/2} ≤ B̃ ≤ b̃^{ub}(E/m)^{ζ/2}`.
///
/// The upper bound uses `|u|² ≤ 4E/m` and `I, I* ≤ E`. The lower bound uses
/// `max{m|u|²/4, I, I*} ≥ E/3`, so the largest of the three terms is at least
/// `3^{-ζ/2}` times its own coefficient, which in turn is at least the minimum
/// coefficient.
#[derive(Debug, Clone, Copy)]
pub struct SandwichBounds {
    zeta: f64,
    eta: f64,
    scale: f64,
}

impl SandwichBounds {
    pub fn upper(&self, r: f64, big_r: f64) -> f64 {
        let z2 = 0.5 * self.zeta;
        self.scale
            * ((4.0 * big_r).powf(z2)
                + self.eta * (r * (1.0 - big_r)).powf(z2)
                + self.eta * ((1.0 - r) * (1.0 - big_r)).powf(z2))
    }

    pub fn lower(&self, r: f64, big_r: f64) -> f64 {
        let z2 = 0.5 * self.zeta;
        let t1 = (4.0 * big_r).powf(z2);
        let t2 = self.eta * (r * (1.0 - big_r)).powf(z2);
        let t3 = self.eta * ((1.0 - r) * (1.0 - big_r)).powf(z2);
        self.scale * 3f64.powf(-z2) * t1.min(t2).min(t3)
    }

    /// Interior kink of `lower` in `R` at fixed `r`: where `4R = η^{2/ζ} min(r, 1-r) (1-R)`.
    fn lower_kink(&self, r: f64) -> Vec<f64> {
        if self.eta == 0.0 {
            return vec![];
        }
        let c = self.eta.powf(2.0 / self.zeta) * r.min(1.0 - r);
        vec![c / (4.0 + c)]
    }
}

pub fn sandwich_bounds(kp: &KernelParams) -> SandwichBounds {
    SandwichBounds {
        zeta: kp.zeta(),
        eta: kp.eta(),
        scale: kp.k() * kp.normalisation(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaBounds {
    pub lower: f64,
    pub upper: f64,
    pub warning: Option<String>,
}

/// `‖b‖ ∫∫ g(r, R) d_α(r, R) dr dR` by iterated double-exponential quadrature.
///
/// `r_breaks` and `big_r_breaks` mark kinks of `g`.
pub fn kappa_integral<G, B>(alpha: f64, angular: &AngularModel, g: G, r_breaks: &[f64], big_r_breaks: B) -> f64
where
    G: Fn(f64, f64) -> f64,
    B: Fn(f64) -> Vec<f64>,
{
    // inner variable s = 1 - R puts the (1-R)^{2α+1} factor at the left endpoint
    let q = TanhSinh::with_tol(1e-11);
    let est = integrate_rectangle(
        &q,
        &TanhSinh::with_tol(1e-13),
        |r, s| g(r, 1.0 - s) * d_alpha_s(r, s, alpha),
        (0.0, 1.0),
        (0.0, 1.0),
        r_breaks,
        |r| big_r_breaks(r).into_iter().map(|b| 1.0 - b).collect(),
    );
    angular.l1_norm() * est.value
}

/// `κ^{lb}`, `κ^{ub}`: the sandwich functions integrated against `b d_α`.
pub fn kappa_bounds(kp: &KernelParams) -> KappaBounds {
    let sb = sandwich_bounds(kp);
    let angular = kp.angular();
    let upper = kappa_integral(kp.alpha(), &angular, |r, rr| sb.upper(r, rr), &[], |_| vec![]);
    let (lower, warning) = if kp.eta() == 0.0 {
        (0.0, Some("eta = 0: the lower sandwich bound vanishes identically".to_string()))
    } else {
        let lower = kappa_integral(kp.alpha(), &angular, |r, rr| sb.lower(r, rr), &[0.5], |r| sb.lower_kink(r));
        (lower, None)
    };
    KappaBounds { lower, upper, warning }
}

/// Closed form of `κ^{ub}`: `‖b‖ K N_α (2^ζ A_R + 2η A_r)`.
pub fn kappa_upper_closed_form(kp: &KernelParams) -> f64 {
    kp.angular().l1_norm()
        * kp.k()
        * kp.normalisation()
        * (2f64.powf(kp.zeta()) * kp.translational_integral() + 2.0 * kp.eta() * kp.internal_integral())
}

fn check_rho_args(alpha: f64, zeta: f64, q: f64) -> Result<()> {
    if !(alpha > -1.0) {
        return Err(domain(format!("alpha must exceed -1, got {alpha}")));
    }
    if !(zeta > 0.0 && zeta <= 2.0) {
        return Err(domain(format!("zeta must lie in (0, 2], got {zeta}")));
    }
    if !(q >= 1.0) {
        return Err(domain(format!("q must be at least 1, got {q}")));
    }
    Ok(())
}

/// Exponents `(α - (1+ζ/2)/q, 2α + 1 - 1/q)` of `r` and `1-R` in the `ρ_q` integrand.
pub fn rho_q_exponents(alpha: f64, zeta: f64, q: f64) -> (f64, f64) {
    let inv_q = 1.0 / q;
    (alpha - (1.0 + 0.5 * zeta) * inv_q, 2.0 * alpha + 1.0 - inv_q)
}

/// `ρ_q = ∫ r^{-(1+ζ/2)/q} (1-R)^{-1/q} d_α dr dR` with `b̃^{ub} ≡ 1`:
/// `B(α+1-(1+ζ/2)/q, α+1) B(3/2, 2α+2-1/q)`, or `+∞` when the integral diverges.
/// `q = ∞` is accepted.
pub fn rho_q(alpha: f64, zeta: f64, q: f64) -> Result<f64> {
    check_rho_args(alpha, zeta, q)?;
    let (er, e_one_minus) = rho_q_exponents(alpha, zeta, q);
    if er <= -1.0 || e_one_minus <= -1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(beta(er + 1.0, alpha + 1.0) * beta(1.5, e_one_minus + 1.0))
}

/// `ρ_q` by direct 2D quadrature of its defining integrand (finite region only).
pub fn rho_q_by_quadrature(alpha: f64, zeta: f64, q: f64) -> Result<f64> {
    check_rho_args(alpha, zeta, q)?;
    let (er, e_one_minus) = rho_q_exponents(alpha, zeta, q);
    if er <= -1.0 || e_one_minus <= -1.0 {
        return Ok(f64::INFINITY);
    }
    let est = integrate_rectangle(
        &TanhSinh::with_tol(1e-12),
        &TanhSinh::with_tol(1e-13),
        |r, s| r.powf(er) * (1.0 - r).powf(alpha) * s.powf(e_one_minus) * (1.0 - s).sqrt(),
        (0.0, 1.0),
        (0.0, 1.0),
        &[],
        |_| vec![],
    );
    Ok(est.value)
}

/// Slack in the bracket sandwich `L⟨v,I⟩^ζ - ⟨v*,I*⟩^ζ ≤ (E/m)^{ζ/2} ≤ ⟨v,I⟩^ζ + ⟨v*,I*⟩^ζ`,
/// `L = 2^{-ζ} min{1, 2^{1-ζ}}`. Both returned values are non-negative when the bounds hold.
pub fn bracket_sandwich_slack(p: &PairState, zeta: f64) -> (f64, f64) {
    let z2 = 0.5 * zeta;
    let b = bracket_sq(&p.v, p.internal, p.mass).powf(z2);
    let bs = bracket_sq(&p.v_star, p.internal_star, p.mass).powf(z2);
    let e = (p.energy / p.mass).powf(z2);
    let l = 2f64.powf(-zeta) * 1f64.min(2f64.powf(1.0 - zeta));
    (e - (l * b - bs), b + bs - e)
}

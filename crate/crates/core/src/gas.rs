//! Particle states, species constants, empirical moments and the polyatomic Maxwellian.
//!
//! A polyatomic molecule carries a velocity `v ∈ R³` and a continuous internal
//! energy `I ≥ 0`. The distribution `f(v, I)` is represented by an ensemble of
//! `N` equally weighted particles, each standing for `n/N` molecules per unit
//! volume.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};
use crate::quad::TanhSinh;
use crate::SimRng;

pub type Vec3 = Vector3<f64>;

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Unit convention: SI, or reduced units in which `k_B = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitSystem {
    #[default]
    Si,
    Reduced,
}

impl UnitSystem {
    pub fn boltzmann(self) -> f64 {
        match self {
            UnitSystem::Si => BOLTZMANN,
            UnitSystem::Reduced => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub v: Vec3,
    /// Internal energy `I ≥ 0`.
    pub internal: f64,
}

impl Particle {
    pub fn new(v: Vec3, internal: f64) -> Result<Self> {
        let p = Self { v, internal };
        p.validate()?;
        Ok(p)
    }

    pub fn at_rest() -> Self {
        Self {
            v: Vec3::zeros(),
            internal: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().all(|c| c.is_finite()) && self.internal.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(domain(format!("non-finite particle state {self:?}")));
        }
        if self.internal < 0.0 {
            return Err(domain(format!("negative internal energy {}", self.internal)));
        }
        Ok(())
    }
}

/// Molecular constants of the single gas species.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Species {
    pub mass: f64,
    /// Internal-structure exponent, `α > -1`.
    pub alpha: f64,
    #[serde(default)]
    pub units: UnitSystem,
}

impl Species {
    pub fn new(mass: f64, alpha: f64, units: UnitSystem) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(domain(format!("mass must be positive, got {mass}")));
        }
        if !(alpha > -1.0 && alpha.is_finite()) {
            return Err(domain(format!("alpha must exceed -1, got {alpha}")));
        }
        Ok(Self { mass, alpha, units })
    }

    /// Reduced units with `m = 1`, `k_B = 1`.
    pub fn reduced(alpha: f64) -> Result<Self> {
        Self::new(1.0, alpha, UnitSystem::Reduced)
    }

    pub fn boltzmann(&self) -> f64 {
        self.units.boltzmann()
    }
}

/// Lebesgue bracket `⟨v, I⟩ = sqrt(1 + |v|²/2 + I/m)`.
pub fn lebesgue_bracket(v: &Vec3, internal: f64, mass: f64) -> Result<f64> {
    if internal < 0.0 || internal.is_nan() {
        return Err(domain(format!("internal energy must be non-negative, got {internal}")));
    }
    if !(mass > 0.0) {
        return Err(domain(format!("mass must be positive, got {mass}")));
    }
    Ok(bracket_sq(v, internal, mass).sqrt())
}

/// Squared bracket without argument checks, for hot loops.
#[inline]
pub fn bracket_sq(v: &Vec3, internal: f64, mass: f64) -> f64 {
    1.0 + 0.5 * v.norm_squared() + internal / mass
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedTotals {
    /// Mass density `n·m`.
    pub mass: f64,
    /// Momentum density.
    pub momentum: Vec3,
    /// Total energy density (kinetic plus internal).
    pub energy: f64,
}

/// Particle population representing `f(v, I)` with uniform statistical weight `n/N`.
#[derive(Debug, Clone)]
pub struct Ensemble {
    species: Species,
    particles: Vec<Particle>,
    number_density: f64,
    initial: ConservedTotals,
}

impl Ensemble {
    pub fn new(species: Species, particles: Vec<Particle>, number_density: f64) -> Result<Self> {
        if particles.is_empty() {
            return Err(domain("ensemble needs at least one particle"));
        }
        if !(number_density > 0.0 && number_density.is_finite()) {
            return Err(domain(format!("number density must be positive, got {number_density}")));
        }
        for p in &particles {
            p.validate()?;
        }
        let mut ens = Self {
            species,
            particles,
            number_density,
            initial: ConservedTotals {
                mass: 0.0,
                momentum: Vec3::zeros(),
                energy: 0.0,
            },
        };
        ens.initial = ens.conserved_totals();
        Ok(ens)
    }

    pub fn species(&self) -> &Species {
        &self.species
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub(crate) fn particles_mut(&mut self) -> &mut [Particle] {
        &mut self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn number_density(&self) -> f64 {
        self.number_density
    }

    /// Statistical weight `n/N` carried by every particle.
    pub fn weight(&self) -> f64 {
        self.number_density / self.particles.len() as f64
    }

    /// Totals recorded when the ensemble was built.
    pub fn initial_totals(&self) -> &ConservedTotals {
        &self.initial
    }

    /// Same particles with every statistical weight multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.species, self.particles.clone(), self.number_density * factor)
    }

    pub fn conserved_totals(&self) -> ConservedTotals {
        let m = self.species.mass;
        let w = self.weight();
        let mut momentum = Vec3::zeros();
        let mut energy = 0.0;
        for p in &self.particles {
            momentum += p.v;
            energy += 0.5 * m * p.v.norm_squared() + p.internal;
        }
        ConservedTotals {
            mass: self.number_density * m,
            momentum: momentum * (w * m),
            energy: energy * w,
        }
    }

    /// Empirical `L¹_k` moment `(n·m/N) Σ ⟨v_i, I_i⟩^k`.
    pub fn l1_moment(&self, k: f64) -> Result<f64> {
        if !(k >= 0.0) {
            return Err(domain(format!("moment order must be non-negative, got {k}")));
        }
        let m = self.species.mass;
        let half_k = 0.5 * k;
        let sum: f64 = self
            .particles
            .iter()
            .map(|p| bracket_sq(&p.v, p.internal, m).powf(half_k))
            .sum();
        Ok(sum * self.weight() * m)
    }

    pub fn mean_velocity(&self) -> Vec3 {
        let sum: Vec3 = self.particles.iter().map(|p| p.v).sum();
        sum / self.particles.len() as f64
    }

    /// Mean energy per particle in the frame moving with the mean velocity.
    pub fn peculiar_energy_per_particle(&self) -> f64 {
        let c = self.mean_velocity();
        let m = self.species.mass;
        let sum: f64 = self
            .particles
            .iter()
            .map(|p| 0.5 * m * (p.v - c).norm_squared() + p.internal)
            .sum();
        sum / self.particles.len() as f64
    }

    /// Equilibrium temperature fixed by the conserved energy, `e / ((α + 5/2) k_B)`.
    pub fn temperature(&self) -> f64 {
        self.peculiar_energy_per_particle() / ((self.species.alpha + 2.5) * self.species.boltzmann())
    }

    /// Translational temperature `m ⟨|v - c|²⟩ / (3 k_B)`.
    pub fn translational_temperature(&self) -> f64 {
        let c = self.mean_velocity();
        let m = self.species.mass;
        let sum: f64 = self.particles.iter().map(|p| (p.v - c).norm_squared()).sum();
        m * sum / (3.0 * self.particles.len() as f64 * self.species.boltzmann())
    }

    /// Internal temperature `⟨I⟩ / ((α + 1) k_B)`.
    pub fn internal_temperature(&self) -> f64 {
        let sum: f64 = self.particles.iter().map(|p| p.internal).sum();
        sum / (self.particles.len() as f64 * (self.species.alpha + 1.0) * self.species.boltzmann())
    }

    /// Maxwellian with the same mass, momentum and energy as the ensemble.
    pub fn matched_maxwellian(&self) -> MaxwellianParams {
        MaxwellianParams {
            density: self.number_density * self.species.mass,
            velocity: self.mean_velocity(),
            temperature: self.temperature(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxwellianParams {
    /// Mass density `ρ`.
    pub density: f64,
    /// Bulk velocity `U`.
    pub velocity: Vec3,
    pub temperature: f64,
}

impl MaxwellianParams {
    fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(domain(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return Err(domain(format!("density must be non-negative, got {}", self.density)));
        }
        Ok(())
    }
}

/// Polyatomic Maxwellian
/// `M = ρ / (m (k_B T)^{α+1} Γ(α+1)) · (m / 2π k_B T)^{3/2} · I^α · exp(-(m|v-U|²/2 + I) / k_B T)`.
pub fn maxwellian_density(v: &Vec3, internal: f64, params: &MaxwellianParams, sp: &Species) -> Result<f64> {
    params.validate()?;
    if internal < 0.0 {
        return Err(domain(format!("internal energy must be non-negative, got {internal}")));
    }
    if params.density == 0.0 {
        return Ok(0.0);
    }
    let kt = sp.boltzmann() * params.temperature;
    let m = sp.mass;
    let a = sp.alpha;
    let energy = 0.5 * m * (v - params.velocity).norm_squared() + internal;
    let ln_prefactor = (params.density / m).ln()
        - (a + 1.0) * kt.ln()
        - ln_gamma(a + 1.0)
        + 1.5 * (m / (2.0 * std::f64::consts::PI * kt)).ln();
    let ln_i = if a == 0.0 { 0.0 } else { a * internal.ln() };
    Ok((ln_prefactor + ln_i - energy / kt).exp())
}

/// Draws `n_particles` from the Maxwellian: Gaussian velocities with variance `k_B T/m`
/// per axis around `U`, internal energies from `Gamma(α + 1, k_B T)`.
pub fn sample_maxwellian(params: &MaxwellianParams, sp: &Species, n_particles: usize, seed: u64) -> Result<Ensemble> {
    params.validate()?;
    if n_particles == 0 {
        return Err(domain("need at least one particle"));
    }
    if !(sp.alpha > -1.0) {
        return Err(domain(format!("alpha must exceed -1, got {}", sp.alpha)));
    }
    if params.density <= 0.0 {
        return Err(domain("sampling requires positive density"));
    }
    let mut rng = SimRng::seed_from_u64(seed);
    let kt = sp.boltzmann() * params.temperature;
    let sd = (kt / sp.mass).sqrt();
    let gamma = Gamma::new(sp.alpha + 1.0, kt).map_err(|e| domain(e.to_string()))?;
    let particles = (0..n_particles)
        .map(|_| {
            let z = Vec3::from_fn(|_, _| StandardNormal.sample(&mut rng));
            Particle {
                v: params.velocity + z * sd,
                internal: gamma.sample(&mut rng),
            }
        })
        .collect();
    Ensemble::new(*sp, particles, params.density / sp.mass)
}

/// Maxwellian `L¹_k` moment `ρ · E_M[⟨v, I⟩^k]`, by quadrature.
///
/// With `U` along one axis, `⟨v, I⟩² = 1 + (|U| + w)²/2 + (k_B T/m) G`, where
/// `w ~ N(0, k_B T/m)` and `G ~ Gamma(α + 2, 1)` collects the two transverse
/// velocity components and the internal energy.
pub fn maxwellian_l1_moment(params: &MaxwellianParams, sp: &Species, k: f64) -> Result<f64> {
    params.validate()?;
    if !(k >= 0.0) {
        return Err(domain(format!("moment order must be non-negative, got {k}")));
    }
    let m = sp.mass;
    let theta = sp.boltzmann() * params.temperature / m;
    let sd = theta.sqrt();
    let speed = params.velocity.norm();
    let shape = sp.alpha + 2.0;
    let ln_norm = ln_gamma(shape);
    let q = TanhSinh::with_tol(1e-11);
    let inner = TanhSinh::with_tol(1e-12);
    let est = q.integrate_semi_infinite(
        |g| {
            let gamma_pdf = ((shape - 1.0) * g.ln() - g - ln_norm).exp();
            if gamma_pdf == 0.0 {
                return 0.0;
            }
            let base = 1.0 + theta * g;
            let gauss = inner.integrate_real_line(
                |w| {
                    let z = w / sd;
                    let pdf = (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
                    if pdf == 0.0 {
                        return 0.0;
                    }
                    let vp = speed + w;
                    pdf * (base + 0.5 * vp * vp).powf(0.5 * k)
                },
                0.0,
            );
            gamma_pdf * gauss.value
        },
        0.0,
    );
    Ok(params.density * est.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bracket_examples() {
        assert_eq!(lebesgue_bracket(&Vec3::zeros(), 0.0, 1.0).unwrap(), 1.0);
        assert_relative_eq!(lebesgue_bracket(&Vec3::new(2.0, 0.0, 0.0), 0.0, 1.0).unwrap(), 3f64.sqrt());
        assert_relative_eq!(
            lebesgue_bracket(&Vec3::new(1.0, 1.0, 1.0), 0.5, 2.0).unwrap(),
            2.75f64.sqrt()
        );
        assert!(lebesgue_bracket(&Vec3::zeros(), -1.0, 1.0).is_err());
        assert!(lebesgue_bracket(&Vec3::zeros(), 1.0, 0.0).is_err());
    }

    #[test]
    fn moments_of_small_ensembles() {
        let sp = Species::reduced(0.0).unwrap();
        let one = Ensemble::new(sp, vec![Particle::at_rest()], 1.0).unwrap();
        for k in [0.0, 1.0, 2.5, 7.0] {
            assert_eq!(one.l1_moment(k).unwrap(), 1.0);
        }
        let two = Ensemble::new(
            sp,
            vec![Particle::new(Vec3::new(2.0, 0.0, 0.0), 0.0).unwrap(), Particle::at_rest()],
            2.0,
        )
        .unwrap();
        assert_relative_eq!(two.l1_moment(2.0).unwrap(), 4.0);
        assert_relative_eq!(two.l1_moment(3.0).unwrap(), 1.0 + 3f64.powf(1.5));
        assert_relative_eq!(two.l1_moment(0.0).unwrap(), 2.0);
        assert!(two.l1_moment(-1.0).is_err());
    }

    #[test]
    fn totals_single_particle() {
        let sp = Species::new(2.0, 0.0, UnitSystem::Reduced).unwrap();
        let ens = Ensemble::new(sp, vec![Particle::new(Vec3::new(1.0, 0.0, 0.0), 2.0).unwrap()], 1.0).unwrap();
        let t = ens.conserved_totals();
        assert_eq!(t.mass, 2.0);
        assert_eq!(t.momentum, Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(t.energy, 3.0);
        let rest = Ensemble::new(sp, vec![Particle::at_rest(); 5], 3.0).unwrap();
        let t = rest.conserved_totals();
        assert_eq!((t.mass, t.momentum, t.energy), (6.0, Vec3::zeros(), 0.0));
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(Species::new(0.0, 0.0, UnitSystem::Si).is_err());
        assert!(Species::new(1.0, -1.0, UnitSystem::Si).is_err());
        assert!(Particle::new(Vec3::zeros(), -0.1).is_err());
        assert!(Particle::new(Vec3::new(f64::NAN, 0.0, 0.0), 0.1).is_err());
        let sp = Species::reduced(0.0).unwrap();
        assert!(Ensemble::new(sp, vec![], 1.0).is_err());
        let p = MaxwellianParams {
            density: 1.0,
            velocity: Vec3::zeros(),
            temperature: 0.0,
        };
        assert!(maxwellian_density(&Vec3::zeros(), 1.0, &p, &sp).is_err());
    }

    #[test]
    fn alpha_zero_density_is_plain_exponential() {
        let sp = Species::reduced(0.0).unwrap();
        let p = MaxwellianParams {
            density: 2.0,
            velocity: Vec3::new(0.1, 0.0, 0.0),
            temperature: 1.5,
        };
        let v = Vec3::new(0.3, -0.2, 1.0);
        let i = 0.7;
        let kt = 1.5;
        let e = 0.5 * (v - p.velocity).norm_squared() + i;
        let expect = 2.0 / kt * (1.0 / (2.0 * std::f64::consts::PI * kt)).powf(1.5) * (-e / kt).exp();
        assert_relative_eq!(maxwellian_density(&v, i, &p, &sp).unwrap(), expect, max_relative = 1e-13);
    }

    #[test]
    fn maxwellian_moment_even_order_closed_form() {
        // U = 0: ⟨⟩² = 1 + θ G', G' ~ Gamma(α + 5/2); E[(1 + θ G')^2] = 1 + 2θ s + θ² s (s + 1).
        let sp = Species::reduced(0.3).unwrap();
        let p = MaxwellianParams {
            density: 1.7,
            velocity: Vec3::zeros(),
            temperature: 0.8,
        };
        let s = 0.3 + 2.5;
        let th = 0.8;
        let expect = 1.7 * (1.0 + 2.0 * th * s + th * th * s * (s + 1.0));
        assert_relative_eq!(maxwellian_l1_moment(&p, &sp, 4.0).unwrap(), expect, max_relative = 1e-9);
        assert_relative_eq!(maxwellian_l1_moment(&p, &sp, 0.0).unwrap(), 1.7, max_relative = 1e-9);
        // with drift, k = 2: 1 + |U|²/2 + θ (α + 5/2)
        let q = MaxwellianParams {
            velocity: Vec3::new(0.0, 1.2, 0.0),
            ..p
        };
        assert_relative_eq!(
            maxwellian_l1_moment(&q, &sp, 2.0).unwrap(),
            1.7 * (1.0 + 0.72 + th * s),
            max_relative = 1e-9
        );
    }
}

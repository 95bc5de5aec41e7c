//! Initial-condition families for simulations.

use rand::SeedableRng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::gas::{sample_maxwellian, Ensemble, MaxwellianParams, Particle, Species, Vec3};
use crate::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Polyatomic Maxwellian.
    Maxwellian {
        density: f64,
        #[serde(default)]
        velocity: [f64; 3],
        temperature: f64,
    },
    /// Two counter-streaming Gaussian beams at `±speed` along `x`, equal populations,
    /// internal energies `Gamma(α+1, k_B T_int)`.
    Bimodal {
        density: f64,
        speed: f64,
        beam_temperature: f64,
        internal_temperature: f64,
    },
    /// Gaussian velocities with a separate temperature per axis.
    AnisotropicGaussian {
        density: f64,
        temperatures: [f64; 3],
        internal_temperature: f64,
    },
    /// Isotropic Maxwellian velocities with translational and internal temperatures apart.
    TwoTemperature {
        density: f64,
        translational_temperature: f64,
        internal_temperature: f64,
    },
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive, got {x}")))
    }
}

impl InitialCondition {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::Maxwellian {
                density,
                velocity,
                temperature,
            } => {
                positive("density", *density)?;
                positive("temperature", *temperature)?;
                if velocity.iter().any(|c| !c.is_finite()) {
                    return Err(domain("velocity must be finite"));
                }
            }
            InitialCondition::Bimodal {
                density,
                speed,
                beam_temperature,
                internal_temperature,
            } => {
                positive("density", *density)?;
                positive("beam_temperature", *beam_temperature)?;
                positive("internal_temperature", *internal_temperature)?;
                if !speed.is_finite() {
                    return Err(domain("speed must be finite"));
                }
            }
            InitialCondition::AnisotropicGaussian {
                density,
                temperatures,
                internal_temperature,
            } => {
                positive("density", *density)?;
                for t in temperatures {
                    positive("temperatures", *t)?;
                }
                positive("internal_temperature", *internal_temperature)?;
            }
            InitialCondition::TwoTemperature {
                density,
                translational_temperature,
                internal_temperature,
            } => {
                positive("density", *density)?;
                positive("translational_temperature", *translational_temperature)?;
                positive("internal_temperature", *internal_temperature)?;
            }
        }
        Ok(())
    }

    /// Samples `n` particles; `density` is the mass density `ρ`.
    pub fn sample(&self, sp: &Species, n: usize, seed: u64) -> Result<Ensemble> {
        self.validate()?;
        if n == 0 {
            return Err(domain("need at least one particle"));
        }
        let kb = sp.boltzmann();
        let m = sp.mass;
        let mut rng = SimRng::seed_from_u64(seed);
        let gaussian = |rng: &mut SimRng, sd: [f64; 3]| -> Vec3 {
            Vec3::from_fn(|i, _| {
                let z: f64 = StandardNormal.sample(rng);
                sd[i] * z
            })
        };
        let internal = |t: f64| Gamma::new(sp.alpha + 1.0, kb * t).map_err(|e| domain(e.to_string()));
        let (density, particles) = match *self {
            InitialCondition::Maxwellian {
                density,
                velocity,
                temperature,
            } => {
                let p = MaxwellianParams {
                    density,
                    velocity: Vec3::from(velocity),
                    temperature,
                };
                return sample_maxwellian(&p, sp, n, seed);
            }
            InitialCondition::Bimodal {
                density,
                speed,
                beam_temperature,
                internal_temperature,
            } => {
                let sd = (kb * beam_temperature / m).sqrt();
                let g = internal(internal_temperature)?;
                let parts = (0..n)
                    .map(|i| {
                        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                        Particle {
                            v: Vec3::new(sign * speed, 0.0, 0.0) + gaussian(&mut rng, [sd; 3]),
                            internal: g.sample(&mut rng),
                        }
                    })
                    .collect();
                (density, parts)
            }
            InitialCondition::AnisotropicGaussian {
                density,
                temperatures,
                internal_temperature,
            } => {
                let sd = temperatures.map(|t| (kb * t / m).sqrt());
                let g = internal(internal_temperature)?;
                let parts = (0..n)
                    .map(|_| Particle {
                        v: gaussian(&mut rng, sd),
                        internal: g.sample(&mut rng),
                    })
                    .collect();
                (density, parts)
            }
            InitialCondition::TwoTemperature {
                density,
                translational_temperature,
                internal_temperature,
            } => {
                let sd = (kb * translational_temperature / m).sqrt();
                let g = internal(internal_temperature)?;
                let parts = (0..n)
                    .map(|_| Particle {
                        v: gaussian(&mut rng, [sd; 3]),
                        internal: g.sample(&mut rng),
                    })
                    .collect();
                (density, parts)
            }
        };
        Ensemble::new(*sp, particles, density / m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bimodal_energy_split() {
        let sp = Species::reduced(0.0).unwrap();
        let ic = InitialCondition::Bimodal {
            density: 1.0,
            speed: 1.5,
            beam_temperature: 0.25,
            internal_temperature: 1.0,
        };
        let ens = ic.sample(&sp, 20_000, 4).unwrap();
        // kinetic 1.125 + 0.375, internal 1: T = 2.5 / 2.5
        assert!((ens.temperature() - 1.0).abs() < 0.03);
        assert!(ens.mean_velocity().norm() < 0.02);
    }

    #[test]
    fn rejects_bad_parameters() {
        let sp = Species::reduced(0.0).unwrap();
        let ic = InitialCondition::TwoTemperature {
            density: 1.0,
            translational_temperature: -1.0,
            internal_temperature: 1.0,
        };
        assert!(ic.sample(&sp, 10, 0).is_err());
    }
}

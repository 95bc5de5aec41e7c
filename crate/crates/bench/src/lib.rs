//! Shared fixtures for the benchmarks.

use polykin::{sample_maxwellian, Ensemble, KernelParams, KernelSettings, MaxwellianParams, PairState, SimRng, Species, Vec3};
use rand::{Rng, SeedableRng};

pub fn kernel(alpha: f64, omega: f64) -> KernelParams {
    KernelParams::new(
        alpha,
        KernelSettings {
            omega,
            ..KernelSettings::default()
        },
    )
    .expect("valid kernel")
}

/// Pairs with velocity components in `[-2, 2)` and internal energies in `[0, 2)`.
pub fn pairs(n: usize, seed: u64) -> Vec<PairState> {
    let mut rng = SimRng::seed_from_u64(seed);
    let v = |rng: &mut SimRng| Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    (0..n)
        .map(|_| {
            let a = v(&mut rng);
            let b = v(&mut rng);
            PairState::new(a, rng.random_range(0.0..2.0), b, rng.random_range(0.0..2.0), 1.0).expect("valid pair")
        })
        .collect()
}

pub fn maxwellian(alpha: f64, n: usize, seed: u64) -> Ensemble {
    let sp = Species::reduced(alpha).expect("valid species");
    let p = MaxwellianParams {
        density: 1.0,
        velocity: Vec3::zeros(),
        temperature: 1.0,
    };
    sample_maxwellian(&p, &sp, n, seed).expect("valid Maxwellian")
}

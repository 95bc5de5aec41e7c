use approx::assert_relative_eq;
use polykin::diagnostics::*;
use polykin::kernel::kappa_bounds;
use polykin::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp, StandardNormal};

fn default_kernel() -> KernelParams {
    KernelParams::new(0.0, KernelSettings::default()).unwrap()
}

fn maxwell(alpha: f64) -> (Species, MaxwellianParams) {
    let sp = Species::reduced(alpha).unwrap();
    let p = MaxwellianParams {
        density: 1.0,
        velocity: Vec3::new(0.4, -0.1, 0.0),
        temperature: 1.0,
    };
    (sp, p)
}

#[test]
fn histogram_entropy_is_close_to_analytic_value() {
    for &alpha in &[0.0, 0.5] {
        let (sp, p) = maxwell(alpha);
        let exact = maxwellian_entropy(&p, &sp).unwrap();
        let ens = sample_maxwellian(&p, &sp, 100_000, 3).unwrap();
        let h = empirical_entropy(&ens).unwrap();
        assert!(((h - exact) / exact).abs() < 0.05, "alpha {alpha}: {h} vs {exact}");
    }
}

#[test]
fn entropy_estimate_improves_with_sample_size() {
    let (sp, p) = maxwell(0.0);
    let exact = maxwellian_entropy(&p, &sp).unwrap();
    // average over seeds so the comparison reflects bias rather than noise
    let err = |n: usize| {
        (0..4)
            .map(|s| empirical_entropy(&sample_maxwellian(&p, &sp, n, 40 + s).unwrap()).unwrap())
            .sum::<f64>()
            / 4.0
            - exact
    };
    let coarse = err(25_000).abs();
    let fine = err(50_000).abs();
    assert!(fine < coarse, "N: {coarse}, 2N: {fine}");
}

#[test]
fn maxwellian_entropy_matches_direct_formula_in_si_units() {
    let m = 5.3e-26;
    let sp = Species::new(m, 0.0402, UnitSystem::Si).unwrap();
    let p = MaxwellianParams {
        density: 1.2,
        velocity: Vec3::zeros(),
        temperature: 300.0,
    };
    let n = 1.2 / m;
    let kt = BOLTZMANN * 300.0;
    let a = n / (kt.powf(1.0402) * statrs::function::gamma::gamma(1.0402))
        * (m / (2.0 * std::f64::consts::PI * kt)).powf(1.5);
    assert_relative_eq!(maxwellian_entropy(&p, &sp).unwrap(), n * (a.ln() - 2.5402), max_relative = 1e-12);
}

#[test]
fn equilibrium_tests_accept_maxwellian_and_reject_beams() {
    let (sp, p) = maxwell(0.0);
    let ens = sample_maxwellian(&p, &sp, 50_000, 8).unwrap();
    assert!(equilibrium_tests(&ens, 40).unwrap().min_p_value() > 0.01);
    let beams = InitialCondition::Bimodal {
        density: 1.0,
        speed: 1.5,
        beam_temperature: 0.25,
        internal_temperature: 1.0,
    }
    .sample(&sp, 50_000, 9)
    .unwrap();
    let t = equilibrium_tests(&beams, 40).unwrap();
    assert!(t.vx.p_value < 1e-10);
}

fn random_pair(rng: &mut SimRng) -> PairState {
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    let mut g = || {
        let z: [f64; 3] = [StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng)];
        Vec3::from(z) * scale
    };
    let (v, vs) = (g(), g());
    let e = Exp::new(1.0).unwrap();
    let m = 10f64.powf(rng.random_range(-1.0..1.0));
    PairState::new(v, m * scale * scale * e.sample(rng), vs, m * scale * scale * e.sample(rng), m).unwrap()
}

#[test]
fn energy_identity_holds_on_random_states() {
    let mut rng = SimRng::seed_from_u64(12);
    let mut worst = 0.0f64;
    let mut min_slack = f64::INFINITY;
    for _ in 0..200_000 {
        let p = random_pair(&mut rng);
        let sigma = polykin::collision::sample_sphere(&mut rng);
        let res = energy_identity_check(&p, &sigma, rng.random(), rng.random()).unwrap();
        worst = worst.max(res.max_representation_error());
        min_slack = min_slack.min(res.min_slack());
        assert!(res.s >= 0.0 && res.s <= 1.0);
    }
    assert!(worst <= 1e-10, "representation error {worst}");
    assert!(min_slack >= -1e-10, "slack {min_slack}");
}

proptest! {
    #[test]
    fn lambda_never_exceeds_half_s(
        v in prop::array::uniform3(-100.0f64..100.0),
        vs in prop::array::uniform3(-100.0f64..100.0),
        i in 0.0f64..1e4, is in 0.0f64..1e4,
        r in 0.0f64..=1.0, big_r in 0.0f64..=1.0,
        th in 0.0f64..std::f64::consts::PI, ph in 0.0f64..6.3,
    ) {
        let p = PairState::new(Vec3::from(v), i, Vec3::from(vs), is, 1.0).unwrap();
        let sigma = Vec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos());
        let res = energy_identity_check(&p, &sigma, r, big_r).unwrap();
        prop_assert!(res.lambda_slack >= -1e-12);
        prop_assert!(res.max_representation_error() <= 1e-10);
    }
}

#[test]
fn averaging_operator_low_orders() {
    let kp = default_kernel();
    let kub = kappa_bounds(&kp).upper;
    let mut rng = SimRng::seed_from_u64(3);
    for _ in 0..20 {
        let p = random_pair(&mut rng);
        let s0 = averaging_operator_sk(&p, 0.0, &kp, 1000, &mut rng).unwrap();
        assert_relative_eq!(s0.value, 2.0 * kub, max_relative = 1e-8);
        assert!(s0.stderr < 1e-12);
        // x + (1 - x) = 1 for every draw
        let s2 = averaging_operator_sk(&p, 2.0, &kp, 1000, &mut rng).unwrap();
        assert_relative_eq!(s2.value, kub * p.bracket_energy(), max_relative = 1e-10);
    }
}

#[test]
fn averaging_operator_decreases_in_k_with_common_draws() {
    let kp = default_kernel();
    let mut rng = SimRng::seed_from_u64(4);
    for _ in 0..20 {
        let p = random_pair(&mut rng);
        let e = p.bracket_energy();
        let seed: u64 = rng.random();
        let norm = |k: f64| {
            let mut r = SimRng::seed_from_u64(seed);
            averaging_operator_sk(&p, k, &kp, 2000, &mut r).unwrap().value / e.powf(0.5 * k)
        };
        let vals: Vec<f64> = [0.0, 2.0, 3.0, 4.0, 8.0, 16.0].iter().map(|&k| norm(k)).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{vals:?}");
    }
}

#[test]
fn povzner_constants_small_run() {
    let kp = default_kernel();
    let cfg = CkConfig {
        n_states: 200,
        n_mc: 4000,
        bootstrap: 50,
        ..Default::default()
    };
    let ks: Vec<f64> = (0..=20).map(|j| 2.0 * j as f64).collect();
    let rep = empirical_ck(&ks, &kp, &cfg).unwrap();
    assert!(rep.non_increasing);
    assert_relative_eq!(rep.estimates[0].c_k, 2.0 * rep.kappa_ub, max_relative = 1e-10);
    assert_relative_eq!(rep.estimates[1].c_k, rep.kappa_ub, max_relative = 1e-10);
    let k_star = rep.k_star.expect("k* exists for the default kernel");
    let at = rep.estimates.iter().find(|e| e.k == k_star).unwrap();
    assert!(at.c_k < rep.kappa_lb);
    assert!(at.a_tilde > 0.0);
    // the sample is too small to be quiet about it
    assert!(!rep.warnings.is_empty());
}

#[test]
fn povzner_constants_are_reproducible() {
    let kp = default_kernel();
    let cfg = CkConfig {
        n_states: 50,
        n_mc: 500,
        bootstrap: 20,
        ..Default::default()
    };
    let a = empirical_ck(&[4.0, 6.0], &kp, &cfg).unwrap();
    let b = empirical_ck(&[4.0, 6.0], &kp, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn povzner_needs_positive_lower_kappa() {
    let kp = KernelParams::new(
        0.0,
        KernelSettings {
            eta: 0.0,
            ..KernelSettings::default()
        },
    )
    .unwrap();
    let cfg = CkConfig {
        n_states: 20,
        n_mc: 200,
        bootstrap: 10,
        ..Default::default()
    };
    let rep = empirical_ck(&[0.0, 10.0, 40.0], &kp, &cfg).unwrap();
    assert_eq!(rep.kappa_lb, 0.0);
    assert!(rep.k_star.is_none());
    assert!(rep.warnings.iter().any(|w| w.contains("eta = 0")));
}

use polykin::collision::*;
use polykin::kernel::*;
use polykin::quad::{integrate_rectangle, TanhSinh};
use polykin::stats::{chi_square, ks_one_sample, ks_two_sample};
use polykin::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use statrs::distribution::{Binomial, DiscreteCDF};

fn kp(alpha: f64, zeta: f64, eta: f64, omega: f64, angular: AngularModel) -> KernelParams {
    KernelParams::new(
        alpha,
        KernelSettings {
            zeta,
            k: 1.0,
            eta,
            eta_f: 0.5,
            omega,
            angular,
        },
    )
    .unwrap()
}

fn totals(p: &PairState) -> (Vec3, f64, f64) {
    let m = p.mass;
    let momentum = (p.v + p.v_star) * m;
    let energy = 0.5 * m * (p.v.norm_squared() + p.v_star.norm_squared()) + p.internal + p.internal_star;
    let bracket = 2.0 + 0.5 * (p.v.norm_squared() + p.v_star.norm_squared()) + (p.internal + p.internal_star) / m;
    (momentum, energy, bracket)
}

fn outcome_totals(o: &CollisionOutcome, m: f64) -> (Vec3, f64, f64) {
    let p = PairState::new(o.v, o.internal, o.v_star, o.internal_star, m).unwrap();
    totals(&p)
}

fn vec3() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1e3f64..1e3).prop_map(Vec3::from)
}

fn unit() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter("non-degenerate", |a| Vec3::from(*a).norm() > 1e-3)
        .prop_map(|a| Vec3::from(a).normalize())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn exchange_conserves_momentum_energy_and_bracket_energy(
        v in vec3(), vs in vec3(),
        i in 0.0f64..1e6, is in 0.0f64..1e6,
        m in 0.01f64..100.0,
        sigma in unit(),
        r in 0.0f64..=1.0, big_r in 0.0f64..=1.0,
    ) {
        let p = PairState::new(v, i, vs, is, m).unwrap();
        let o = apply_exchange_collision(&p, &sigma, r, big_r).unwrap();
        let (p0, e0, b0) = totals(&p);
        let (p1, e1, b1) = outcome_totals(&o, m);
        let scale = m * (v.norm() + vs.norm()) + 1e-300;
        prop_assert!((p1 - p0).norm() <= 1e-12 * scale);
        prop_assert!((e1 - e0).abs() <= 1e-12 * e0.max(1e-300));
        prop_assert!((b1 - b0).abs() <= 1e-12 * b0);
        prop_assert!(o.internal >= 0.0 && o.internal_star >= 0.0);
        let split = (1.0 - big_r) * p.energy();
        prop_assert!((o.internal + o.internal_star - split).abs() <= 2.0 * f64::EPSILON * split);
    }

    #[test]
    fn frozen_preserves_internal_energies_and_relative_speed(
        v in vec3(), vs in vec3(),
        i in 0.0f64..1e6, is in 0.0f64..1e6,
        sigma in unit(),
    ) {
        let p = PairState::new(v, i, vs, is, 1.0).unwrap();
        let o = apply_frozen_collision(&p, &sigma).unwrap();
        prop_assert_eq!(o.internal.to_bits(), i.to_bits());
        prop_assert_eq!(o.internal_star.to_bits(), is.to_bits());
        let u = (v - vs).norm();
        prop_assert!(((o.v - o.v_star).norm() - u).abs() <= 1e-12 * u.max(1e-300));
        let (p0, e0, _) = totals(&p);
        let (p1, e1, _) = outcome_totals(&o, 1.0);
        prop_assert!((p1 - p0).norm() <= 1e-12 * (v.norm() + vs.norm() + 1e-300));
        prop_assert!((e1 - e0).abs() <= 1e-12 * e0.max(1e-300));
    }

    #[test]
    fn sampled_parameters_lie_in_range(
        v in vec3(), vs in vec3(),
        i in 0.0f64..1e3, is in 0.0f64..1e3,
        alpha in -0.9f64..3.0, zeta in 0.05f64..=2.0,
        seed in any::<u64>(),
    ) {
        let k = kp(alpha, zeta, 0.5, 1.0, AngularModel::CosinePower { exponent: 1.5 });
        let p = PairState::new(v, i, vs, is, 1.0).unwrap();
        let mut rng = SimRng::seed_from_u64(seed);
        if let Ok((sigma, r, big_r)) = sample_exchange_parameters(&p, &k, &mut rng) {
            prop_assert!((0.0..=1.0).contains(&r) && (0.0..=1.0).contains(&big_r));
            prop_assert!((sigma.norm() - 1.0).abs() < 1e-12);
            prop_assert!(sigma.dot(&p.u_hat()) >= 0.0);
        }
    }
}

#[test]
fn exchange_collision_is_involutive_for_matching_parameters() {
    // re-colliding the outcome with (σ̂_in, r_in, R_in) returns the original pair
    let p = PairState::new(Vec3::new(0.3, -1.2, 0.8), 0.9, Vec3::new(-0.5, 0.4, 1.1), 0.25, 1.5).unwrap();
    let sigma = Vec3::new(1.0, 2.0, -2.0) / 3.0;
    let o = apply_exchange_collision(&p, &sigma, 0.37, 0.61).unwrap();
    let q = PairState::new(o.v, o.internal, o.v_star, o.internal_star, 1.5).unwrap();
    let e = p.energy();
    let r_in = p.internal / (p.internal + p.internal_star);
    let big_r_in = 1.0 - (p.internal + p.internal_star) / e;
    let back = apply_exchange_collision(&q, &p.u_hat(), r_in, big_r_in).unwrap();
    assert!((back.v - p.v).norm() < 1e-12);
    assert!((back.v_star - p.v_star).norm() < 1e-12);
    assert!((back.internal - p.internal).abs() < 1e-12);
    assert!((back.internal_star - p.internal_star).abs() < 1e-12);
}

/// Chi-square of binned `(r, R)` samples against cell probabilities of `B̃ d_α`.
fn cell_test(p: &PairState, k: &KernelParams, n: usize, seed: u64, nr: usize, nbig: usize) -> f64 {
    let sampler = CollisionSampler::new(k).unwrap();
    let mut rng = SimRng::seed_from_u64(seed);
    let mut observed = vec![0.0; nr * nbig];
    for _ in 0..n {
        let (_, r, big_r) = sampler.sample_exchange(p, &mut rng).unwrap();
        let i = ((r * nr as f64) as usize).min(nr - 1);
        let j = ((big_r * nbig as f64) as usize).min(nbig - 1);
        observed[i * nbig + j] += 1.0;
    }
    let alpha = k.alpha();
    let density = |r: f64, s: f64| {
        let big_r = 1.0 - s;
        evaluate_physical_kernel(p, r, big_r, k).unwrap() * d_alpha_weight(r, big_r, alpha).unwrap()
    };
    let q_outer = TanhSinh::with_tol(1e-9);
    let q_inner = TanhSinh::with_tol(1e-10);
    let mut probs = vec![0.0; nr * nbig];
    for i in 0..nr {
        for j in 0..nbig {
            let (r0, r1) = (i as f64 / nr as f64, (i + 1) as f64 / nr as f64);
            let (s0, s1) = (1.0 - (j + 1) as f64 / nbig as f64, 1.0 - j as f64 / nbig as f64);
            probs[i * nbig + j] = integrate_rectangle(&q_outer, &q_inner, density, (r0, r1), (s0, s1), &[], |_| vec![]).value;
        }
    }
    let total: f64 = probs.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|q| q / total * n as f64).collect();
    assert!(expected.iter().all(|e| *e > 5.0), "cells too sparse");
    chi_square(&observed, &expected, 0).unwrap().p_value
}

fn regimes() -> Vec<(&'static str, KernelParams, PairState)> {
    let st = |v: [f64; 3], i: f64, vs: [f64; 3], is: f64| PairState::new(Vec3::from(v), i, Vec3::from(vs), is, 1.0).unwrap();
    vec![
        ("translational", kp(0.0, 1.0, 0.5, 1.0, AngularModel::Uniform), st([3.0, 0.0, 0.0], 0.1, [-3.0, 0.0, 0.0], 0.2)),
        ("internal", kp(-0.0304, 0.6076, 1.0, 1.0, AngularModel::Uniform), st([0.1, 0.0, 0.0], 4.0, [0.0, 0.0, 0.0], 0.5)),
        ("mixed", kp(0.5, 2.0, 0.5, 1.0, AngularModel::Uniform), st([1.0, 1.0, 0.0], 1.0, [-1.0, 0.0, 0.5], 2.0)),
        ("strong-singular", kp(-0.4, 0.3, 2.0, 1.0, AngularModel::Uniform), st([0.5, 0.0, 0.0], 1.5, [0.0, 0.5, 0.0], 0.2)),
    ]
}

#[test]
fn sampler_matches_target_density_on_cells() {
    for (i, (name, k, p)) in regimes().into_iter().enumerate() {
        let joint = cell_test(&p, &k, 100_000, 100 + i as u64, 8, 8);
        let r_marg = cell_test(&p, &k, 100_000, 200 + i as u64, 25, 1);
        let big_r_marg = cell_test(&p, &k, 100_000, 300 + i as u64, 1, 25);
        assert!(joint > 0.01, "{name}: joint p = {joint}");
        assert!(r_marg > 0.01, "{name}: r marginal p = {r_marg}");
        assert!(big_r_marg > 0.01, "{name}: R marginal p = {big_r_marg}");
    }
}

#[test]
fn r_is_symmetric_for_equal_internal_energies() {
    let k = kp(0.2, 1.0, 1.0, 1.0, AngularModel::Uniform);
    let p = PairState::new(Vec3::new(1.0, 0.0, 0.0), 1.3, Vec3::zeros(), 1.3, 1.0).unwrap();
    let sampler = CollisionSampler::new(&k).unwrap();
    let mut rng = SimRng::seed_from_u64(5);
    let mut a = Vec::with_capacity(50_000);
    let mut b = Vec::with_capacity(50_000);
    for n in 0..100_000 {
        let (_, r, _) = sampler.sample_exchange(&p, &mut rng).unwrap();
        if n % 2 == 0 {
            a.push(r)
        } else {
            b.push(1.0 - r)
        }
    }
    assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
}

#[test]
fn hemisphere_cosine_follows_angular_model() {
    let u = Vec3::new(1.0, -2.0, 0.5).normalize();
    let mut rng = SimRng::seed_from_u64(6);
    for &(angular, gamma) in &[(AngularModel::Uniform, 0.0), (AngularModel::CosinePower { exponent: 2.0 }, 2.0)] {
        let xs: Vec<f64> = (0..100_000).map(|_| sample_hemisphere(&u, &angular, &mut rng).dot(&u)).collect();
        assert!(xs.iter().all(|x| *x >= 0.0));
        let t = ks_one_sample(&xs, |x: f64| x.clamp(0.0, 1.0).powf(gamma + 1.0)).unwrap();
        assert!(t.p_value > 0.01, "{angular:?}: p = {}", t.p_value);
    }
}

#[test]
fn frozen_fraction_matches_rate_ratio() {
    let k = kp(0.0, 1.0, 0.5, 0.5, AngularModel::Uniform);
    let p = PairState::new(Vec3::new(1.0, 0.2, 0.0), 0.8, Vec3::new(-0.4, 0.0, 0.3), 0.4, 1.0).unwrap();
    let (ex, fr) = pair_rates(&p, &k);
    let expected = fr / (ex + fr);
    let sampler = CollisionSampler::new(&k).unwrap();
    let mut rng = SimRng::seed_from_u64(7);
    let n = 100_000u64;
    let frozen = (0..n).filter(|_| sampler.collide(&p, &mut rng).unwrap().frozen).count() as u64;
    let b = Binomial::new(expected, n).unwrap();
    let lo = b.cdf(frozen);
    let hi = 1.0 - if frozen == 0 { 0.0 } else { b.cdf(frozen - 1) };
    assert!(2.0 * lo.min(hi) > 0.01, "frozen {frozen} of {n}, expected fraction {expected}");
}

#[test]
fn omega_extremes_select_one_collision_type() {
    let p = PairState::new(Vec3::new(1.0, 0.0, 0.0), 0.5, Vec3::zeros(), 0.5, 1.0).unwrap();
    let mut rng = SimRng::seed_from_u64(8);
    let all_exchange = CollisionSampler::new(&kp(0.0, 1.0, 0.5, 1.0, AngularModel::Uniform)).unwrap();
    let all_frozen = CollisionSampler::new(&kp(0.0, 1.0, 0.5, 0.0, AngularModel::Uniform)).unwrap();
    for _ in 0..1000 {
        assert!(!all_exchange.collide(&p, &mut rng).unwrap().frozen);
        assert!(all_frozen.collide(&p, &mut rng).unwrap().frozen);
    }
}

#[test]
fn zero_rate_states_are_reported() {
    let k = kp(0.0, 1.0, 0.5, 1.0, AngularModel::Uniform);
    let p = PairState::new(Vec3::zeros(), 0.0, Vec3::zeros(), 0.0, 1.0).unwrap();
    let mut rng = SimRng::seed_from_u64(1);
    assert!(matches!(sample_exchange_parameters(&p, &k, &mut rng), Err(Error::ZeroRate)));
    assert!(collide(&p, &k, &mut rng).unwrap().is_none());
    let _: f64 = rng.random();
}

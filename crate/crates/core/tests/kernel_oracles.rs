use approx::assert_relative_eq;
use polykin::kernel::*;
use polykin::quad::{integrate_rectangle, TanhSinh};
use polykin::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Exp, StandardNormal};
use std::f64::consts::PI;

fn settings(zeta: f64, eta: f64, angular: AngularModel) -> KernelSettings {
    KernelSettings {
        zeta,
        k: 1.3,
        eta,
        eta_f: 0.4,
        omega: 1.0,
        angular,
    }
}

fn random_state(rng: &mut SimRng, mass: f64) -> PairState {
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let g = |rng: &mut SimRng| {
        let z: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        Vec3::from(z) * scale
    };
    let e = Exp::new(1.0).unwrap();
    let i = scale * scale * e.sample(rng);
    let is = scale * scale * e.sample(rng);
    PairState::new(g(rng), i, g(rng), is, mass).unwrap()
}

/// `∫∫ f(r, R) d_α dr dR` with the inner variable `s = 1 - R`.
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

/// Hemisphere integral of `b(σ·û)` in polar coordinates about `û`.
fn hemisphere_norm(angular: &AngularModel) -> f64 {
    2.0 * PI * TanhSinh::default().integrate(|x| angular.value(x), 0.0, 1.0).value
}

#[test]
fn angular_norms_match_hemisphere_integrals() {
    for a in [
        AngularModel::Uniform,
        AngularModel::CosinePower { exponent: 0.5 },
        AngularModel::CosinePower { exponent: 3.0 },
    ] {
        assert_relative_eq!(a.l1_norm(), hemisphere_norm(&a), max_relative = 1e-12);
    }
}

#[test]
fn d_alpha_mass_matches_quadrature() {
    for &alpha in &[-0.4, -0.0304, 0.0, 0.0901, 1.0] {
        assert_relative_eq!(d_alpha_mass(alpha), weighted_integral(alpha, |_, _| 1.0), max_relative = 1e-9);
    }
}

#[test]
fn exchange_rate_closed_form_matches_quadrature() {
    let mut rng = SimRng::seed_from_u64(21);
    for &alpha in &[-0.3, 0.0, 0.5, 1.0] {
        for &zeta in &[0.5, 1.0, 2.0] {
            for angular in [AngularModel::Uniform, AngularModel::CosinePower { exponent: 2.0 }] {
                let kp = KernelParams::new(alpha, settings(zeta, 0.7, angular)).unwrap();
                let p = random_state(&mut rng, 1.4);
                let exact = pair_rate_physical(&p, &kp);
                let quad = hemisphere_norm(&angular)
                    * weighted_integral(alpha, |r, rr| evaluate_physical_kernel(&p, r, rr, &kp).unwrap());
                assert_relative_eq!(exact, quad, max_relative = 1e-8);
            }
        }
    }
}

#[test]
fn kappa_upper_matches_closed_form() {
    for &alpha in &[-0.0304, 0.0, 0.4] {
        for &zeta in &[0.2584, 1.0, 2.0] {
            let kp = KernelParams::new(alpha, settings(zeta, 0.5, AngularModel::Uniform)).unwrap();
            let kb = kappa_bounds(&kp);
            assert_relative_eq!(kb.upper, kappa_upper_closed_form(&kp), max_relative = 1e-8);
            assert!(kb.lower > 0.0 && kb.lower < kb.upper);
            assert!(kb.warning.is_none());
        }
    }
    let kp = KernelParams::new(0.0, settings(1.0, 0.0, AngularModel::Uniform)).unwrap();
    let kb = kappa_bounds(&kp);
    assert_eq!(kb.lower, 0.0);
    assert!(kb.warning.is_some());
}

#[test]
fn sandwich_holds_on_random_states() {
    let mut rng = SimRng::seed_from_u64(8);
    for &(alpha, zeta, eta) in &[(0.0, 1.0, 0.5), (-0.0304, 0.6076, 1.0), (0.5, 2.0, 0.1), (0.09, 0.424, 3.0)] {
        let kp = KernelParams::new(alpha, settings(zeta, eta, AngularModel::Uniform)).unwrap();
        let sb = sandwich_bounds(&kp);
        for _ in 0..100_000 {
            let p = random_state(&mut rng, 0.8);
            let (r, rr): (f64, f64) = (rng.random(), rng.random());
            let b = evaluate_physical_kernel(&p, r, rr, &kp).unwrap();
            let e = (p.energy() / p.mass).powf(0.5 * zeta);
            let tol = 1e-12 * b.max(1e-300);
            assert!(sb.lower(r, rr) * e <= b + tol, "lower bound violated");
            assert!(b <= sb.upper(r, rr) * e + tol, "upper bound violated");
        }
    }
}

#[test]
fn majorant_dominates_total_rate() {
    let mut rng = SimRng::seed_from_u64(9);
    for &omega in &[0.0, 0.3, 1.0] {
        let mut s = settings(0.8, 0.6, AngularModel::CosinePower { exponent: 1.0 });
        s.omega = omega;
        let kp = KernelParams::new(0.2, s).unwrap();
        let (c_ex, c_fr) = kp.majorant_coefficients();
        for _ in 0..50_000 {
            let p = random_state(&mut rng, 2.0);
            let (ex, fr) = pair_rates(&p, &kp);
            let bound = (c_ex + c_fr) * (p.energy() / p.mass).powf(0.4);
            assert!(ex + fr <= bound * (1.0 + 1e-12));
        }
    }
}

#[test]
fn bracket_sandwich_upper_bound_holds() {
    let mut rng = SimRng::seed_from_u64(10);
    let mut lower_violations = 0usize;
    for &zeta in &[0.1, 0.5329, 1.0, 2.0] {
        for _ in 0..100_000 {
            let p = random_state(&mut rng, 1.0);
            let (lo, hi) = bracket_sandwich_slack(&p, zeta);
            assert!(hi >= -1e-12 * (1.0 + hi.abs()));
            lower_violations += usize::from(lo < 0.0);
        }
    }
    assert_eq!(lower_violations, 0, "lower bracket bound violated");
}

#[test]
fn rho_q_grid_matches_quadrature() {
    assert_relative_eq!(rho_q(0.0, 1.0, 2.0).unwrap(), PI / 2.0, max_relative = 1e-14);
    let mut rng = SimRng::seed_from_u64(4);
    let mut checked = 0;
    while checked < 50 {
        let alpha = rng.random_range(-0.45..1.5);
        let zeta = rng.random_range(0.05..2.0);
        let q = 1.0 + 10f64.powf(rng.random_range(-0.3..2.0));
        let (er, e1) = rho_q_exponents(alpha, zeta, q);
        if er < -0.85 || e1 < -0.85 {
            continue;
        }
        let exact = rho_q(alpha, zeta, q).unwrap();
        let quad = rho_q_by_quadrature(alpha, zeta, q).unwrap();
        assert_relative_eq!(exact, quad, max_relative = 1e-8);
        checked += 1;
    }
}

#[test]
fn rho_q_diverges_past_the_exponent_boundary() {
    // α = 0, ζ = 1: r-exponent -1.5/q reaches -1 at q = 1.5
    assert!(rho_q(0.0, 1.0, 1.49).unwrap().is_infinite());
    assert!(rho_q(0.0, 1.0, 1.51).unwrap().is_finite());
    assert_relative_eq!(rho_q(0.0, 1.0, f64::INFINITY).unwrap(), d_alpha_mass(0.0), max_relative = 1e-14);
}

#[test]
fn pair_rates_are_galilean_invariant() {
    let kp = KernelParams::new(0.1, settings(1.2, 0.5, AngularModel::Uniform)).unwrap();
    let mut s = kp.settings().clone();
    s.omega = 0.5;
    let kp = KernelParams::new(0.1, s).unwrap();
    let p = PairState::new(Vec3::new(1.0, 2.0, 0.0), 0.3, Vec3::new(-1.0, 0.5, 2.0), 1.1, 1.0).unwrap();
    let shift = Vec3::new(100.0, -40.0, 7.0);
    let q = PairState::new(p.v + shift, 0.3, p.v_star + shift, 1.1, 1.0).unwrap();
    let (a, b) = pair_rates(&p, &kp);
    let (c, d) = pair_rates(&q, &kp);
    assert_relative_eq!(a, c, max_relative = 1e-12);
    assert_relative_eq!(b, d, max_relative = 1e-12);
}

proptest! {
    #[test]
    fn kernel_symmetric_under_particle_swap(
        v in prop::array::uniform3(-5.0f64..5.0),
        vs in prop::array::uniform3(-5.0f64..5.0),
        i in 0.0f64..10.0,
        is in 0.0f64..10.0,
        r in 0.0f64..=1.0,
        rr in 0.0f64..=1.0,
        alpha in -0.5f64..2.0,
        zeta in 0.05f64..=2.0,
    ) {
        let kp = KernelParams::new(alpha, settings(zeta, 0.5, AngularModel::Uniform)).unwrap();
        let p = PairState::new(Vec3::from(v), i, Vec3::from(vs), is, 1.0).unwrap();
        let q = PairState::new(Vec3::from(vs), is, Vec3::from(v), i, 1.0).unwrap();
        let a = evaluate_physical_kernel(&p, r, rr, &kp).unwrap();
        let b = evaluate_physical_kernel(&q, 1.0 - r, rr, &kp).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        let wa = d_alpha_weight(r, rr, alpha).unwrap();
        let wb = d_alpha_weight(1.0 - r, rr, alpha).unwrap();
        prop_assert!((wa - wb).abs() <= 1e-12 * wa.abs().max(1e-300) || (wa.is_infinite() && wb.is_infinite()));
        prop_assert!((evaluate_frozen_kernel(&p, &kp) - evaluate_frozen_kernel(&q, &kp)).abs()
            <= 1e-12 * evaluate_frozen_kernel(&p, &kp).max(1e-300));
    }

    #[test]
    fn kernel_is_non_negative_and_finite(
        v in prop::array::uniform3(-1e3f64..1e3),
        i in 0.0f64..1e6,
        r in 0.0f64..=1.0,
        rr in 0.0f64..=1.0,
    ) {
        let kp = KernelParams::new(0.0, settings(1.0, 0.5, AngularModel::Uniform)).unwrap();
        let p = PairState::new(Vec3::from(v), i, Vec3::zeros(), 0.0, 1.0).unwrap();
        let b = evaluate_physical_kernel(&p, r, rr, &kp).unwrap();
        prop_assert!(b >= 0.0 && b.is_finite());
    }
}

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use transport_core::fields::{theta, CollisionFrequency};
use transport_core::geometry::{PhasePoint, SpatialDomain, Vec2};
use transport_core::grid::{PhaseGrid, VelocityGrid};
use transport_core::resolvent::Resolvent;
use transport_core::spectra::f_k_eval;
use transport_core::streaming::{u_eval, BounceBack, StreamingMatrix};
use transport_core::C64;

fn domain(i: usize) -> SpatialDomain {
    common::domains_2d().swap_remove(i % 4)
}

fn sample(i: usize, seed: u64) -> (SpatialDomain, PhasePoint) {
    let d = domain(i);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = common::interior_point(&d, &mut rng, 0.0);
    let v = common::velocity(&mut rng, 0.5, 2.0);
    (d, PhasePoint::new(x, v))
}

fn general_sigma() -> CollisionFrequency {
    CollisionFrequency::general(
        |x: Vec2, v: Vec2| 1.0 + 0.5 * x.norm2() + 0.2 * (x.y * v.x).cos(),
        3.0,
    )
    .unwrap()
}

fn phi(x: Vec2, v: Vec2) -> C64 {
    C64::new(1.0 + 0.5 * (2.0 * x.x - v.y).cos(), 0.3 * x.y * v.x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn exit_times_swap_under_reversal(i in 0usize..4, seed in any::<u64>()) {
        let (d, p) = sample(i, seed);
        let e = d.exit_times(p).unwrap();
        let r = d.exit_times(p.reversed()).unwrap();
        prop_assert!((e.t_plus - r.t_minus).abs() < 1e-12);
        prop_assert!((e.t_minus - r.t_plus).abs() < 1e-12);
        prop_assert!((e.tau - e.t_plus - e.t_minus).abs() < 1e-12);
    }

    #[test]
    fn chord_length_constant_along_chord(i in 0usize..4, seed in any::<u64>(), frac in 0.01f64..0.99) {
        let (d, p) = sample(i, seed);
        let e = d.exit_times(p).unwrap();
        let y = p.x + p.v * (frac * e.t_plus - (1.0 - frac) * e.t_minus);
        prop_assume!(d.contains(y));
        let q = d.exit_times(PhasePoint::new(y, p.v)).unwrap();
        prop_assert!((q.tau - e.tau).abs() < 1e-10 * e.tau.max(1.0));
    }

    #[test]
    fn exit_times_scale_inversely_with_speed(i in 0usize..4, seed in any::<u64>(), s in 0.1f64..10.0) {
        let (d, p) = sample(i, seed);
        let e = d.exit_times(p).unwrap();
        let q = d.exit_times(PhasePoint::new(p.x, p.v * s)).unwrap();
        prop_assert!((q.t_plus * s - e.t_plus).abs() < 1e-10 * e.tau);
        prop_assert!((q.t_minus * s - e.t_minus).abs() < 1e-10 * e.tau);
    }

    #[test]
    fn theta_even_and_constant_along_chord(i in 0usize..4, seed in any::<u64>(), frac in 0.05f64..0.95) {
        let (d, p) = sample(i, seed);
        let sigma = general_sigma();
        let t = theta(&sigma, &d, p).unwrap();
        let tr = theta(&sigma, &d, p.reversed()).unwrap();
        prop_assert!((t - tr).abs() < 1e-9 * t);
        let e = d.exit_times(p).unwrap();
        let y = p.x + p.v * (frac * e.t_plus - (1.0 - frac) * e.t_minus);
        prop_assume!(d.contains(y));
        let ty = theta(&sigma, &d, PhasePoint::new(y, p.v)).unwrap();
        prop_assert!((t - ty).abs() < 1e-8 * t);
    }

    #[test]
    fn spectral_values_even_and_periodic(i in 0usize..4, seed in any::<u64>(), k in -5i64..5, g in 0.05f64..0.99) {
        let (d, p) = sample(i, seed);
        let sigma = general_sigma();
        let gamma = BounceBack::new(g).unwrap();
        let f = f_k_eval(p, k, &sigma, gamma, &d, 1e-9).unwrap();
        let fr = f_k_eval(p.reversed(), k, &sigma, gamma, &d, 1e-9).unwrap();
        prop_assert!((f.value - fr.value).norm() < 1e-8 * f.value.norm());
        prop_assert!(f.value.re <= g.ln() / f.tau);
        let m = C64::new(g, 0.0) * (-f.value * f.tau - f.theta).exp();
        prop_assert!((m - 1.0).norm() < 1e-9);
    }

    #[test]
    fn semigroup_law(seed in any::<u64>(), t in 0.0f64..5.0, s in 0.0f64..5.0, g in 0.0f64..1.0) {
        let (d, p) = sample(0, seed);
        let sigma = CollisionFrequency::constant(1.0).unwrap();
        let gamma = BounceBack::new(g.max(1e-3)).unwrap();
        let direct = u_eval(&phi, &d, &sigma, gamma, p, t + s).unwrap();
        let inner = |x: Vec2, v: Vec2| u_eval(&phi, &d, &sigma, gamma, PhasePoint::new(x, v), s).unwrap();
        let composed = u_eval(&inner, &d, &sigma, gamma, p, t).unwrap();
        prop_assert!((direct - composed).norm() <= 1e-12 * direct.norm().max(1e-300));
    }

    #[test]
    fn streaming_contracts_pointwise(i in 0usize..4, seed in any::<u64>(), t in 0.0f64..10.0, g in 0.01f64..1.0) {
        let (d, p) = sample(i, seed);
        let sigma = CollisionFrequency::constant(0.7).unwrap();
        let gamma = BounceBack::new(g).unwrap();
        let bound = 1.5 * (-0.7 * t).exp();
        let u = u_eval(&|x, v| C64::new(1.0 + 0.5 * (x.x * v.y).sin(), 0.0), &d, &sigma, gamma, p, t).unwrap();
        prop_assert!(u.re >= 0.0 && u.re <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn resolvent_inverts_boundary_operator(seed in any::<u64>(), re in 0.0f64..2.0, im in -8.0f64..8.0, g in 0.05f64..1.0) {
        let (d, p) = sample(1, seed);
        let sigma = CollisionFrequency::constant(1.0).unwrap();
        let gamma = BounceBack::new(g).unwrap();
        let r = Resolvent::new(&d, &sigma, gamma, C64::new(re, im)).unwrap();
        let e = d.exit_times(p).unwrap();
        let out = PhasePoint::new(p.x + p.v * e.t_plus, p.v);
        let solve = |x: Vec2, v: Vec2| r.solve_i_minus_mh(&phi, PhasePoint::new(x, v)).unwrap();
        let back = r.apply_i_minus_mh(&solve, out).unwrap();
        let expect = phi(out.x, out.v);
        prop_assert!((back - expect).norm() < 1e-10 * expect.norm());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn resolvent_identity(seed in any::<u64>(), a in 0.1f64..1.5, b in 0.1f64..1.5, w in -4.0f64..4.0, g in 0.1f64..0.9) {
        let (d, p) = sample(0, seed);
        let sigma = CollisionFrequency::constant(1.0).unwrap();
        let gamma = BounceBack::new(g).unwrap();
        let (l1, l2) = (C64::new(a, w), C64::new(b, -w));
        let r1 = Resolvent::new(&d, &sigma, gamma, l1).unwrap();
        let r2 = Resolvent::new(&d, &sigma, gamma, l2).unwrap();
        let lhs = r1.apply(&phi, p).unwrap() - r2.apply(&phi, p).unwrap();
        let inner = |x: Vec2, v: Vec2| r2.apply(&phi, PhasePoint::new(x, v)).unwrap();
        let rhs = (l2 - l1) * r1.apply(&inner, p).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-6 * lhs.norm().max(1e-3), "{lhs} vs {rhs}");
    }

    #[test]
    fn streaming_matrix_is_nonnegative_and_substochastic(t in 0.0f64..3.0, g in 0.0f64..1.0) {
        let grid = PhaseGrid::new(SpatialDomain::unit_disk(), (5, 10), VelocityGrid::annulus(2, 1.0, 2.0, 2, 6).unwrap()).unwrap();
        let sigma = CollisionFrequency::constant(0.5).unwrap();
        let m = StreamingMatrix::build(&grid, &sigma, BounceBack::new(g).unwrap(), t).unwrap();
        for r in 0..m.dim() {
            let mut sum = 0.0;
            for (_, w) in m.row(r) {
                prop_assert!(w >= 0.0);
                sum += w;
            }
            prop_assert!(sum <= (-0.5 * t).exp() * (1.0 + 1e-12));
        }
    }
}

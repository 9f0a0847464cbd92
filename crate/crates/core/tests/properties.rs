use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use halfmap::bubbles::{
    energy_spectral, evaluate_bubble, BubbleComponent, BubbleParams, CircleValuedLineMap, SymmetryAction,
};
use halfmap::conformal::{chordal_sq, cayley, inverse_stereographic, stereographic};
use halfmap::line::LineGrid;
use halfmap::linearization::{complex_residual, reference_kernel_modes, ComplexCircleField};
use halfmap::minimizer::{energy, retract};
use halfmap::report::{Check, Command, Report, RunConfig};
use halfmap::spectral::{analyze, synthesize, CircleGrid, SpectralField};

fn component() -> impl Strategy<Value = BubbleComponent> {
    (0.3..3.0f64, -2.0..2.0f64).prop_map(|(scale, center)| BubbleComponent { scale, center })
}

fn bubble(max_degree: usize) -> impl Strategy<Value = BubbleParams> {
    (0.0..2.0 * PI, prop::collection::vec(component(), 1..=max_degree), any::<bool>())
        .prop_map(|(theta, components, conjugate)| BubbleParams::new(theta, components, conjugate).unwrap())
}

fn action() -> impl Strategy<Value = SymmetryAction> {
    (0.0..2.0 * PI, -1.0..1.0f64, 0.5..2.0f64).prop_map(|(a, s, l)| SymmetryAction::new(a, s, l).unwrap())
}

fn small_grid() -> Arc<LineGrid> {
    Arc::new(LineGrid::graded(801, 1000.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bubbles_are_unit_valued(p in bubble(4), x in -1e3..1e3f64) {
        prop_assert!((evaluate_bubble(&p, x).norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn winding_degree_survives_symmetries(p in bubble(3), g in action()) {
        let line = small_grid();
        let u = CircleValuedLineMap::from_bubble(&p, line.clone()).unwrap();
        let moved = CircleValuedLineMap::from_bubble(&g.apply_to_params(&p), line).unwrap();
        prop_assert_eq!(u.degree(), p.degree());
        prop_assert_eq!(moved.degree(), p.degree());
    }

    #[test]
    fn symmetry_action_on_params_matches_composition(p in bubble(2), g in action(), x in -50.0..50.0f64) {
        let direct = g.apply(|y| evaluate_bubble(&p, y), x);
        let via_params = evaluate_bubble(&g.apply_to_params(&p), x);
        prop_assert!((direct - via_params).norm() <= 1e-10);
    }

    #[test]
    fn spectral_energy_is_quantized(p in bubble(3)) {
        let u = CircleValuedLineMap::from_bubble(&p, small_grid()).unwrap();
        let e = energy_spectral(&u, 128).unwrap();
        prop_assert!((e.energy - PI * p.degree().unsigned_abs() as f64).abs() <= 1e-6, "{}", e.energy);
    }

    #[test]
    fn chordal_distance_matches_embedding(x in -1e3..1e3f64, y in -1e3..1e3f64) {
        let (p, q) = (stereographic(x), stereographic(y));
        let direct = (p.p1() - q.p1()).powi(2) + (p.p2() - q.p2()).powi(2);
        prop_assert!((chordal_sq(x, y) - direct).abs() <= 1e-12 * (1.0 + direct));
    }

    #[test]
    fn stereographic_round_trips(x in -1e4..1e4f64) {
        let back = inverse_stereographic(stereographic(x)).unwrap();
        prop_assert!((back - x).abs() <= 1e-9 * (1.0 + x.abs()));
        prop_assert!((cayley(x).norm() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn kernel_span_has_zero_residual(a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64) {
        let [z1, z2, z3] = reference_kernel_modes();
        let combo = z1.scale(Complex64::new(a, 0.0))
            .add(&z2.scale(Complex64::new(b, 0.0)))
            .add(&z3.scale(Complex64::new(c, 0.0)));
        prop_assert!(complex_residual(&ComplexCircleField::new(combo)) <= 1e-14);
    }

    #[test]
    fn analyze_inverts_synthesize(seed in any::<u64>(), band in 1usize..24) {
        use rand::SeedableRng;
        let field = SpectralField::random(band, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let grid = CircleGrid::for_band(band);
        let back = analyze(&grid, &synthesize(&field, &grid), band).unwrap();
        prop_assert!(back.sub(&field).sup_coeff() <= 1e-13);
    }

    #[test]
    fn energy_is_rotation_invariant_and_retraction_stays_unit(
        phases in prop::collection::vec(-PI..PI, 33),
        kick in prop::collection::vec((-0.5..0.5f64, -0.5..0.5f64), 33),
        alpha in 0.0..2.0 * PI,
    ) {
        let grid = CircleGrid::new(33).unwrap();
        let u: Vec<Complex64> = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        let rotated: Vec<Complex64> = u.iter().map(|v| v * Complex64::from_polar(1.0, alpha)).collect();
        let e = energy(&grid, &u).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!((energy(&grid, &rotated).unwrap() - e).abs() <= 1e-11 * (1.0 + e));
        let delta: Vec<Complex64> = kick.iter().map(|&(re, im)| Complex64::new(re, im)).collect();
        let moved = retract(&u, &delta).unwrap();
        prop_assert!(moved.iter().all(|v| (v.norm() - 1.0).abs() <= 1e-14));
    }

    #[test]
    fn report_order_and_margins_are_stable(values in prop::collection::vec((0u8..26, 0.0..2.0f64), 1..12)) {
        let make = |vals: &[(u8, f64)]| {
            vals.iter()
                .enumerate()
                .map(|(i, &(n, v))| Check::at_most(format!("{}{i:02}", (b'a' + n) as char), v, 1.0))
                .collect::<Vec<_>>()
        };
        let forward = make(&values);
        let mut backward = forward.clone();
        backward.reverse();
        let cfg = RunConfig::new(Command::VerifyKernel);
        let a = Report::new(cfg.clone(), forward, serde_json::Value::Null, 0.0);
        let b = Report::new(cfg, backward, serde_json::Value::Null, 0.0);
        prop_assert_eq!(a.body_json().unwrap(), b.body_json().unwrap());
        for c in &a.checks {
            prop_assert_eq!(c.pass, c.margin >= 0.0);
        }
        prop_assert_eq!(a.passed, values.iter().all(|v| v.1 <= 1.0));
    }
}

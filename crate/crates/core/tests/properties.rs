use approx::assert_relative_eq;
use degen_lab::io::fmt17;
use degen_lab::observability::gram_matrix;
use degen_lab::semigroup::evolve;
use degen_lab::spectral::{
    build_analytic_model, build_laplacian_oracle, DegenerateOperator, ModalState,
};
use degen_lab::window::{IntervalSet, ObservationWindow};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn seventeen_digits_round_trip(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let back: f64 = fmt17(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn window_and_complement_partition_the_gram_identity(alpha in 0.05f64..1.9, a in 0.05f64..0.45, len in 0.1f64..0.5) {
        let model = build_analytic_model(DegenerateOperator::new(alpha).unwrap(), 8).unwrap();
        let w = ObservationWindow::interval(a, a + len).unwrap();
        let wc = w.complement().unwrap();
        let g = gram_matrix(&model, &w, 8).unwrap() + gram_matrix(&model, &wc, 8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let target = if i == j { 1.0 } else { 0.0 };
                prop_assert!((g[(i, j)] - target).abs() < 1e-8, "G[{i},{j}] = {}", g[(i, j)]);
            }
        }
    }

    #[test]
    fn free_evolution_is_a_semigroup(alpha in 0.01f64..1.9, s in 0.0f64..0.3, t in 0.0f64..0.3, seed in prop::collection::vec(-1.0f64..1.0, 6)) {
        let model = build_analytic_model(DegenerateOperator::new(alpha).unwrap(), 12).unwrap();
        let u0 = ModalState::padded(&seed, 12);
        let two_step = evolve(&model, &evolve(&model, &u0, s).unwrap(), t).unwrap();
        let one_step = evolve(&model, &u0, s + t).unwrap();
        for (a, b) in two_step.coeffs().iter().zip(one_step.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn parsed_intervals_keep_their_measure(cuts in prop::collection::btree_set(1u32..999, 2..8)) {
        let mut pts: Vec<f64> = cuts.into_iter().map(|c| c as f64 / 1000.0).collect();
        if pts.len() % 2 == 1 {
            pts.pop();
        }
        let text = pts.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
        let set = IntervalSet::parse(&text, 0.0, 1.0).unwrap();
        let expected: f64 = pts.chunks(2).map(|c| c[1] - c[0]).sum();
        prop_assert!((set.measure() - expected).abs() < 1e-12);
        let comp = set.complement(0.0, 1.0).unwrap();
        prop_assert!((set.measure() + comp.measure() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn eigenvalues_increase_and_dirichlet_limit_matches_pi_squared() {
    let model = build_laplacian_oracle(10).unwrap();
    for (j, lam) in model.lambdas().iter().enumerate() {
        let k = (j + 1) as f64 * std::f64::consts::PI;
        assert_relative_eq!(*lam, k * k, max_relative = 1e-12);
    }
    let strong = build_analytic_model(DegenerateOperator::new(1.5).unwrap(), 10).unwrap();
    assert!(strong.lambdas().windows(2).all(|w| w[0] < w[1]));
}

use lindiff::chain::{resolvent, FiniteChain};
use lindiff::form::{energy, unit_contraction, FormFunction, StepCoeff};
use lindiff::montecarlo::{hitting_formula, simulate_paths, SimConfig, Terminal};
use lindiff::{DiffusionSpec, MeasureComponent, RadonMeasure};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn birth_death() -> impl Strategy<Value = FiniteChain> {
    (2usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(0.05f64..5.0, n - 1),
            prop::collection::vec(0.05f64..5.0, n - 1),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..2.0], n),
        )
            .prop_map(|(up, down, kill)| FiniteChain::birth_death(&up, &down, &kill).unwrap())
    })
}

fn max_rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(1e-300)).fold(0.0, f64::max)
}

fn step_coeff() -> impl Strategy<Value = StepCoeff> {
    (prop::collection::vec(0.01f64..0.99, 0..3), prop::collection::vec(-3.0f64..3.0, 3)).prop_map(|(mut cuts, vals)| {
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut bp = vec![0.0];
        bp.extend(cuts);
        bp.push(1.0);
        let values = vals[..bp.len() - 1].to_vec();
        StepCoeff::new(bp, values).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resolvent_inverts_alpha_minus_q(chain in birth_death(), alpha in 0.1f64..4.0) {
        let n = chain.n();
        let oracle = (DMatrix::identity(n, n) * alpha - chain.generator()).try_inverse().unwrap();
        prop_assert!(max_rel(&resolvent(&chain, alpha), &oracle) < 1e-9);
    }

    #[test]
    fn resolvent_equation(chain in birth_death(), alpha in 0.1f64..4.0, beta in 0.1f64..4.0) {
        let (ua, ub) = (resolvent(&chain, alpha), resolvent(&chain, beta));
        let lhs = &ua - &ub;
        let rhs = (&ua * &ub) * (beta - alpha);
        let scale = ua.amax().max(ub.amax());
        prop_assert!((lhs - rhs).amax() <= 1e-10 * scale);
    }

    #[test]
    fn contraction_lowers_energy(c0 in step_coeff(), c1 in step_coeff(), base in -1.0f64..2.0) {
        let spec = DiffusionSpec::cantor_scale();
        let u = FormFunction { base_x: 0.0, base_val: base, coeffs: vec![c0, c1] };
        let v = unit_contraction(&spec.scale, &u, 1e-12).unwrap();
        let (eu, ev) = (energy(&spec, &u, &u, 1e-12).unwrap(), energy(&spec, &v, &v, 1e-12).unwrap());
        prop_assert!(ev.lo() <= eu.hi() + 1e-9, "{ev} > {eu}");
    }

    #[test]
    fn formula_is_monotone_probability(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let spec = DiffusionSpec::cantor_scale();
        let (x, y) = (x.min(y), x.max(y));
        let (px, py) = (hitting_formula(&spec, 0.0, x, 1.0, 1e-12), hitting_formula(&spec, 0.0, y, 1.0, 1e-12));
        prop_assert!(px.lo() >= 0.0 && py.hi() <= 1.0);
        prop_assert!(px.lo() <= py.hi());
    }

    #[test]
    fn formula_ignores_affine_scale(alpha in 0.1f64..10.0, beta in -5.0f64..5.0, x in 0.01f64..0.99) {
        let spec = DiffusionSpec::cantor_scale();
        let p = hitting_formula(&spec, 0.0, x, 1.0, 1e-12);
        let q = hitting_formula(&spec.with_affine_scale(alpha, beta), 0.0, x, 1.0, 1e-12);
        prop_assert!((p.value - q.value).abs() <= p.error + q.error + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn affine_scale_keeps_terminals(alpha in 0.25f64..4.0, beta in -2.0f64..2.0, seed in any::<u64>()) {
        let spec = DiffusionSpec::cantor_scale();
        let h = 1.0 / 32.0;
        let a = simulate_paths(&spec, 0.3, 0.0, 1.0, 200, &SimConfig::new(h, seed)).unwrap();
        let b = simulate_paths(&spec.with_affine_scale(alpha, beta), 0.3, 0.0, 1.0, 200, &SimConfig::new(alpha * h, seed)).unwrap();
        let ta: Vec<Terminal> = a.iter().map(|p| p.terminal).collect();
        let tb: Vec<Terminal> = b.iter().map(|p| p.terminal).collect();
        prop_assert_eq!(ta, tb);
    }

    #[test]
    fn doubling_killing_shortens_each_path(rate in 0.1f64..5.0, seed in any::<u64>()) {
        let mut spec = DiffusionSpec::brownian_unit();
        spec.killing = RadonMeasure::single(MeasureComponent::lebesgue_on(0.0, 1.0).scaled(rate));
        let cfg = SimConfig::new(1.0 / 16.0, seed);
        let one = simulate_paths(&spec, 0.5, 0.0, 1.0, 200, &cfg).unwrap();
        spec.killing = spec.killing.scaled(2.0);
        let two = simulate_paths(&spec, 0.5, 0.0, 1.0, 200, &cfg).unwrap();
        for (p, q) in one.iter().zip(&two) {
            prop_assert!(q.lifetime <= p.lifetime + 1e-12);
        }
    }
}

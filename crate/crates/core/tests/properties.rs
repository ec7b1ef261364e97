//! Property tests over randomly generated operators, families and signals.

#[path = "support/oracle.rs"]
mod oracle;

use proptest::prelude::*;
use regimes_core::analysis::word_product;
use regimes_core::expr::{parse_expression, BinOp, Expr, Func};
use regimes_core::jsr::{jsr_bounds, jsr_lower, jsr_upper, JsrOptions};
use regimes_core::linalg::spectral_radius;
use regimes_core::operator::finite_difference_jacobian;
use regimes_core::structure::{commutation_witness, SamplingPlan};
use regimes_core::{
    parse_scenario, run_scenario, AnalysisReport, CollateralParams, Matrix, MatrixNorm, RegimeId, RegimeOperator,
    RegimeSystem, RunOptions, Side, StateVector, SwitchingSignal,
};

fn matrix(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| Matrix::from_row_slice(n, n, &v))
}

fn family(max_dim: usize, max_len: usize) -> impl Strategy<Value = Vec<Matrix>> {
    (1..=max_dim, 1..=max_len).prop_flat_map(|(n, k)| prop::collection::vec(matrix(n), k))
}

fn affine(n: usize) -> impl Strategy<Value = RegimeOperator> {
    (matrix(n), prop::collection::vec(-1.0f64..1.0, n)).prop_map(|(a, c)| RegimeOperator::affine(a, c).unwrap())
}

fn sv(v: &[f64]) -> StateVector {
    StateVector::new(v.to_vec()).unwrap()
}

fn expr_tree(dimension: usize) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-100.0f64..100.0).prop_map(Expr::Const),
        (0..dimension).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        let op = prop_oneof![
            Just(BinOp::Add),
            Just(BinOp::Sub),
            Just(BinOp::Mul),
            Just(BinOp::Div),
            Just(BinOp::Pow),
        ];
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (op, inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expr::Binary {
                op,
                lhs: Box::new(l),
                rhs: Box::new(r),
            }),
            (prop::sample::select(Func::ALL.to_vec()), inner.clone(), inner).prop_map(|(func, a, b)| {
                let args = if func.arity() == 2 { vec![a, b] } else { vec![a] };
                Expr::Call { func, args }
            }),
        ]
    })
}

fn same_outcome(a: &Result<f64, impl std::fmt::Debug>, b: &Result<f64, impl std::fmt::Debug>) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

fn close_rel(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expression_display_reparses_to_same_function(e in expr_tree(3), x in prop::collection::vec(-3.0f64..3.0, 3)) {
        let text = e.to_string();
        let back = parse_expression(&text, 3).unwrap();
        prop_assert_eq!(back.to_string(), text);
        prop_assert!(same_outcome(&e.eval(&x), &back.eval(&x)));
    }

    #[test]
    fn parser_never_panics(text in "\\PC{0,64}") {
        let _ = parse_expression(&text, 4);
    }

    #[test]
    fn parser_never_panics_on_expression_alphabet(text in "[x0-9\\[\\]()+\\-*/^.,e ]{0,64}|(exp|log|min|max|abs)\\([x0-9,+*()]{0,32}") {
        let _ = parse_expression(&text, 10);
    }

    #[test]
    fn jsr_lower_never_exceeds_upper(f in family(4, 3), depth in 1usize..6) {
        let b = jsr_bounds(&f, &JsrOptions { max_depth: depth, ..JsrOptions::default() }).unwrap();
        prop_assert!(b.lower <= b.upper, "{} > {}", b.lower, b.upper);
        let lower = jsr_lower(&f, depth).unwrap().value;
        let upper = jsr_upper(&f, depth, MatrixNorm::InducedInf).unwrap();
        prop_assert!(lower <= upper * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn lower_bound_witness_reproduces_value(f in family(3, 3), depth in 1usize..5) {
        let lb = jsr_lower(&f, depth).unwrap();
        let k = lb.witness.len();
        prop_assert!((1..=depth).contains(&k));
        let rho = spectral_radius(&word_product(&f, &lb.witness).unwrap()).unwrap();
        prop_assert!(close_rel(rho.powf(1.0 / k as f64), lb.value, 1e-12));
    }

    #[test]
    fn spectral_radius_agrees_with_schur(m in (1usize..=5).prop_flat_map(matrix)) {
        let ours = spectral_radius(&m).unwrap();
        let theirs = oracle::spectral_radius(&m);
        prop_assert!((ours - theirs).abs() <= 1e-8 * theirs.max(1.0), "{ours} vs {theirs}");
    }

    #[test]
    fn rho_of_product_is_rotation_invariant((a, b) in (1usize..=4).prop_flat_map(|n| (matrix(n), matrix(n)))) {
        let ab = spectral_radius(&(&a * &b)).unwrap();
        let ba = spectral_radius(&(&b * &a)).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-9, "{ab} vs {ba}");
    }

    #[test]
    fn compose_matches_step_by_step_simulation(
        ops in (1usize..=3).prop_flat_map(|n| prop::collection::vec(affine(n), 1..4)),
        word_seed in prop::collection::vec(0usize..100, 1..12),
        x in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let n = ops[0].dimension();
        let k = ops.len();
        let system = RegimeSystem::new(ops.into_iter().enumerate().map(|(i, o)| (format!("r{i}"), o)).collect()).unwrap();
        let word: Vec<RegimeId> = word_seed.iter().map(|w| RegimeId(w % k)).collect();
        let x0 = sv(&x[..n]);
        let composed = system.compose(&word).unwrap().apply(&x0).unwrap();
        let stepped = system.run_word(&word, &x0).unwrap();
        prop_assert!(composed.distance_inf(stepped.last()) <= 1e-12 * stepped.last().iter().fold(1.0f64, |m, v| m.max(v.abs())));
    }

    #[test]
    fn nonlinear_compose_matches_simulation(word_seed in prop::collection::vec(0usize..2, 1..10), q in 0.0f64..3.0, b in 0.0f64..3.0) {
        let system = collateral_system();
        let word: Vec<RegimeId> = word_seed.into_iter().map(RegimeId).collect();
        let x0 = sv(&[q, b]);
        let composed = system.compose(&word).unwrap().apply(&x0).unwrap();
        let stepped = system.run_word(&word, &x0).unwrap();
        prop_assert!(composed.distance_inf(stepped.last()) <= 1e-12);
    }

    #[test]
    fn affine_operator_is_matrix_times_state_plus_offset(op in (1usize..=4).prop_flat_map(affine), x in prop::collection::vec(-5.0f64..5.0, 4)) {
        let RegimeOperator::Affine { matrix, offset } = &op else { unreachable!() };
        let n = offset.len();
        let y = op.apply(&sv(&x[..n])).unwrap();
        let expected = matrix * nalgebra::DVector::from_column_slice(&x[..n]) + nalgebra::DVector::from_column_slice(offset);
        for i in 0..n {
            prop_assert!((y[i] - expected[i]).abs() <= 1e-14 * (1.0 + expected[i].abs()));
        }
    }

    #[test]
    fn scaling_a_family_scales_its_bounds(f in family(3, 3), c in 0.1f64..10.0) {
        let opts = JsrOptions { max_depth: 5, target_gap: 0.0, ..JsrOptions::default() };
        let base = jsr_bounds(&f, &opts).unwrap();
        let scaled: Vec<Matrix> = f.iter().map(|m| m * c).collect();
        let s = jsr_bounds(&scaled, &opts).unwrap();
        prop_assert!(close_rel(s.lower, c * base.lower, 1e-12), "{} vs {}", s.lower, c * base.lower);
        prop_assert!(close_rel(s.upper, c * base.upper, 1e-12), "{} vs {}", s.upper, c * base.upper);
    }

    #[test]
    fn collateral_jacobian_matches_finite_differences(q in -0.5f64..4.0, b in -0.5f64..4.0, side in prop_oneof![Just(Side::N), Just(Side::C)]) {
        let op = RegimeOperator::collateral(CollateralParams::REFERENCE, side).unwrap();
        let x = sv(&[q, b]);
        let analytic = op.jacobian(&x).unwrap().matrix;
        let fd = finite_difference_jacobian(&op, &x).unwrap();
        prop_assert!((analytic - fd).amax() <= 1e-6);
    }

    #[test]
    fn commutation_witness_reverifies(
        ea in expr_tree(2), eb in expr_tree(2), seed in any::<u64>(),
    ) {
        let a = RegimeOperator::Expression(regimes_core::operator::ExpressionMap::from_trees(vec![ea, Expr::Var(1)]).unwrap());
        let b = RegimeOperator::Expression(regimes_core::operator::ExpressionMap::from_trees(vec![Expr::Var(0), eb]).unwrap());
        let plan = SamplingPlan { grid_points: 3, random_points: 50, seed, ..SamplingPlan::new(2) };
        if let Ok(scan) = commutation_witness(&a, &b, &plan, 1e-9) {
            prop_assert!(scan.max_discrepancy >= 0.0);
            prop_assert_eq!(scan.commute, scan.witness.is_none());
            if let Some(w) = scan.witness {
                let ab = a.apply(&b.apply(&w.point).unwrap()).unwrap();
                let ba = b.apply(&a.apply(&w.point).unwrap()).unwrap();
                let d = ab.distance_inf(&ba);
                prop_assert_eq!(d.to_bits(), w.discrepancy.to_bits());
                prop_assert!(d > 1e-9 * (1.0 + ab.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
                prop_assert!(w.discrepancy <= scan.max_discrepancy);
            }
        }
    }

    #[test]
    fn more_samples_never_lower_the_discrepancy(seed in any::<u64>(), extra in 1usize..200) {
        let sys = collateral_system();
        let (a, b) = (&sys.operators()[0], &sys.operators()[1]);
        let plan = SamplingPlan { random_points: 100, seed, ..SamplingPlan::new(2).with_box(0.0, 3.0) };
        let more = SamplingPlan { random_points: 100 + extra, ..plan.clone() };
        let small = commutation_witness(a, b, &plan, 1e-9).unwrap();
        let large = commutation_witness(a, b, &more, 1e-9).unwrap();
        prop_assert!(large.max_discrepancy >= small.max_discrepancy);
        prop_assert!(!large.commute);
    }

    #[test]
    fn linear_maps_commute_exactly_when_matrices_do(a in matrix(2), d1 in -1.0f64..1.0, d2 in -1.0f64..1.0) {
        // A diagonal pair always commutes; a generic pair does not.
        let diag = |x: f64, y: f64| Matrix::from_row_slice(2, 2, &[x, 0.0, 0.0, y]);
        let p = RegimeOperator::linear(diag(d1, d2)).unwrap();
        let q = RegimeOperator::linear(diag(d2, d1)).unwrap();
        let plan = SamplingPlan::new(2);
        prop_assert!(commutation_witness(&p, &q, &plan, 1e-9).unwrap().commute);
        let r = RegimeOperator::linear(a.clone()).unwrap();
        let comm = (&a * diag(d1, d2) - diag(d1, d2) * &a).amax();
        let scan = commutation_witness(&r, &p, &plan, 1e-9).unwrap();
        if comm > 1e-6 {
            prop_assert!(!scan.commute);
        }
    }

    #[test]
    fn seeded_signals_are_reproducible_and_prefix_stable(seed in any::<u64>(), h in 1usize..300, w in 0.01f64..0.99) {
        let iid = SwitchingSignal::Iid { weights: vec![w, 1.0 - w], seed };
        let a = iid.regimes(h).unwrap();
        prop_assert_eq!(&a, &iid.regimes(h).unwrap());
        prop_assert_eq!(&a[..h / 2], &iid.regimes(h / 2).unwrap()[..]);
        let markov = SwitchingSignal::Markov {
            transition: vec![vec![w, 1.0 - w], vec![1.0 - w, w]],
            initial: RegimeId(1),
            seed,
        };
        let m = markov.regimes(h).unwrap();
        prop_assert_eq!(m[0], RegimeId(1));
        prop_assert_eq!(&m, &markov.regimes(h).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn pruned_search_matches_exhaustive_enumeration(f in family(3, 3), depth in 1usize..=6) {
        let b = jsr_bounds(&f, &JsrOptions { max_depth: depth, target_gap: 0.0, budget: usize::MAX, ..JsrOptions::default() }).unwrap();
        let ex = oracle::Exhaustive::run(&f, b.depth);
        prop_assert!(close_rel(b.lower, ex.lower(), 1e-12), "lower {} vs {}", b.lower, ex.lower());
        prop_assert!(close_rel(b.upper, ex.upper(), 1e-12), "upper {} vs {}", b.upper, ex.upper());
        let gelfand = jsr_upper(&f, depth, MatrixNorm::InducedInf).unwrap();
        prop_assert!(close_rel(gelfand, oracle::Exhaustive::run(&f, depth).gelfand_upper(), 1e-12));
    }

    #[test]
    fn powers_of_one_affine_map_commute(op in (1usize..=3).prop_flat_map(affine)) {
        let sys = RegimeSystem::new(vec![("f".into(), op)]).unwrap();
        let f0 = RegimeId(0);
        let powers = [sys.compose(&[f0]).unwrap(), sys.compose(&[f0, f0]).unwrap(), sys.compose(&[f0, f0, f0]).unwrap()];
        let plan = SamplingPlan::new(sys.dimension());
        for i in 0..3 {
            for j in i + 1..3 {
                let scan = commutation_witness(&powers[i], &powers[j], &plan, 1e-9).unwrap();
                prop_assert!(scan.witness.is_none(), "F^{} vs F^{}: {:?}", i + 1, j + 1, scan.witness);
            }
        }
    }

    #[test]
    fn affine_scenario_round_trips_through_json(
        a in prop::collection::vec(-0.9f64..0.9, 4), c in prop::collection::vec(-1.0f64..1.0, 2), seed in any::<u64>(),
    ) {
        let text = format!(
            r#"{{"dimension": 2, "regimes": [
                {{"label": "a", "operator": {{"affine": {{"matrix": [[{}, {}], [{}, {}]], "offset": [{}, {}]}}}}}},
                {{"label": "b", "operator": {{"affine": {{"matrix": [[0.5, 0.1], [0.0, 0.5]]}}}}}}
            ], "signal": {{"iid": {{"weights": [0.5, 0.5], "seed": {seed}}}}}, "horizon": 12,
            "analyses": ["jsr", "commute", "topology", "simulate"], "initial_state": [0.1, 0.2],
            "jsr": {{"depth": 4}}, "sampler": {{"grid_points": 3, "random_points": 20}}}}"#,
            a[0], a[1], a[2], a[3], c[0], c[1],
        );
        let scenario = parse_scenario(&text, "prop").unwrap();
        let again = parse_scenario(&serde_json::to_string(&scenario.file).unwrap(), "prop").unwrap();
        prop_assert_eq!(&scenario.file, &again.file);
        let report = run_scenario(&scenario, RunOptions { timings: false }).unwrap();
        let json = report.to_json();
        let back = AnalysisReport::from_json(&json).unwrap();
        prop_assert_eq!(back.to_json(), json);
    }
}

fn collateral_system() -> RegimeSystem {
    let p = CollateralParams::REFERENCE;
    RegimeSystem::new(vec![
        ("N".into(), RegimeOperator::collateral(p, Side::N).unwrap()),
        ("C".into(), RegimeOperator::collateral(p, Side::C).unwrap()),
    ])
    .unwrap()
}

#[test]
fn single_matrix_lower_bound_is_its_spectral_radius() {
    let a_n = Matrix::from_row_slice(2, 2, &[0.8, 0.4, 0.0, 0.8]);
    let a_c = Matrix::from_row_slice(2, 2, &[0.8, 0.0, 0.4, 0.8]);
    for m in [a_n, a_c] {
        let lb = jsr_lower(std::slice::from_ref(&m), 1).unwrap();
        assert_eq!(lb.value, spectral_radius(&m).unwrap());
        assert_eq!(lb.witness, vec![RegimeId(0)]);
    }
}

#[test]
fn single_matrix_gelfand_bound_tracks_its_closed_form() {
    // ‖A_N^k‖∞ = 0.8^(k−1)·(0.8 + 0.4k) for the Jordan block.
    let a_n = Matrix::from_row_slice(2, 2, &[0.8, 0.4, 0.0, 0.8]);
    let mut previous = f64::INFINITY;
    for depth in [1usize, 2, 4, 8, 16, 32, 64] {
        let upper = jsr_upper(std::slice::from_ref(&a_n), depth, MatrixNorm::InducedInf).unwrap();
        let expected = (0.8f64.powi(depth as i32 - 1) * (0.8 + 0.4 * depth as f64)).powf(1.0 / depth as f64);
        let best = (1..=depth)
            .map(|k| (0.8f64.powi(k as i32 - 1) * (0.8 + 0.4 * k as f64)).powf(1.0 / k as f64))
            .fold(f64::INFINITY, f64::min);
        assert!((upper - best).abs() <= 1e-12, "depth {depth}: {upper} vs {best}");
        assert!(upper <= previous);
        assert!(expected >= 0.8);
        previous = upper;
    }
}

use esdelay::bounds::{feasible, BoundInputs, PredicateOptions};
use esdelay::feasibility::*;
use esdelay::Variant;

fn theorem(v: Variant, d: usize) -> FeasibilityReport {
    max_epsilon_theorem(&BoundInputs::example_3d(v, d, 1e-8, 1.5), &SearchConfig::defaults(1.0, v)).unwrap()
}

#[test]
fn theorem_rows_near_tables() {
    let cases = [
        (Variant::Unbiased, 0, 0.43e-5),
        (Variant::Unbiased, 5, 0.36e-11),
        (Variant::Unbiased, 50, 0.3e-13),
        (Variant::Classical, 0, 0.19e-4),
        (Variant::Classical, 5, 0.66e-10),
        (Variant::Classical, 50, 0.63e-12),
    ];
    for (v, d, reference) in cases {
        let r = theorem(v, d);
        let ratio = r.epsilon_star / reference;
        assert!((0.5..=2.0).contains(&ratio), "{v} D={d}: {:e}", r.epsilon_star);
        assert!((r.sigma - 1.6).abs() <= 0.1 + 1e-12);
    }
}

#[test]
fn maximality_certificate() {
    for v in [Variant::Unbiased, Variant::Classical] {
        for d in [0, 5, 50] {
            let r = theorem(v, d);
            let tol = SearchConfig::defaults(1.0, v).bisection_tol;
            let b = BoundInputs::example_3d(v, d, r.epsilon_star, r.sigma);
            assert!(feasible(&b, PredicateOptions::default()).feasible);
            assert!(!feasible(&b.with(r.epsilon_star * (1.0 + 3.0 * tol), r.sigma), PredicateOptions::default()).feasible);
            assert!(r.maximality.certified && r.maximality.probes.iter().all(|p| !p.1));
            let expected = decay_rate(v, r.epsilon_star, 0.005, 0.005, 9.5);
            assert_eq!(r.decay_rate, expected);
        }
    }
}

#[test]
fn epsilon_star_non_increasing_in_delay() {
    for v in [Variant::Unbiased, Variant::Classical] {
        let mut prev = f64::INFINITY;
        for d in [1, 2, 5, 10, 20, 50] {
            let e = theorem(v, d).epsilon_star;
            assert!(e <= prev, "{v} D={d}");
            prev = e;
        }
    }
}

#[test]
fn parallel_and_sequential_agree() {
    let inputs = BoundInputs::example_3d(Variant::Unbiased, 5, 1e-8, 1.5);
    let s = SearchConfig::defaults(1.0, Variant::Unbiased);
    let a = max_epsilon_theorem_with(&inputs, &s, Execution::Parallel).unwrap();
    let b = max_epsilon_theorem_with(&inputs, &s, Execution::Sequential).unwrap();
    assert_eq!((a.sigma, a.epsilon_star), (b.sigma, b.epsilon_star));
}

#[test]
fn infeasible_bracket_names_condition() {
    let mut s = SearchConfig::defaults(1.0, Variant::Classical);
    s.epsilon_bracket = EpsilonBracket { lo: 1e-3, hi: 1e-1 };
    match max_epsilon_theorem(&BoundInputs::example_3d(Variant::Classical, 5, 1e-8, 1.5), &s) {
        Err(SearchError::InfeasibleInBracket { condition, .. }) => assert_eq!(condition, "sigma"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn bad_search_config_rejected() {
    let mut s = SearchConfig::defaults(1.0, Variant::Classical);
    s.bisection_tol = 0.7;
    assert!(matches!(s.validate(), Err(SearchError::Config(_))));
    s.bisection_tol = 0.05;
    s.epsilon_bracket = EpsilonBracket { lo: 1e-2, hi: 1e-3 };
    assert!(s.validate().is_err());
}

#[test]
fn vanishing_step_does_not_converge() {
    let t = SimTemplate::example_3d(Variant::Unbiased, 5, 20_000);
    let c = ConvergenceCriterion::for_variant(Variant::Unbiased);
    let v = evaluate_run(&t, 1e-20, 1, 20_000, &c).unwrap();
    assert!(!v.pass);
    assert!(v.reason.contains("no convergence within horizon"), "{}", v.reason);

    let mut s = SearchConfig::defaults(1.0, Variant::Unbiased);
    s.sim_horizon = 20_000;
    s.epsilon_bracket = EpsilonBracket { lo: 1e-20, hi: 2e-20 };
    assert!(matches!(max_epsilon_simulation(&t, &s), Err(SearchError::BracketTooHigh { .. })));
}

#[test]
fn simulation_search_is_reproducible() {
    let mut s = SearchConfig::defaults(1.0, Variant::Classical);
    s.sim_horizon = 100_000;
    s.epsilon_bracket = EpsilonBracket { lo: 1e-5, hi: 1e-1 };
    let t = SimTemplate::example_3d(Variant::Classical, 5, s.sim_horizon);
    let a = max_epsilon_simulation(&t, &s).unwrap();
    let b = max_epsilon_simulation(&t, &s).unwrap();
    assert_eq!(a.epsilon_star, b.epsilon_star);
    assert!(a.epsilon_star < 1e-1 && a.epsilon_star > 1e-5);
    let v = evaluate_epsilon(&t, a.epsilon_star, &s, Execution::Sequential).unwrap();
    assert!(v.pass);
}

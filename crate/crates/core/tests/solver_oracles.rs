mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use railyard_core::solver::{
    solve_lp, solve_milp, LpStatus, MilpOptions, MilpStatus, BOUND_TOL, FEASIBILITY_TOL,
};
use support::oracle::{brute_force_optimum, random_knapsack, random_lp, random_milp, vertex_optimum};

fn check_lp_against_vertices(seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_lp(&mut rng);
    let (model, _) = p.to_model();
    let sol = solve_lp(&model).unwrap();
    match vertex_optimum(&p, &vec![None; p.cost.len()]) {
        None => assert_eq!(sol.status, LpStatus::Infeasible, "seed {seed}: {p:?}"),
        Some(expected) => {
            assert_eq!(sol.status, LpStatus::Optimal, "seed {seed}: {p:?}");
            assert!(
                (sol.objective - expected).abs() <= 1e-7,
                "seed {seed}: simplex {} vs vertices {expected}",
                sol.objective
            );
            let viol = model.violation(&sol.values);
            assert!(viol.constraint <= FEASIBILITY_TOL && viol.bound <= BOUND_TOL);
        }
    }
}

#[test]
fn lp_matches_vertex_enumeration_on_fixed_seeds() {
    for seed in 0..300 {
        check_lp_against_vertices(seed);
    }
}

#[test]
fn milp_matches_brute_force_on_fixed_seeds() {
    for seed in 0..60 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        let p = random_milp(&mut rng, 8);
        let (model, _) = p.to_model();
        let sol = solve_milp(&model, &MilpOptions::exact()).unwrap();
        match brute_force_optimum(&p) {
            None => assert_eq!(sol.status, MilpStatus::Infeasible, "seed {seed}"),
            Some(expected) => {
                assert_eq!(sol.status, MilpStatus::Optimal, "seed {seed}");
                assert!(
                    (sol.objective - expected).abs() <= 1e-6,
                    "seed {seed}: b&b {} vs brute force {expected}",
                    sol.objective
                );
                let viol = model.violation(&sol.values);
                assert!(viol.constraint <= FEASIBILITY_TOL);
                assert!(viol.integrality <= 1e-6);
            }
        }
    }
}

#[test]
fn knapsack_with_ten_items_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let p = random_knapsack(&mut rng, 10);
    let expected = brute_force_optimum(&p).unwrap();
    let (model, _) = p.to_model();
    let sol = solve_milp(&model, &MilpOptions::exact()).unwrap();
    assert!((sol.objective - expected).abs() <= 1e-6);
}

#[test]
fn branch_and_bound_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let p = random_knapsack(&mut rng, 12);
    let (model, _) = p.to_model();
    let a = solve_milp(&model, &MilpOptions::exact()).unwrap();
    let b = solve_milp(&model, &MilpOptions::exact()).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(a.nodes, b.nodes);
    assert_eq!(a.bound_trace, b.bound_trace);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_oracle_equivalence(seed in any::<u64>()) {
        check_lp_against_vertices(seed);
    }

    #[test]
    fn bound_trace_is_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_milp(&mut rng, 10);
        let (model, _) = p.to_model();
        let sol = solve_milp(&model, &MilpOptions::exact()).unwrap();
        // minimization form: never decreasing
        for w in sol.bound_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0));
        }
        if sol.status == MilpStatus::Optimal {
            prop_assert!(sol.gap <= 1e-9);
        }
    }
}

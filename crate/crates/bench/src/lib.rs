//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use railyard_core::ev::{plugged_in_set, RhProblem, VehicleState};
use railyard_core::scenario::{generate_scenarios, ScenarioConfig};
use railyard_core::solver::{ConstraintSense, Integrality, LinearModel, ObjectiveSense};
use railyard_core::{LineLimit, Scenario};

/// A bounded, feasible LP with `n` variables and `m` packing rows.
pub fn packing_lp(seed: u64, m: usize, n: usize) -> LinearModel {
    packing(seed, m, n, Integrality::Continuous)
}

/// The same shape with binary variables.
pub fn packing_milp(seed: u64, m: usize, n: usize) -> LinearModel {
    packing(seed, m, n, Integrality::Binary)
}

fn packing(seed: u64, m: usize, n: usize, kind: Integrality) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = LinearModel::new();
    let vars: Vec<_> = (0..n)
        .map(|j| model.add_variable(format!("x{j}"), 0.0, 1.0, kind).unwrap())
        .collect();
    for _ in 0..m {
        let row: Vec<_> = vars.iter().map(|&v| (v, rng.random_range(1.0..10.0))).collect();
        let total: f64 = row.iter().map(|(_, a)| a).sum();
        model.add_constraint(row, ConstraintSense::Le, 0.4 * total).unwrap();
    }
    let objective: Vec<_> = vars.iter().map(|&v| (v, rng.random_range(1.0..10.0))).collect();
    model.set_objective(ObjectiveSense::Maximize, objective).unwrap();
    model
}

pub fn scenario(seed: u64) -> Scenario {
    generate_scenarios(&ScenarioConfig::default(), seed, 1)
        .unwrap()
        .remove(0)
}

/// The receding-horizon problem at the step with the most plugged-in
/// vehicles, with nothing charged yet.
pub fn busiest_rh_problem(scenario: &Scenario) -> RhProblem<'_> {
    let states: Vec<VehicleState<'_>> = scenario.sessions.iter().map(VehicleState::new).collect();
    let (t, set) = (0..scenario.steps())
        .map(|t| (t, plugged_in_set(&states, t)))
        .max_by_key(|(_, set)| set.len())
        .expect("scenario has steps");
    RhProblem::new(
        t,
        &set,
        &states,
        0.0,
        &scenario.demand_kw,
        LineLimit::unlimited(),
        scenario.grid.dt(),
    )
    .unwrap()
}

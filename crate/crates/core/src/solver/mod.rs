//! Exact LP solver (bounded primal/dual simplex) and a best-bound
//! branch-and-bound layer for models with binary variables.

mod milp;
mod model;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use milp::{
    relative_gap, solve_milp, solve_milp_with_start, MilpOptions, MilpSolution, MilpStatus,
};
pub use model::{
    Constraint, ConstraintId, ConstraintSense, Integrality, LinearModel, ModelError, Objective,
    ObjectiveSense, VarId, Variable, Violation,
};

use simplex::{Outcome, Tableau};

/// Largest constraint residual accepted on a reported solution.
pub const FEASIBILITY_TOL: f64 = 1e-6;
/// Largest bound violation accepted on a reported solution.
pub const BOUND_TOL: f64 = 1e-9;
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective in the model's own sense; NaN unless optimal.
    pub objective: f64,
    /// Empty unless optimal.
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.index()]
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("simplex iteration limit reached after {0} iterations")]
    IterationLimit(usize),
    #[error("numerical failure: constraint residual {constraint:e}, bound violation {bound:e}")]
    Numerical { constraint: f64, bound: f64 },
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("{limit} limit reached after {nodes} nodes without a feasible solution")]
    NoIncumbent { limit: &'static str, nodes: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Solves the continuous relaxation of `model` (integrality flags ignored).
pub fn solve_lp(model: &LinearModel) -> Result<LpSolution, SolverError> {
    let mut tableau = Tableau::new(model);
    let outcome = tableau.solve_primal();
    finish_lp(model, &tableau, outcome)
}

fn finish_lp(
    model: &LinearModel,
    tableau: &Tableau,
    outcome: Outcome,
) -> Result<LpSolution, SolverError> {
    let status = match outcome {
        Outcome::Optimal => LpStatus::Optimal,
        Outcome::Infeasible => LpStatus::Infeasible,
        Outcome::Unbounded => LpStatus::Unbounded,
        Outcome::Cutoff | Outcome::IterationLimit => {
            return Err(SolverError::IterationLimit(tableau.iterations))
        }
    };
    if status != LpStatus::Optimal {
        return Ok(LpSolution {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            iterations: tableau.iterations,
        });
    }
    let values = polish(model, tableau.structural_values())?;
    Ok(LpSolution {
        status,
        objective: model.objective_value(&values),
        values,
        iterations: tableau.iterations,
    })
}

/// Snaps values onto their bounds and rejects points whose residuals exceed
/// the reporting tolerances.
fn polish(model: &LinearModel, mut values: Vec<f64>) -> Result<Vec<f64>, SolverError> {
    for (x, v) in values.iter_mut().zip(model.variables()) {
        *x = x.clamp(v.lower, v.upper);
    }
    let viol = model.violation(&values);
    if viol.constraint > FEASIBILITY_TOL || viol.bound > BOUND_TOL {
        return Err(SolverError::Numerical {
            constraint: viol.constraint,
            bound: viol.bound,
        });
    }
    Ok(values)
}

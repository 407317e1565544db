//! Best-bound branch-and-bound over binary variables.
//!
//! The root relaxation is solved once with the primal simplex. Every other
//! node starts from a copy of the optimal root tableau, applies its branching
//! fixes as bound changes and re-optimizes with the dual simplex; the root
//! basis stays dual feasible under any bound change.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::model::{LinearModel, ObjectiveSense};
use super::simplex::{Outcome, Tableau};
use super::{polish, SolverError, FEASIBILITY_TOL, INTEGRALITY_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOptions {
    /// Relative gap `|objective - bound| / max(1, |objective|)` at which the
    /// search stops with [`MilpStatus::Optimal`].
    pub gap_limit: f64,
    pub node_limit: Option<usize>,
    pub time_limit: Option<Duration>,
    /// Primal heuristics: rounding, diving, flip/swap local search and a
    /// neighborhood search around the incumbent.
    pub heuristic: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            gap_limit: 0.005,
            node_limit: Some(20_000),
            time_limit: None,
            heuristic: true,
        }
    }
}

impl MilpOptions {
    /// Exhaustive search: zero gap, no limits.
    pub fn exact() -> Self {
        Self {
            gap_limit: 0.0,
            node_limit: None,
            time_limit: None,
            heuristic: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    /// A limit was hit while an incumbent existed.
    FeasibleGap,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent objective in the model's sense; NaN when infeasible.
    pub objective: f64,
    pub values: Vec<f64>,
    /// Best relaxation bound in the model's sense.
    pub bound: f64,
    pub gap: f64,
    /// Nodes whose relaxation was solved, root included.
    pub nodes: usize,
    /// Global bound (minimization form) recorded before each node.
    pub bound_trace: Vec<f64>,
}

pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    (objective - bound).abs() / objective.abs().max(1.0)
}

pub fn solve_milp(model: &LinearModel, options: &MilpOptions) -> Result<MilpSolution, SolverError> {
    solve_milp_with_start(model, options, None)
}

/// Like [`solve_milp`], seeding the incumbent with `start` when it is a
/// feasible integral point of `model`.
pub fn solve_milp_with_start(
    model: &LinearModel,
    options: &MilpOptions,
    start: Option<&[f64]>,
) -> Result<MilpSolution, SolverError> {
    BranchAndBound::new(model, options).run(start)
}

/// Node budget of the neighborhood search run at the root.
const RINS_NODES: usize = 500;
/// Largest distance, in binary order, between the two variables of a swap.
const SWAP_WINDOW: usize = 6;
/// Nodes between neighborhood searches during the tree search.
const RINS_PERIOD: usize = 500;

#[derive(Debug)]
struct Node {
    bound: f64,
    seq: usize,
    fixes: Vec<(usize, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest: lowest bound first, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Incumbent {
    objective: f64,
    values: Vec<f64>,
}

struct BranchAndBound<'a> {
    model: &'a LinearModel,
    options: &'a MilpOptions,
    /// +1 for minimization, -1 for maximization.
    sign: f64,
    binaries: Vec<usize>,
    rows_of: Vec<Vec<usize>>,
    incumbent: Option<Incumbent>,
    nodes: usize,
    /// Reusable buffer for heuristic re-solves.
    spare: Option<Tableau>,
    /// Set on sub-searches started by a heuristic, which do not recurse.
    nested: bool,
}

enum Evaluation {
    Pruned,
    Branch { var: usize, objective: f64 },
}

impl<'a> BranchAndBound<'a> {
    fn new(model: &'a LinearModel, options: &'a MilpOptions) -> Self {
        let binaries: Vec<usize> = model
            .variables()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_binary())
            .map(|(j, _)| j)
            .collect();
        let mut rows_of = vec![Vec::new(); model.num_variables()];
        for (i, c) in model.constraints().iter().enumerate() {
            for &(v, _) in &c.row {
                if model.variable(v).is_binary() {
                    rows_of[v.index()].push(i);
                }
            }
        }
        let sign = match model.objective().sense {
            ObjectiveSense::Minimize => 1.0,
            ObjectiveSense::Maximize => -1.0,
        };
        Self {
            model,
            options,
            sign,
            binaries,
            rows_of,
            incumbent: None,
            nodes: 0,
            spare: None,
            nested: false,
        }
    }

    fn prune_tol(&self) -> f64 {
        self.incumbent
            .as_ref()
            .map_or(0.0, |inc| 1e-9 * inc.objective.abs().max(1.0))
    }

    fn cutoff(&self) -> Option<f64> {
        self.incumbent
            .as_ref()
            .map(|inc| inc.objective - self.prune_tol())
    }

    /// Records `values` as the incumbent if feasible and better; returns
    /// whether it was taken.
    fn offer(&mut self, values: Vec<f64>) -> bool {
        let viol = self.model.violation(&values);
        if viol.constraint > FEASIBILITY_TOL || viol.integrality > INTEGRALITY_TOL {
            return false;
        }
        let objective = self.sign * self.model.objective_value(&values);
        if self
            .incumbent
            .as_ref()
            .is_none_or(|inc| objective < inc.objective - self.prune_tol())
        {
            self.incumbent = Some(Incumbent { objective, values });
            true
        } else {
            false
        }
    }

    fn run(mut self, start: Option<&[f64]>) -> Result<MilpSolution, SolverError> {
        let clock = Instant::now();
        if let Some(start) = start {
            if start.len() == self.model.num_variables() {
                let bounded = self
                    .model
                    .variables()
                    .iter()
                    .zip(start)
                    .all(|(v, &x)| x >= v.lower - 1e-9 && x <= v.upper + 1e-9);
                if bounded {
                    self.offer(start.to_vec());
                }
            }
        }

        let mut root = Tableau::new(self.model);
        match root.solve_primal() {
            Outcome::Optimal => {}
            Outcome::Infeasible => return Ok(self.infeasible(Vec::new())),
            Outcome::Unbounded => return Err(SolverError::Unbounded),
            Outcome::Cutoff | Outcome::IterationLimit => {
                return Err(SolverError::IterationLimit(root.iterations))
            }
        }
        self.nodes = 1;
        let mut queue = BinaryHeap::new();
        let mut seq = 0usize;
        let mut trace = Vec::new();
        let root_bound = root.objective();
        trace.push(root_bound.min(self.incumbent.as_ref().map_or(f64::INFINITY, |i| i.objective)));

        let mut work = root.clone();
        let evaluation = self.evaluate(&mut work, self.options.heuristic)?;
        if self.options.heuristic && !self.within_gap(root_bound) {
            self.dive(root.clone())?;
        }
        if self.options.heuristic && !self.nested && !self.within_gap(root_bound) {
            self.rins(&root.structural_values())?;
        }

        if let Evaluation::Branch { var, objective } = evaluation {
            for value in [0.0, 1.0] {
                queue.push(Node {
                    bound: objective,
                    seq,
                    fixes: vec![(var, value)],
                });
                seq += 1;
            }
        }

        let mut limit_hit: Option<&'static str> = None;
        loop {
            let top = queue.peek().map_or(f64::INFINITY, |n: &Node| n.bound);
            let best = match &self.incumbent {
                Some(inc) => top.min(inc.objective),
                None => top,
            };
            trace.push(best);
            if let Some(inc) = &self.incumbent {
                if relative_gap(inc.objective, best) <= self.options.gap_limit + 1e-9 {
                    break;
                }
            }
            let Some(node) = queue.pop() else {
                break;
            };
            if let Some(c) = self.cutoff() {
                if node.bound >= c {
                    continue;
                }
            }
            if self.options.node_limit.is_some_and(|n| self.nodes >= n) {
                queue.push(node);
                limit_hit = Some("node");
                break;
            }
            if self.options.time_limit.is_some_and(|t| clock.elapsed() >= t) {
                queue.push(node);
                limit_hit = Some("time");
                break;
            }
            self.nodes += 1;

            work.copy_from(&root);
            for &(j, v) in &node.fixes {
                work.set_bounds(j, v, v);
            }
            match work.dual(self.cutoff()) {
                Outcome::Optimal => {}
                Outcome::Infeasible | Outcome::Cutoff => continue,
                Outcome::Unbounded | Outcome::IterationLimit => {
                    return Err(SolverError::IterationLimit(work.iterations))
                }
            }
            if work.primal() != Outcome::Optimal {
                return Err(SolverError::IterationLimit(work.iterations));
            }
            let periodic = self.options.heuristic && self.nodes.is_multiple_of(16);
            if self.options.heuristic && !self.nested && self.nodes.is_multiple_of(RINS_PERIOD) {
                self.rins(&work.structural_values())?;
            }
            if let Evaluation::Branch { var, objective } = self.evaluate(&mut work, periodic)? {
                let bound = objective.max(node.bound);
                for value in [0.0, 1.0] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((var, value));
                    queue.push(Node { bound, seq, fixes });
                    seq += 1;
                }
            }
        }

        let Some(inc) = self.incumbent.take() else {
            return match limit_hit {
                Some(limit) => Err(SolverError::NoIncumbent {
                    limit,
                    nodes: self.nodes,
                }),
                None => Ok(self.infeasible(trace)),
            };
        };
        let top = queue.peek().map_or(f64::INFINITY, |n| n.bound);
        let best = top.min(inc.objective);
        let gap = relative_gap(inc.objective, best);
        let status = if limit_hit.is_some() && gap > self.options.gap_limit + 1e-9 {
            MilpStatus::FeasibleGap
        } else {
            MilpStatus::Optimal
        };
        Ok(MilpSolution {
            status,
            objective: self.sign * inc.objective,
            values: inc.values,
            bound: self.sign * best,
            gap,
            nodes: self.nodes,
            bound_trace: trace,
        })
    }

    fn within_gap(&self, bound: f64) -> bool {
        self.incumbent
            .as_ref()
            .is_some_and(|inc| relative_gap(inc.objective, bound) <= self.options.gap_limit + 1e-9)
    }

    /// Fractional diving: repeatedly fixes the least fractional free binary to
    /// its nearest value (the other value if that is infeasible) and
    /// re-optimizes, until the relaxation is integral or both values fail.
    fn dive(&mut self, mut t: Tableau) -> Result<(), SolverError> {
        let mut fixed = vec![false; self.model.num_variables()];
        for _ in 0..=self.binaries.len() {
            let x = t.structural_values();
            let mut pick: Option<(usize, f64)> = None;
            for &j in &self.binaries {
                let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
                if !fixed[j] && frac > INTEGRALITY_TOL && pick.is_none_or(|(_, f)| frac < f - 1e-12) {
                    pick = Some((j, frac));
                }
            }
            let Some((j, _)) = pick else {
                let fixes: Vec<(usize, f64)> =
                    self.binaries.iter().map(|&j| (j, x[j].round())).collect();
                return self.try_fixed(&t, &fixes);
            };
            fixed[j] = true;
            let first = self.preferred(&mut x.clone(), j);
            let mut settled = false;
            for value in [first, 1.0 - first] {
                t.set_bounds(j, value, value);
                match t.dual(self.cutoff()) {
                    Outcome::Optimal => {
                        settled = true;
                        break;
                    }
                    Outcome::IterationLimit => {
                        return Err(SolverError::IterationLimit(t.iterations))
                    }
                    _ => {}
                }
            }
            if !settled {
                return Ok(());
            }
        }
        Ok(())
    }

    /// Relaxation-induced neighborhood search: fixes the binaries on which
    /// the incumbent and the relaxation point `x` agree and searches the rest
    /// with a small node budget.
    fn rins(&mut self, x: &[f64]) -> Result<(), SolverError> {
        let Some(inc) = &self.incumbent else {
            return Ok(());
        };
        let mut sub = self.model.clone();
        let mut free = 0;
        for &j in &self.binaries {
            let v = inc.values[j];
            if (x[j] - v).abs() <= INTEGRALITY_TOL {
                sub.set_bounds(super::VarId::from_index(j), v, v)?;
            } else {
                free += 1;
            }
        }
        if free == 0 {
            return Ok(());
        }
        let options = MilpOptions {
            gap_limit: 0.0,
            node_limit: Some(RINS_NODES),
            time_limit: None,
            heuristic: true,
        };
        let start = inc.values.clone();
        let mut search = BranchAndBound::new(&sub, &options);
        search.nested = true;
        match search.run(Some(&start)) {
            Ok(found) if found.status != MilpStatus::Infeasible => {
                self.offer(found.values);
            }
            Ok(_) | Err(SolverError::NoIncumbent { .. }) => {}
            Err(e) => return Err(e),
        }
        Ok(())
    }

    fn infeasible(&self, trace: Vec<f64>) -> MilpSolution {
        MilpSolution {
            status: MilpStatus::Infeasible,
            objective: f64::NAN,
            values: Vec::new(),
            bound: f64::NAN,
            gap: f64::NAN,
            nodes: self.nodes,
            bound_trace: trace,
        }
    }

    /// Inspects an optimal node relaxation held in `work`: records integral
    /// points, optionally runs the rounding heuristic, and picks the most
    /// fractional binary to branch on.
    fn evaluate(&mut self, work: &mut Tableau, heuristic: bool) -> Result<Evaluation, SolverError> {
        let objective = work.objective();
        if self.cutoff().is_some_and(|c| objective >= c) {
            return Ok(Evaluation::Pruned);
        }
        let x = work.structural_values();
        let mut branch: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let frac = (x[j] - x[j].floor()).min(x[j].ceil() - x[j]);
            if frac > INTEGRALITY_TOL && branch.is_none_or(|(_, f)| frac > f + 1e-12) {
                branch = Some((j, frac));
            }
        }
        match branch {
            None => {
                // Integral up to tolerance; re-solve with the binaries pinned so
                // the continuous part is consistent with exact 0/1 values.
                let fixes: Vec<(usize, f64)> =
                    self.binaries.iter().map(|&j| (j, x[j].round())).collect();
                self.try_fixed(work, &fixes)?;
                Ok(Evaluation::Pruned)
            }
            Some((var, _)) => {
                if heuristic {
                    let fixes = self.round(&x);
                    self.try_fixed(work, &fixes)?;
                }
                if self.cutoff().is_some_and(|c| objective >= c) {
                    return Ok(Evaluation::Pruned);
                }
                Ok(Evaluation::Branch { var, objective })
            }
        }
    }

    fn try_fixed(&mut self, from: &Tableau, fixes: &[(usize, f64)]) -> Result<(), SolverError> {
        let mut t = match self.spare.take() {
            Some(mut t) => {
                t.copy_from(from);
                t
            }
            None => from.clone(),
        };
        let result = self.resolve_fixed(&mut t, fixes);
        self.spare = Some(t);
        result
    }

    fn resolve_fixed(&mut self, t: &mut Tableau, fixes: &[(usize, f64)]) -> Result<(), SolverError> {
        for &(j, v) in fixes {
            t.set_bounds(j, v, v);
        }
        match t.dual(self.cutoff()) {
            Outcome::Optimal => {}
            Outcome::IterationLimit => return Err(SolverError::IterationLimit(t.iterations)),
            _ => return Ok(()),
        }
        if t.primal() != Outcome::Optimal {
            return Ok(());
        }
        let improved = match polish(self.model, t.structural_values()) {
            Ok(values) => self.offer(values),
            Err(_) => false,
        };
        if improved && self.options.heuristic {
            self.local_search(t)?;
        }
        Ok(())
    }

    /// Descent from an integral optimum held in `t` (all binaries fixed):
    /// tries single flips, then swaps of two nearby binaries with opposite
    /// values, keeping any move that improves the incumbent, until neither
    /// neighborhood yields one.
    fn local_search(&mut self, t: &mut Tableau) -> Result<(), SolverError> {
        let n = self.binaries.len();
        loop {
            let mut improved = false;
            for a in 0..n {
                improved |= self.try_move(t, &[self.binaries[a]])?;
            }
            if improved {
                continue;
            }
            for a in 0..n {
                for b in a + 1..n.min(a + 1 + SWAP_WINDOW) {
                    let (ja, jb) = (self.binaries[a], self.binaries[b]);
                    if t.value(ja).round() != t.value(jb).round() {
                        improved |= self.try_move(t, &[ja, jb])?;
                    }
                }
            }
            if !improved {
                return Ok(());
            }
        }
    }

    /// Flips the binaries `js` in `t`; keeps the flip if it yields a better
    /// incumbent, otherwise restores the previous optimum.
    fn try_move(&mut self, t: &mut Tableau, js: &[usize]) -> Result<bool, SolverError> {
        let old: Vec<f64> = js.iter().map(|&j| t.value(j).round()).collect();
        for (&j, &v) in js.iter().zip(&old) {
            t.set_bounds(j, 1.0 - v, 1.0 - v);
        }
        let outcome = t.dual(self.cutoff());
        if outcome == Outcome::IterationLimit {
            return Err(SolverError::IterationLimit(t.iterations));
        }
        if outcome == Outcome::Optimal && t.primal() == Outcome::Optimal {
            if let Ok(values) = polish(self.model, t.structural_values()) {
                if self.offer(values) {
                    return Ok(true);
                }
            }
        }
        for (&j, &v) in js.iter().zip(&old) {
            t.set_bounds(j, v, v);
        }
        match t.dual(None) {
            Outcome::Optimal => Ok(false),
            _ => Err(SolverError::IterationLimit(t.iterations)),
        }
    }

    /// Rounding direction for binary `j` at point `vals`: the nearest value
    /// unless only the other one keeps every row of `j` satisfied.
    fn preferred(&self, vals: &mut [f64], j: usize) -> f64 {
        let near = vals[j].round().clamp(0.0, 1.0);
        let constraints = self.model.constraints();
        let mut holds = |v: f64| {
            let old = vals[j];
            vals[j] = v;
            let ok = self.rows_of[j].iter().all(|&r| {
                let c = &constraints[r];
                c.violation(vals) <= 1e-9 * (1.0 + c.rhs.abs())
            });
            vals[j] = old;
            ok
        };
        if holds(near) || !holds(1.0 - near) {
            near
        } else {
            1.0 - near
        }
    }

    /// Rounds every binary in turn with [`Self::preferred`], each choice
    /// seeing the earlier ones.
    fn round(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut vals = x.to_vec();
        let mut fixes = Vec::with_capacity(self.binaries.len());
        for &j in &self.binaries {
            if (vals[j] - vals[j].round()).abs() > INTEGRALITY_TOL {
                vals[j] = self.preferred(&mut vals, j);
            } else {
                vals[j] = vals[j].round().clamp(0.0, 1.0);
            }
            fixes.push((j, vals[j]));
        }
        fixes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::model::{ConstraintSense, Integrality};

    #[test]
    fn two_binaries_pick_larger() {
        let mut m = LinearModel::new();
        let a = m.add_variable("a", 0.0, 1.0, Integrality::Binary).unwrap();
        let b = m.add_variable("b", 0.0, 1.0, Integrality::Binary).unwrap();
        m.add_constraint([(a, 1.0), (b, 1.0)], ConstraintSense::Le, 1.0).unwrap();
        m.set_objective(ObjectiveSense::Maximize, [(a, 5.0), (b, 4.0)]).unwrap();
        let sol = solve_milp(&m, &MilpOptions::exact()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective - 5.0).abs() < 1e-9);
        assert_eq!(sol.values, vec![1.0, 0.0]);
    }

    #[test]
    fn integral_root_needs_one_node() {
        let mut m = LinearModel::new();
        let a = m.add_variable("a", 0.0, 1.0, Integrality::Binary).unwrap();
        let x = m.add_variable("x", 0.0, 10.0, Integrality::Continuous).unwrap();
        m.add_constraint([(x, 1.0), (a, -10.0)], ConstraintSense::Le, 0.0).unwrap();
        m.set_objective(ObjectiveSense::Maximize, [(x, 1.0), (a, -1.0)]).unwrap();
        let sol = solve_milp(&m, &MilpOptions::exact()).unwrap();
        assert_eq!(sol.nodes, 1);
        assert!((sol.objective - 9.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_binary_model() {
        let mut m = LinearModel::new();
        let a = m.add_variable("a", 0.0, 1.0, Integrality::Binary).unwrap();
        let b = m.add_variable("b", 0.0, 1.0, Integrality::Binary).unwrap();
        // a + b = 1.5 has fractional solutions only
        m.add_constraint([(a, 1.0), (b, 1.0)], ConstraintSense::Eq, 1.5).unwrap();
        m.set_objective(ObjectiveSense::Minimize, [(a, 1.0)]).unwrap();
        let sol = solve_milp(&m, &MilpOptions::exact()).unwrap();
        assert_eq!(sol.status, MilpStatus::Infeasible);
    }

    #[test]
    fn node_limit_without_incumbent_is_an_error() {
        // 2a + 2b + 2c = 3: infeasible over binaries but not relaxed.
        let mut m = LinearModel::new();
        let v: Vec<_> = (0..3)
            .map(|i| m.add_variable(format!("v{i}"), 0.0, 1.0, Integrality::Binary).unwrap())
            .collect();
        m.add_constraint(v.iter().map(|&x| (x, 2.0)), ConstraintSense::Eq, 3.0)
            .unwrap();
        m.set_objective(ObjectiveSense::Minimize, [(v[0], 1.0)]).unwrap();
        let opts = MilpOptions {
            node_limit: Some(1),
            heuristic: false,
            ..MilpOptions::exact()
        };
        let err = solve_milp(&m, &opts).unwrap_err();
        assert!(matches!(err, SolverError::NoIncumbent { limit: "node", .. }));
    }

    #[test]
    fn start_point_becomes_incumbent() {
        let mut m = LinearModel::new();
        let a = m.add_variable("a", 0.0, 1.0, Integrality::Binary).unwrap();
        let b = m.add_variable("b", 0.0, 1.0, Integrality::Binary).unwrap();
        m.add_constraint([(a, 1.0), (b, 1.0)], ConstraintSense::Le, 1.0).unwrap();
        m.set_objective(ObjectiveSense::Maximize, [(a, 5.0), (b, 4.0)]).unwrap();
        let opts = MilpOptions {
            node_limit: Some(1),
            heuristic: false,
            ..MilpOptions::exact()
        };
        let sol = solve_milp_with_start(&m, &opts, Some(&[0.0, 1.0])).unwrap();
        assert!(sol.objective >= 4.0 - 1e-9);
    }
}

//! Dense bounded-variable simplex.
//!
//! Every row is brought to `a·x + s = b` with a slack `s ∈ [0, ∞)` (for `≤`)
//! or `s ∈ [0, 0]` (for `=`); `≥` rows are negated first. Rows whose slack
//! cannot start basic and feasible receive an artificial column, driven to
//! zero by phase 1. Variable bounds are handled implicitly: nonbasic columns
//! sit at one of their bounds and may flip without a pivot.
//!
//! The tableau is kept explicitly (`B⁻¹A`, row-major), together with the
//! reduced-cost row of the active phase. Both the primal and the dual
//! simplex operate on it; the dual is used to re-optimize after bound
//! changes, which keeps the reduced costs valid.

use super::model::{ConstraintSense, LinearModel, ObjectiveSense};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const DROP_TOL: f64 = 1e-13;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    /// Dual objective reached the supplied cutoff.
    Cutoff,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    rows: usize,
    cols: usize,
    structurals: usize,
    first_artificial: usize,
    /// `B⁻¹A`, row-major, `rows × cols`.
    a: Vec<f64>,
    x: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Phase-2 costs, always in minimization form.
    cost: Vec<f64>,
    /// Reduced costs of the active phase.
    d: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    phase_one: bool,
    pub(crate) iterations: usize,
    iteration_cap: usize,
    scratch: Vec<f64>,
    nz: Vec<usize>,
}

impl Tableau {
    /// Builds the tableau at the slack/artificial starting basis.
    pub(crate) fn new(model: &LinearModel) -> Self {
        let m = model.num_constraints();
        let ns = model.num_variables();

        let mut lower: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
        let mut x = lower.clone();
        let mut cost = vec![0.0; ns];
        let flip = if model.objective().sense == ObjectiveSense::Maximize {
            -1.0
        } else {
            1.0
        };
        for &(v, c) in &model.objective().row {
            cost[v.index()] = flip * c;
        }

        // Residual of each row with all structurals at their lower bound, after
        // orienting the row as `≤` or `=`.
        let mut rows_sparse = Vec::with_capacity(m);
        let mut residual = Vec::with_capacity(m);
        let mut equality = Vec::with_capacity(m);
        for c in model.constraints() {
            let sign = if c.sense == ConstraintSense::Ge { -1.0 } else { 1.0 };
            let row: Vec<(usize, f64)> =
                c.row.iter().map(|&(v, a)| (v.index(), sign * a)).collect();
            let activity: f64 = row.iter().map(|&(j, a)| a * x[j]).sum();
            residual.push(sign * c.rhs - activity);
            rows_sparse.push(row);
            equality.push(c.sense == ConstraintSense::Eq);
        }

        let needs_artificial: Vec<bool> = residual
            .iter()
            .zip(&equality)
            .map(|(&r, &eq)| if eq { r.abs() > FEAS_TOL } else { r < -FEAS_TOL })
            .collect();
        let n_art = needs_artificial.iter().filter(|&&b| b).count();
        let cols = ns + m + n_art;

        let mut a = vec![0.0; m * cols];
        let mut status = vec![Status::AtLower; cols];
        let mut basis = Vec::with_capacity(m);
        lower.resize(cols, 0.0);
        upper.resize(cols, 0.0);
        x.resize(cols, 0.0);
        cost.resize(cols, 0.0);

        let mut art = ns + m;
        for i in 0..m {
            let slack = ns + i;
            upper[slack] = if equality[i] { 0.0 } else { f64::INFINITY };
            let r = residual[i];
            let row = &mut a[i * cols..(i + 1) * cols];
            if needs_artificial[i] {
                // Orient so the artificial enters with +1 at value |r|.
                let s = if r < 0.0 { -1.0 } else { 1.0 };
                for &(j, v) in &rows_sparse[i] {
                    row[j] += s * v;
                }
                row[slack] = s;
                row[art] = 1.0;
                upper[art] = f64::INFINITY;
                x[art] = r.abs();
                status[art] = Status::Basic;
                basis.push(art);
                art += 1;
            } else {
                for &(j, v) in &rows_sparse[i] {
                    row[j] += v;
                }
                row[slack] = 1.0;
                x[slack] = if equality[i] { 0.0 } else { r.max(0.0) };
                status[slack] = Status::Basic;
                basis.push(slack);
            }
        }

        let mut t = Tableau {
            rows: m,
            cols,
            structurals: ns,
            first_artificial: ns + m,
            a,
            x,
            lower,
            upper,
            cost,
            d: vec![0.0; cols],
            status,
            basis,
            phase_one: n_art > 0,
            iterations: 0,
            iteration_cap: 50 * (m + cols) + 1000,
            scratch: vec![0.0; cols],
            nz: Vec::with_capacity(cols),
        };
        t.reset_reduced_costs();
        t
    }

    /// Overwrites `self` with `other`, reusing the existing buffers.
    pub(crate) fn copy_from(&mut self, other: &Tableau) {
        self.rows = other.rows;
        self.cols = other.cols;
        self.structurals = other.structurals;
        self.first_artificial = other.first_artificial;
        self.a.clone_from(&other.a);
        self.x.clone_from(&other.x);
        self.lower.clone_from(&other.lower);
        self.upper.clone_from(&other.upper);
        self.cost.clone_from(&other.cost);
        self.d.clone_from(&other.d);
        self.status.clone_from(&other.status);
        self.basis.clone_from(&other.basis);
        self.phase_one = other.phase_one;
        self.iterations = other.iterations;
        self.iteration_cap = other.iteration_cap;
    }

    fn phase_cost(&self, j: usize) -> f64 {
        if self.phase_one {
            if j >= self.first_artificial {
                1.0
            } else {
                0.0
            }
        } else {
            self.cost[j]
        }
    }

    /// `d = c - c_B B⁻¹A` for the active phase.
    fn reset_reduced_costs(&mut self) {
        let cols = self.cols;
        for j in 0..cols {
            self.d[j] = self.phase_cost(j);
        }
        for i in 0..self.rows {
            let cb = self.phase_cost(self.basis[i]);
            if cb != 0.0 {
                let row = &self.a[i * cols..(i + 1) * cols];
                for (dj, &aij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * aij;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn movable(&self, j: usize) -> bool {
        self.upper[j] - self.lower[j] > FEAS_TOL
    }

    /// Minimization-form phase-2 objective.
    pub(crate) fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x).map(|(c, x)| c * x).sum()
    }

    pub(crate) fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    pub(crate) fn structural_values(&self) -> Vec<f64> {
        self.x[..self.structurals].to_vec()
    }

    /// Runs phase 1 (if needed) and phase 2 of the primal simplex.
    pub(crate) fn solve_primal(&mut self) -> Outcome {
        if self.phase_one {
            match self.primal() {
                Outcome::Optimal => {}
                Outcome::Unbounded => return Outcome::IterationLimit,
                other => return other,
            }
            let infeasibility: f64 = (self.first_artificial..self.cols).map(|j| self.x[j]).sum();
            if infeasibility > 1e-7 * (1.0 + self.rhs_scale()) {
                return Outcome::Infeasible;
            }
            for j in self.first_artificial..self.cols {
                self.upper[j] = 0.0;
                if self.status[j] != Status::Basic {
                    self.x[j] = 0.0;
                    self.status[j] = Status::AtLower;
                }
            }
            self.phase_one = false;
            self.reset_reduced_costs();
        }
        self.primal()
    }

    fn rhs_scale(&self) -> f64 {
        self.basis.iter().map(|&b| self.x[b].abs()).fold(0.0, f64::max)
    }

    /// Primal simplex on the active phase. Starts from a primal feasible basis.
    pub(crate) fn primal(&mut self) -> Outcome {
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.iteration_cap {
                return Outcome::IterationLimit;
            }
            let bland = degenerate_run > DEGENERATE_LIMIT;
            let Some((q, dir)) = self.choose_entering(bland) else {
                return Outcome::Optimal;
            };
            match self.primal_ratio(q, dir, bland) {
                Step::Unbounded => return Outcome::Unbounded,
                Step::Flip(theta) => {
                    self.shift_nonbasic(q, dir * theta);
                    self.status[q] = if dir > 0.0 {
                        Status::AtUpper
                    } else {
                        Status::AtLower
                    };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                    self.iterations += 1;
                    degenerate_run = 0;
                }
                Step::Pivot { row, theta, to_upper } => {
                    self.shift_nonbasic(q, dir * theta);
                    let leaving = self.basis[row];
                    self.x[leaving] = if to_upper {
                        self.upper[leaving]
                    } else {
                        self.lower[leaving]
                    };
                    self.pivot(row, q);
                    self.status[leaving] = if to_upper {
                        Status::AtUpper
                    } else {
                        Status::AtLower
                    };
                    self.iterations += 1;
                    if theta <= 1e-12 {
                        degenerate_run += 1;
                    } else {
                        degenerate_run = 0;
                    }
                }
            }
        }
    }

    fn choose_entering(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols {
            let dir = match self.status[j] {
                Status::Basic => continue,
                Status::AtLower if self.d[j] < -OPT_TOL => 1.0,
                Status::AtUpper if self.d[j] > OPT_TOL => -1.0,
                _ => continue,
            };
            if !self.movable(j) {
                continue;
            }
            if bland {
                return Some((j, dir));
            }
            let score = self.d[j].abs();
            if score > best_score {
                best_score = score;
                best = Some((j, dir));
            }
        }
        best
    }

    /// Two-pass (Harris) ratio test for entering column `q` moving in `dir`.
    fn primal_ratio(&self, q: usize, dir: f64, bland: bool) -> Step {
        let cols = self.cols;
        let flip = self.upper[q] - self.lower[q];

        let limit = |i: usize, tol: f64| -> Option<(f64, bool)> {
            let alpha = self.a[i * cols + q];
            if alpha.abs() < PIVOT_TOL {
                return None;
            }
            let b = self.basis[i];
            // Basic variable moves by -dir*alpha per unit step.
            let rate = -dir * alpha;
            if rate < 0.0 {
                Some((((self.x[b] - self.lower[b]) + tol) / -rate, false))
            } else if self.upper[b].is_finite() {
                Some((((self.upper[b] - self.x[b]) + tol) / rate, true))
            } else {
                None
            }
        };

        let mut bound = f64::INFINITY;
        for i in 0..self.rows {
            if let Some((t, _)) = limit(i, if bland { 0.0 } else { FEAS_TOL }) {
                bound = bound.min(t);
            }
        }
        if bound.is_infinite() && flip.is_infinite() {
            return Step::Unbounded;
        }
        if flip <= bound {
            return Step::Flip(flip);
        }

        let mut chosen: Option<(usize, f64, bool)> = None;
        let mut best_alpha = 0.0;
        for i in 0..self.rows {
            let Some((t, to_upper)) = limit(i, 0.0) else {
                continue;
            };
            if t > bound + if bland { 1e-12 } else { 0.0 } {
                continue;
            }
            let alpha = self.a[i * cols + q].abs();
            let better = match chosen {
                None => true,
                Some((r, _, _)) if bland => self.basis[i] < self.basis[r],
                Some(_) => alpha > best_alpha,
            };
            if better {
                best_alpha = alpha;
                chosen = Some((i, t.max(0.0), to_upper));
            }
        }
        let (row, theta, to_upper) = chosen.expect("ratio test bound without a row");
        Step::Pivot {
            row,
            theta,
            to_upper,
        }
    }

    /// Moves nonbasic `q` by `delta`, updating the basic values.
    fn shift_nonbasic(&mut self, q: usize, delta: f64) {
        if delta == 0.0 {
            return;
        }
        self.x[q] += delta;
        let cols = self.cols;
        for i in 0..self.rows {
            let alpha = self.a[i * cols + q];
            if alpha != 0.0 {
                self.x[self.basis[i]] -= delta * alpha;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let piv = self.a[r * cols + q];
        {
            let row = &mut self.a[r * cols..(r + 1) * cols];
            let inv = 1.0 / piv;
            self.nz.clear();
            for (j, v) in row.iter_mut().enumerate() {
                if *v != 0.0 {
                    *v *= inv;
                    if v.abs() < DROP_TOL {
                        *v = 0.0;
                    } else {
                        self.nz.push(j);
                    }
                }
            }
            row[q] = 1.0;
            self.scratch.copy_from_slice(row);
        }
        let sparse = self.nz.len() * 3 < cols;
        let pr = &self.scratch;
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * cols + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * cols..(i + 1) * cols];
            if sparse {
                for &j in &self.nz {
                    let v = row[j] - f * pr[j];
                    row[j] = if v.abs() < DROP_TOL { 0.0 } else { v };
                }
            } else {
                for (v, &p) in row.iter_mut().zip(pr.iter()) {
                    *v -= f * p;
                }
            }
            row[q] = 0.0;
        }
        let f = self.d[q];
        if f != 0.0 {
            if sparse {
                for &j in &self.nz {
                    self.d[j] -= f * pr[j];
                }
            } else {
                for (v, &p) in self.d.iter_mut().zip(pr.iter()) {
                    *v -= f * p;
                }
            }
            self.d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.status[q] = Status::Basic;
        self.status[leaving] = Status::AtLower;
    }

    /// Changes the bounds of structural column `j`. A nonbasic column is moved
    /// onto the new bound on its current side; a basic one may become
    /// infeasible, to be repaired by [`Tableau::dual`].
    pub(crate) fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
        match self.status[j] {
            Status::Basic => {}
            Status::AtLower => {
                let delta = lower - self.x[j];
                self.shift_nonbasic(j, delta);
                self.x[j] = lower;
            }
            Status::AtUpper => {
                let target = if upper.is_finite() { upper } else { lower };
                if !upper.is_finite() {
                    self.status[j] = Status::AtLower;
                }
                let delta = target - self.x[j];
                self.shift_nonbasic(j, delta);
                self.x[j] = target;
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn is_phase_two(&self) -> bool {
        !self.phase_one
    }

    /// Dual simplex from a dual-feasible basis. Stops early with
    /// [`Outcome::Cutoff`] once the objective reaches `cutoff`.
    pub(crate) fn dual(&mut self, cutoff: Option<f64>) -> Outcome {
        debug_assert!(!self.phase_one);
        let cols = self.cols;
        let start = self.iterations;
        loop {
            if self.iterations >= self.iteration_cap {
                return Outcome::IterationLimit;
            }
            if let Some(c) = cutoff {
                if (self.iterations - start).is_multiple_of(8) && self.objective() >= c {
                    return Outcome::Cutoff;
                }
            }
            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, f64, bool)> = None;
            let mut worst = FEAS_TOL;
            for i in 0..self.rows {
                let b = self.basis[i];
                let below = self.lower[b] - self.x[b];
                let above = self.x[b] - self.upper[b];
                if below > worst {
                    worst = below;
                    leave = Some((i, below, false));
                } else if above > worst {
                    worst = above;
                    leave = Some((i, above, true));
                }
            }
            let Some((r, delta, above)) = leave else {
                return Outcome::Optimal;
            };

            // The basic variable must move by `delta`, up when below its lower
            // bound and down when above its upper bound. Row r reads
            // x_b = β - Σ α_j x_j.
            let need = if above { -1.0 } else { 1.0 };
            let row = &self.a[r * cols..(r + 1) * cols];
            let mut ratio_bound = f64::INFINITY;
            for j in 0..cols {
                let Some(dir) = self.dual_direction(j, row[j], need) else {
                    continue;
                };
                let t = ((dir * self.d[j]).max(0.0) + OPT_TOL) / row[j].abs();
                ratio_bound = ratio_bound.min(t);
            }
            if ratio_bound.is_infinite() {
                return Outcome::Infeasible;
            }
            let mut entering: Option<(usize, f64)> = None;
            let mut best_alpha = 0.0;
            for j in 0..cols {
                let Some(dir) = self.dual_direction(j, row[j], need) else {
                    continue;
                };
                let t = (dir * self.d[j]).max(0.0) / row[j].abs();
                if t <= ratio_bound && row[j].abs() > best_alpha {
                    best_alpha = row[j].abs();
                    entering = Some((j, dir));
                }
            }
            let (q, dir) = entering.expect("dual ratio test bound without a column");
            let alpha = self.a[r * cols + q];
            let theta = delta / alpha.abs();
            self.shift_nonbasic(q, dir * theta);
            let leaving = self.basis[r];
            self.x[leaving] = if above {
                self.upper[leaving]
            } else {
                self.lower[leaving]
            };
            self.pivot(r, q);
            self.status[leaving] = if above { Status::AtUpper } else { Status::AtLower };
            self.iterations += 1;
        }
    }

    /// Direction in which nonbasic `j` may move to push the leaving basic
    /// variable in direction `need`, if any.
    fn dual_direction(&self, j: usize, alpha: f64, need: f64) -> Option<f64> {
        if alpha.abs() < PIVOT_TOL || !self.movable(j) {
            return None;
        }
        // Increasing x_j changes x_b by -alpha.
        match self.status[j] {
            Status::AtLower if -alpha * need > 0.0 => Some(1.0),
            Status::AtUpper if alpha * need > 0.0 => Some(-1.0),
            _ => None,
        }
    }
}

enum Step {
    Unbounded,
    Flip(f64),
    Pivot { row: usize, theta: f64, to_upper: bool },
}

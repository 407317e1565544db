use crate::solver::{
    solve_lp, ConstraintSense, Integrality, LinearModel, LpStatus, ObjectiveSense, SolverError,
    VarId,
};

use super::{
    horizon, satisfaction_threshold, ConstraintClass, EvError, LineLimit, LineLimitScope,
    VehicleState, EV_TOL,
};

/// Peak-shaving problem posed at step `t` for the plugged-in vehicles.
#[derive(Debug, Clone)]
pub struct RhProblem<'a> {
    pub t: usize,
    /// Exclusive end of the planning window, always `> t`.
    pub horizon_end: usize,
    pub vehicles: Vec<VehicleState<'a>>,
    /// Tie-break weights favouring vehicles that leave soon.
    pub alpha: Vec<f64>,
    /// Running peak λ̂ of the day so far, kW.
    pub prior_peak: f64,
    /// Train demand of the whole day; steps past the end wrap around.
    pub demand_kw: &'a [f64],
    pub line: LineLimit,
    pub dt: f64,
}

impl<'a> RhProblem<'a> {
    /// Poses the problem for the vehicles `set` (indices into `states`).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        t: usize,
        set: &[usize],
        states: &[VehicleState<'a>],
        prior_peak: f64,
        demand_kw: &'a [f64],
        line: LineLimit,
        dt: f64,
    ) -> Result<Self, EvError> {
        let horizon_end = horizon(set, states, t, dt)?;
        let vehicles: Vec<VehicleState<'a>> = set.iter().map(|&i| states[i]).collect();
        let total_rate: f64 = vehicles.iter().map(|v| v.session.max_kw).sum();
        let eps = 0.5e-3 / total_rate.max(1.0);
        let alpha = vehicles
            .iter()
            .map(|v| eps / (v.session.departure.saturating_sub(t)).max(1) as f64)
            .collect();
        Ok(Self {
            t,
            horizon_end,
            vehicles,
            alpha,
            prior_peak,
            demand_kw,
            line,
            dt,
        })
    }

    fn demand_at(&self, k: usize) -> f64 {
        if self.demand_kw.is_empty() {
            0.0
        } else {
            self.demand_kw[k % self.demand_kw.len()]
        }
    }

    /// Last step (exclusive) at which vehicle `i` can draw power in this window.
    fn window_end(&self, i: usize) -> usize {
        self.vehicles[i].session.departure.min(self.horizon_end)
    }
}

/// Solution of one receding-horizon problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RhSchedule {
    pub t: usize,
    pub horizon_end: usize,
    /// Optimal peak λ_p, attained at step `t`.
    pub peak_kw: f64,
    /// `powers[i][k - t]` for vehicle `i` of the problem; vehicles leaving
    /// inside the window have shorter rows.
    pub powers: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl RhSchedule {
    pub fn first_step(&self) -> Vec<f64> {
        self.powers.iter().map(|p| p[0]).collect()
    }

    pub fn total_at(&self, k: usize) -> f64 {
        self.powers
            .iter()
            .filter_map(|p| p.get(k - self.t))
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct Relax {
    line: bool,
    prior: bool,
}

struct Built {
    model: LinearModel,
    power: Vec<Vec<VarId>>,
    peak: VarId,
}

fn build(p: &RhProblem<'_>, relax: Relax) -> Result<Built, SolverError> {
    let t = p.t;
    let dt = p.dt;
    let mut m = LinearModel::new();
    let peak = m.add_variable("peak", 0.0, f64::INFINITY, Integrality::Continuous)?;
    let mut power = Vec::with_capacity(p.vehicles.len());
    for (i, v) in p.vehicles.iter().enumerate() {
        let s = v.session;
        let gain = s.efficiency * dt;
        let mut row = Vec::with_capacity(p.window_end(i) - t);
        let mut prev_soc: Option<VarId> = None;
        for k in t..p.window_end(i) {
            let pk = m.add_variable(format!("p_{}_{k}", s.id), 0.0, s.max_kw, Integrality::Continuous)?;
            // energy held at the end of step k, i.e. at step k + 1
            let reachable = v.soc_kwh + gain * s.max_kw * (k + 1 - t) as f64;
            let floor = satisfaction_threshold(s, k + 1, dt)
                .min(reachable)
                .min(s.demand_kwh)
                .max(0.0);
            let soc = m.add_variable(
                format!("soc_{}_{}", s.id, k + 1),
                floor,
                s.demand_kwh.max(floor),
                Integrality::Continuous,
            )?;
            match prev_soc {
                None => m.add_constraint([(soc, 1.0), (pk, -gain)], ConstraintSense::Eq, v.soc_kwh)?,
                Some(prev) => m.add_constraint(
                    [(soc, 1.0), (prev, -1.0), (pk, -gain)],
                    ConstraintSense::Eq,
                    0.0,
                )?,
            };
            prev_soc = Some(soc);
            row.push(pk);
        }
        power.push(row);
    }

    let at = |k: usize| -> Vec<(VarId, f64)> {
        power
            .iter()
            .filter_map(|row| row.get(k - t).map(|&x| (x, 1.0)))
            .collect()
    };
    let first = at(t);

    // the first step carries the window peak
    for k in t + 1..p.horizon_end {
        let later = at(k);
        if later.is_empty() {
            continue;
        }
        let row = later
            .into_iter()
            .chain(first.iter().map(|&(x, _)| (x, -1.0)));
        m.add_constraint(row, ConstraintSense::Le, 0.0)?;
    }
    m.add_constraint(
        first.iter().copied().chain([(peak, -1.0)]),
        ConstraintSense::Le,
        0.0,
    )?;

    let mut floor = p.prior_peak;
    if let (Some(p_max), false) = (p.line.p_max_kw, relax.line) {
        floor = floor.min(p_max - p.demand_at(t));
        let last = match p.line.scope {
            LineLimitScope::Horizon => p.horizon_end,
            LineLimitScope::FirstStep => t + 1,
        };
        for k in t..last {
            let row = at(k);
            if !row.is_empty() {
                m.add_constraint(row, ConstraintSense::Le, p_max - p.demand_at(k))?;
            }
        }
    }
    if !relax.prior && floor > EV_TOL {
        m.add_constraint(first.iter().copied(), ConstraintSense::Ge, floor)?;
    }

    let objective = std::iter::once((peak, 1.0)).chain(
        power
            .iter()
            .zip(&p.alpha)
            .map(|(row, &a)| (row[0], -a)),
    );
    m.set_objective(ObjectiveSense::Minimize, objective)?;
    Ok(Built { model: m, power, peak })
}

/// Minimizes the first-step peak subject to rate limits, charging dynamics,
/// satisfaction thresholds, the running peak and the line limit.
pub fn optimize_charging(problem: &RhProblem<'_>) -> Result<RhSchedule, EvError> {
    let step = problem.t;
    if problem.vehicles.is_empty() {
        return Err(EvError::EmptyPluggedSet { step });
    }
    let solver = |source| EvError::Solver { step, source };
    if let Some(p_max) = problem.line.p_max_kw {
        let last = match problem.line.scope {
            LineLimitScope::Horizon => problem.horizon_end,
            LineLimitScope::FirstStep => step + 1,
        };
        if (step..last).any(|k| problem.demand_at(k) > p_max + EV_TOL) {
            return Err(EvError::Infeasible {
                step,
                constraint: ConstraintClass::LineLimit,
            });
        }
    }

    let strict = Relax {
        line: false,
        prior: false,
    };
    let built = build(problem, strict).map_err(solver)?;
    let sol = solve_lp(&built.model).map_err(solver)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Unbounded => return Err(solver(SolverError::Unbounded)),
        LpStatus::Infeasible => {
            return Err(EvError::Infeasible {
                step,
                constraint: diagnose(problem)?,
            })
        }
    }
    let powers = built
        .power
        .iter()
        .map(|row| row.iter().map(|&x| sol.value(x)).collect())
        .collect();
    Ok(RhSchedule {
        t: step,
        horizon_end: problem.horizon_end,
        peak_kw: sol.value(built.peak),
        powers,
        iterations: sol.iterations,
    })
}

/// Names the constraint family responsible for an infeasible problem by
/// dropping families one at a time.
fn diagnose(problem: &RhProblem<'_>) -> Result<ConstraintClass, EvError> {
    let step = problem.t;
    let feasible = |relax: Relax| -> Result<bool, EvError> {
        let built = build(problem, relax).map_err(|source| EvError::Solver { step, source })?;
        let sol = solve_lp(&built.model).map_err(|source| EvError::Solver { step, source })?;
        Ok(sol.status == LpStatus::Optimal)
    };
    if problem.line.p_max_kw.is_some()
        && feasible(Relax {
            line: true,
            prior: false,
        })?
    {
        return Ok(ConstraintClass::LineLimit);
    }
    if feasible(Relax {
        line: false,
        prior: true,
    })? {
        return Ok(ConstraintClass::PriorPeak);
    }
    Ok(if problem.line.p_max_kw.is_some() {
        ConstraintClass::LineLimit
    } else {
        ConstraintClass::Satisfaction
    })
}

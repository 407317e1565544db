//! Peak-minimizing EV charging: per-step rules, the receding-horizon LP and
//! the day simulation loop.

mod day;
mod rh;

use serde::{Deserialize, Serialize};

use crate::scenario::EvSession;
use crate::solver::SolverError;

pub use day::{simulate_day, uncoordinated_profile, ChargingMode, ChargingProfile, DayOptions};
pub use rh::{optimize_charging, RhProblem, RhSchedule};

/// Slack for "still needs energy" and trigger comparisons, kWh or kW.
pub const EV_TOL: f64 = 1e-9;

/// Which steps of the horizon the line limit is enforced on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineLimitScope {
    #[default]
    Horizon,
    FirstStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineLimit {
    /// Limit on EV plus train load at the station feeder, kW. `None` is unlimited.
    pub p_max_kw: Option<f64>,
    pub scope: LineLimitScope,
}

impl LineLimit {
    pub fn unlimited() -> Self {
        Self::default()
    }

    pub fn new(p_max_kw: f64) -> Self {
        Self {
            p_max_kw: Some(p_max_kw),
            scope: LineLimitScope::Horizon,
        }
    }
}

/// Constraint family that made a charging problem infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintClass {
    /// Train demand plus the minimum charging need exceeds the line limit.
    LineLimit,
    /// The satisfaction thresholds cannot be met at the allowed rates.
    Satisfaction,
    /// The running peak cannot be kept.
    PriorPeak,
}

impl std::fmt::Display for ConstraintClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::LineLimit => "line limit",
            Self::Satisfaction => "satisfaction threshold",
            Self::PriorPeak => "prior peak",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvError {
    #[error("step {step}: charging problem infeasible, binding constraint: {constraint}")]
    Infeasible {
        step: usize,
        constraint: ConstraintClass,
    },
    #[error("step {step}: no plugged-in vehicle to schedule")]
    EmptyPluggedSet { step: usize },
    #[error("step {step}: solver failure: {source}")]
    Solver {
        step: usize,
        #[source]
        source: SolverError,
    },
}

/// A vehicle and the energy delivered to it so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState<'a> {
    pub session: &'a EvSession,
    pub soc_kwh: f64,
}

impl<'a> VehicleState<'a> {
    pub fn new(session: &'a EvSession) -> Self {
        Self {
            session,
            soc_kwh: 0.0,
        }
    }

    pub fn remaining_kwh(&self) -> f64 {
        (self.session.demand_kwh - self.soc_kwh).max(0.0)
    }

    /// Largest power usable this step without overshooting the demand.
    pub fn max_step_power(&self, dt: f64) -> f64 {
        self.session
            .max_kw
            .min(self.remaining_kwh() / (self.session.efficiency * dt))
    }
}

/// Indices of vehicles present at step `t` that still need energy.
pub fn plugged_in_set(states: &[VehicleState<'_>], t: usize) -> Vec<usize> {
    states
        .iter()
        .enumerate()
        .filter(|(_, v)| {
            v.session.arrival <= t
                && t < v.session.departure
                && v.soc_kwh < v.session.demand_kwh - EV_TOL
        })
        .map(|(i, _)| i)
        .collect()
}

/// Power needed to charge every vehicle in `set` at its fastest allowed rate.
pub fn required_power(set: &[usize], states: &[VehicleState<'_>], dt: f64) -> f64 {
    set.iter().map(|&i| states[i].max_step_power(dt)).sum()
}

/// Step by which the vehicle is full when charged at its nominal rate from arrival.
pub fn fulfillment_time(session: &EvSession, dt: f64) -> usize {
    session.fulfillment_step(dt)
}

/// Energy the vehicle must hold at step `t`: nominal-rate progress, capped at demand.
pub fn satisfaction_threshold(session: &EvSession, t: usize, dt: f64) -> f64 {
    let elapsed = t.saturating_sub(session.arrival) as f64;
    (session.efficiency * session.nominal_kw * elapsed * dt).min(session.demand_kwh)
}

/// Optimization horizon end: the latest fulfillment time in `set`, at least `t + 1`.
pub fn horizon(
    set: &[usize],
    states: &[VehicleState<'_>],
    t: usize,
    dt: f64,
) -> Result<usize, EvError> {
    set.iter()
        .map(|&i| fulfillment_time(states[i].session, dt))
        .max()
        .map(|end| end.max(t + 1))
        .ok_or(EvError::EmptyPluggedSet { step: t })
}

/// Charge every vehicle in `set` as fast as allowed.
pub fn uncoordinated_step(set: &[usize], states: &[VehicleState<'_>], dt: f64) -> Vec<f64> {
    set.iter().map(|&i| states[i].max_step_power(dt)).collect()
}

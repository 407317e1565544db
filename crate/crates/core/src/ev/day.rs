use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;

use super::{
    optimize_charging, plugged_in_set, required_power, uncoordinated_step, ConstraintClass,
    EvError, LineLimit, RhProblem, VehicleState, EV_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChargingMode {
    /// Receding-horizon peak minimization.
    Optimized,
    /// Every vehicle charges as fast as allowed.
    Uncoordinated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DayOptions {
    pub mode: ChargingMode,
    pub line: LineLimit,
}

impl DayOptions {
    pub fn optimized(line: LineLimit) -> Self {
        Self {
            mode: ChargingMode::Optimized,
            line,
        }
    }

    pub fn uncoordinated() -> Self {
        Self {
            mode: ChargingMode::Uncoordinated,
            line: LineLimit::unlimited(),
        }
    }
}

/// Charging powers of one simulated day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingProfile {
    pub mode: ChargingMode,
    /// Per step, `(vehicle id, kW)` for every plugged-in vehicle.
    pub powers: Vec<Vec<(usize, f64)>>,
    /// P_EV per step, kW.
    pub aggregate_kw: Vec<f64>,
    /// Running peak λ̂ at the end of the day, kW.
    pub running_peak_kw: f64,
    pub day_peak_kw: f64,
    /// Energy delivered per session (same order as the scenario's sessions)
    /// when it left or the day ended.
    pub delivered_kwh: Vec<f64>,
    pub lp_solves: usize,
    pub lp_iterations: usize,
}

impl ChargingProfile {
    pub fn steps(&self) -> usize {
        self.aggregate_kw.len()
    }

    /// Writes `step,vehicle_id,p_kw`.
    pub fn write_vehicle_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::from("step,vehicle_id,p_kw\n");
        for (t, row) in self.powers.iter().enumerate() {
            for (id, p) in row {
                out.push_str(&format!("{t},{id},{p}\n"));
            }
        }
        std::fs::File::create(path)?.write_all(out.as_bytes())
    }

    /// Writes `step,p_ev_kw`.
    pub fn write_aggregate_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::from("step,p_ev_kw\n");
        for (t, p) in self.aggregate_kw.iter().enumerate() {
            out.push_str(&format!("{t},{p}\n"));
        }
        std::fs::File::create(path)?.write_all(out.as_bytes())
    }
}

/// Runs the charging policy over the scenario's day. In optimized mode a
/// new plan is computed whenever the fastest possible charging would raise
/// the running peak or break the line limit; only its first step is applied.
pub fn simulate_day(scenario: &Scenario, options: &DayOptions) -> Result<ChargingProfile, EvError> {
    let steps = scenario.steps();
    let dt = scenario.grid.dt();
    let demand = &scenario.demand_kw;
    let optimized = options.mode == ChargingMode::Optimized;
    let p_max = if optimized { options.line.p_max_kw } else { None };

    if let Some(limit) = p_max {
        if let Some(step) = demand.iter().position(|&d| d > limit + EV_TOL) {
            return Err(EvError::Infeasible {
                step,
                constraint: ConstraintClass::LineLimit,
            });
        }
    }

    let mut states: Vec<VehicleState<'_>> =
        scenario.sessions.iter().map(VehicleState::new).collect();
    let mut powers = Vec::with_capacity(steps);
    let mut aggregate = Vec::with_capacity(steps);
    let mut running_peak = 0.0_f64;
    let mut lp_solves = 0;
    let mut lp_iterations = 0;

    for t in 0..steps {
        let set = plugged_in_set(&states, t);
        if set.is_empty() {
            powers.push(Vec::new());
            aggregate.push(0.0);
            continue;
        }
        let needed = required_power(&set, &states, dt);
        let over_line = p_max.is_some_and(|limit| needed + demand[t] > limit + EV_TOL);
        let step_powers = if optimized && (needed > running_peak + EV_TOL || over_line) {
            let problem =
                RhProblem::new(t, &set, &states, running_peak, demand, options.line, dt)?;
            let plan = optimize_charging(&problem)?;
            lp_solves += 1;
            lp_iterations += plan.iterations;
            running_peak = running_peak.max(plan.peak_kw);
            plan.first_step()
        } else {
            uncoordinated_step(&set, &states, dt)
        };

        let mut row = Vec::with_capacity(set.len());
        let mut total = 0.0;
        for (&i, &p) in set.iter().zip(&step_powers) {
            let v = &mut states[i];
            let p = p.clamp(0.0, v.max_step_power(dt));
            v.soc_kwh += v.session.efficiency * p * dt;
            total += p;
            row.push((v.session.id, p));
        }
        powers.push(row);
        aggregate.push(total);
    }

    let day_peak = aggregate.iter().copied().fold(0.0, f64::max);
    Ok(ChargingProfile {
        mode: options.mode,
        powers,
        aggregate_kw: aggregate,
        running_peak_kw: running_peak,
        day_peak_kw: day_peak,
        delivered_kwh: states.iter().map(|v| v.soc_kwh).collect(),
        lp_solves,
        lp_iterations,
    })
}

pub fn uncoordinated_profile(scenario: &Scenario) -> ChargingProfile {
    simulate_day(scenario, &DayOptions::uncoordinated())
        .expect("uncoordinated charging has no failure modes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ev::tests::car;
    use crate::ev::satisfaction_threshold;
    use crate::scenario::{build_scenario, EvSession, PvParams, SeriesBundle, TimeGrid};

    fn scenario(sessions: Vec<EvSession>, demand: f64) -> Scenario {
        let n = 144;
        build_scenario(
            0,
            1.0,
            TimeGrid::default(),
            &PvParams::default(),
            SeriesBundle {
                demand_kw: vec![demand; n],
                rbe_kw: vec![0.0; n],
                radiation_w_m2: vec![0.0; n],
                buy_price: vec![0.1; n],
                sell_price: vec![0.1; n],
            },
            sessions,
        )
        .unwrap()
    }

    #[test]
    fn empty_day_is_all_zero() {
        let s = scenario(vec![], 0.0);
        for opts in [DayOptions::uncoordinated(), DayOptions::optimized(LineLimit::unlimited())] {
            let p = simulate_day(&s, &opts).unwrap();
            assert_eq!(p.aggregate_kw, vec![0.0; 144]);
            assert_eq!(p.day_peak_kw, 0.0);
        }
    }

    #[test]
    fn single_car_peaks() {
        let s = scenario(vec![car(0, 40, 80, 11.0)], 0.0);
        let opt = simulate_day(&s, &DayOptions::optimized(LineLimit::unlimited())).unwrap();
        let unc = uncoordinated_profile(&s);
        assert!((opt.day_peak_kw - 11.0).abs() < 1e-6, "{}", opt.day_peak_kw);
        assert!((unc.day_peak_kw - 22.0).abs() < 1e-9);
        for p in [&opt, &unc] {
            assert!((p.delivered_kwh[0] - 11.0).abs() < 1e-6);
        }
    }

    #[test]
    fn energy_bookkeeping_and_satisfaction() {
        let sessions = vec![
            car(0, 36, 60, 30.0),
            car(1, 38, 45, 25.0),
            car(2, 40, 90, 50.0),
            car(3, 41, 43, 5.0),
        ];
        let s = scenario(sessions.clone(), 500.0);
        let dt = s.grid.dt();
        let opt = simulate_day(&s, &DayOptions::optimized(LineLimit::new(560.0))).unwrap();
        for (i, sess) in sessions.iter().enumerate() {
            let mut sum = 0.0;
            for row in &opt.powers {
                for &(id, p) in row {
                    if id == sess.id {
                        sum += sess.efficiency * p * dt;
                    }
                }
            }
            assert_eq!(sum, opt.delivered_kwh[i]);
            assert!(opt.delivered_kwh[i] <= sess.demand_kwh + 1e-9);
            let need = satisfaction_threshold(sess, sess.departure.min(144), dt);
            assert!(opt.delivered_kwh[i] >= need - 1e-6, "vehicle {i}");
        }
        for (t, p) in opt.aggregate_kw.iter().enumerate() {
            assert!(p + s.demand_kw[t] <= 560.0 + 1e-6);
        }
        assert!(opt.day_peak_kw <= uncoordinated_profile(&s).day_peak_kw + 1e-6);
    }

    #[test]
    fn line_limit_below_train_demand_fails() {
        let s = scenario(vec![], 500.0);
        let err = simulate_day(&s, &DayOptions::optimized(LineLimit::new(400.0))).unwrap_err();
        assert!(matches!(
            err,
            EvError::Infeasible {
                step: 0,
                constraint: ConstraintClass::LineLimit
            }
        ));
    }
}

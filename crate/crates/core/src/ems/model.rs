use crate::scenario::Scenario;
use crate::solver::{
    solve_milp_with_start, ConstraintSense, Integrality, LinearModel, MilpOptions, MilpStatus,
    ObjectiveSense, VarId,
};

use super::{check_profile, EmsError, EmsParams, EmsSolution};

/// Decision variables of one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmsVars {
    pub p_g: VarId,
    pub p_s: VarId,
    pub p_bplus: VarId,
    pub p_bminus: VarId,
    pub p_rbe: VarId,
    pub soc: VarId,
    /// EV load, pinned to the charging profile through its bounds.
    pub p_ev: VarId,
    pub u_g: VarId,
    pub u_b: VarId,
}

#[derive(Debug, Clone)]
pub struct EmsModel {
    pub model: LinearModel,
    pub steps: Vec<EmsVars>,
}

/// Builds the single-scenario dispatch MILP with the EV load fixed to `p_ev`.
pub fn build_ems_model(
    scenario: &Scenario,
    p_ev: &[f64],
    params: &EmsParams,
) -> Result<EmsModel, EmsError> {
    check_profile(scenario, p_ev)?;
    params.validate()?;
    let dt = scenario.grid.dt();
    let ess = &params.ess;
    let keep = 1.0 - ess.self_discharge;
    let gain = ess.eta_charge * dt;
    let loss = params.discharge_factor() * dt;
    let n = scenario.steps();

    let mut m = LinearModel::new();
    let mut steps = Vec::with_capacity(n);
    let c = Integrality::Continuous;
    for t in 0..n {
        let soc_lower = if params.terminal_soc && t + 1 == n {
            ess.soc_min.max(ess.soc_initial)
        } else {
            ess.soc_min
        };
        let v = EmsVars {
            p_g: m.add_variable(format!("p_g_{t}"), 0.0, params.grid_buy_max_kw, c)?,
            p_s: m.add_variable(format!("p_s_{t}"), 0.0, params.grid_sell_max_kw, c)?,
            p_bplus: m.add_variable(format!("p_bplus_{t}"), 0.0, ess.charge_max_kw, c)?,
            p_bminus: m.add_variable(format!("p_bminus_{t}"), 0.0, ess.discharge_max_kw, c)?,
            p_rbe: m.add_variable(format!("p_rbe_{t}"), 0.0, scenario.rbe_kw[t], c)?,
            soc: m.add_variable(format!("soc_b_{t}"), soc_lower, ess.capacity, c)?,
            p_ev: m.add_variable(format!("p_ev_{t}"), p_ev[t], p_ev[t], c)?,
            u_g: m.add_variable(format!("u_g_{t}"), 0.0, 1.0, Integrality::Binary)?,
            u_b: m.add_variable(format!("u_b_{t}"), 0.0, 1.0, Integrality::Binary)?,
        };

        // supply = demand
        m.add_constraint(
            [
                (v.p_g, 1.0),
                (v.p_bminus, 1.0),
                (v.p_s, -1.0),
                (v.p_bplus, -1.0),
                (v.p_ev, -1.0),
            ],
            ConstraintSense::Eq,
            scenario.demand_kw[t] - scenario.pv_kw[t],
        )?;
        // buy or sell, never both; each big-M is cut to the most the balance
        // row allows in that mode
        let net = scenario.demand_kw[t] + p_ev[t] - scenario.pv_kw[t];
        let m_buy = params.grid_buy_max_kw.min((net + ess.charge_max_kw).max(0.0));
        let m_sell = params.grid_sell_max_kw.min((ess.discharge_max_kw - net).max(0.0));
        m.add_constraint([(v.p_g, 1.0), (v.u_g, -m_buy)], ConstraintSense::Le, 0.0)?;
        m.add_constraint([(v.p_s, 1.0), (v.u_g, m_sell)], ConstraintSense::Le, m_sell)?;
        // charge (grid or braking energy) or discharge, never both
        m.add_constraint(
            [(v.p_rbe, 1.0), (v.p_bplus, 1.0), (v.u_b, -ess.charge_max_kw)],
            ConstraintSense::Le,
            0.0,
        )?;
        m.add_constraint(
            [(v.p_bminus, 1.0), (v.u_b, ess.discharge_max_kw)],
            ConstraintSense::Le,
            ess.discharge_max_kw,
        )?;
        if scenario.rbe_kw[t] < ess.charge_max_kw {
            m.add_constraint(
                [(v.p_rbe, 1.0), (v.u_b, -scenario.rbe_kw[t])],
                ConstraintSense::Le,
                0.0,
            )?;
        }
        let flows = [(v.soc, 1.0), (v.p_rbe, -gain), (v.p_bplus, -gain), (v.p_bminus, loss)];
        match steps.last() {
            None => m.add_constraint(flows, ConstraintSense::Eq, keep * ess.soc_initial)?,
            Some(prev) => {
                let prev: &EmsVars = prev;
                m.add_constraint(
                    flows.into_iter().chain([(prev.soc, -keep)]),
                    ConstraintSense::Eq,
                    0.0,
                )?
            }
        };
        steps.push(v);
    }

    let objective = steps.iter().enumerate().flat_map(|(t, v)| {
        [
            (v.p_g, scenario.buy_price[t] * dt),
            (v.p_s, -scenario.sell_price[t] * dt),
        ]
    });
    m.set_objective(ObjectiveSense::Minimize, objective)?;
    Ok(EmsModel { model: m, steps })
}

/// Dispatch that leaves the storage idle and settles the net load with the
/// grid. Returns `None` when it violates the model (e.g. SoC decay below the
/// minimum).
pub fn grid_only_start(scenario: &Scenario, p_ev: &[f64], params: &EmsParams, built: &EmsModel) -> Option<Vec<f64>> {
    let mut x = vec![0.0; built.model.num_variables()];
    let keep = 1.0 - params.ess.self_discharge;
    let mut soc = params.ess.soc_initial;
    for (t, v) in built.steps.iter().enumerate() {
        let net = scenario.demand_kw[t] + p_ev[t] - scenario.pv_kw[t];
        soc *= keep;
        x[v.p_g.index()] = net.max(0.0);
        x[v.p_s.index()] = (-net).max(0.0);
        x[v.u_g.index()] = if net >= 0.0 { 1.0 } else { 0.0 };
        x[v.p_ev.index()] = p_ev[t];
        x[v.soc.index()] = soc;
    }
    let viol = built.model.violation(&x);
    (viol.constraint <= 1e-9 && viol.bound <= 1e-9).then_some(x)
}

/// First step whose net load cannot be covered by grid purchase plus full
/// storage discharge.
fn overloaded_step(scenario: &Scenario, p_ev: &[f64], params: &EmsParams) -> Option<(usize, f64)> {
    (0..scenario.steps())
        .map(|t| (t, scenario.demand_kw[t] + p_ev[t] - scenario.pv_kw[t]))
        .find(|&(_, net)| net > params.grid_buy_max_kw + params.ess.discharge_max_kw)
}

/// Solves the dispatch MILP for one scenario, seeded with the grid-only dispatch.
pub fn solve_ems(
    scenario: &Scenario,
    p_ev: &[f64],
    params: &EmsParams,
    options: &MilpOptions,
) -> Result<EmsSolution, EmsError> {
    let built = build_ems_model(scenario, p_ev, params)?;
    let start = grid_only_start(scenario, p_ev, params, &built);
    let sol = solve_milp_with_start(&built.model, options, start.as_deref())?;
    if sol.status == MilpStatus::Infeasible {
        let (step, net_kw) = match overloaded_step(scenario, p_ev, params) {
            Some((t, net)) => (Some(t), net),
            None => (None, f64::NAN),
        };
        return Err(EmsError::Infeasible { step, net_kw });
    }

    let x = &sol.values;
    // drop solver round-off so idle flows read as exact zeros
    let get = |var: VarId| {
        let v = x[var.index()];
        if v.abs() < 1e-9 {
            0.0
        } else {
            v
        }
    };
    let series = |f: fn(&EmsVars) -> VarId| built.steps.iter().map(|v| get(f(v))).collect::<Vec<_>>();
    let binary = |f: fn(&EmsVars) -> VarId| {
        built
            .steps
            .iter()
            .map(|v| u8::from(x[f(v).index()] > 0.5))
            .collect::<Vec<_>>()
    };
    let p_g = series(|v| v.p_g);
    let p_s = series(|v| v.p_s);
    let dt = scenario.grid.dt();
    let cost = (0..p_g.len())
        .map(|t| (scenario.buy_price[t] * p_g[t] - scenario.sell_price[t] * p_s[t]) * dt)
        .sum();
    Ok(EmsSolution {
        p_bplus: series(|v| v.p_bplus),
        p_bminus: series(|v| v.p_bminus),
        p_rbe: series(|v| v.p_rbe),
        soc_b: built.steps.iter().map(|v| x[v.soc.index()]).collect(),
        u_g: binary(|v| v.u_g),
        u_b: binary(|v| v.u_b),
        p_g,
        p_s,
        cost,
        status: sol.status,
        gap: sol.gap,
        nodes: sol.nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ems::{baseline_cost, DischargeForm, EssParams};
    use crate::scenario::{build_scenario, PvParams, SeriesBundle, TimeGrid};

    fn grid(steps: usize) -> TimeGrid {
        TimeGrid {
            step_minutes: (1440 / steps) as u32,
            steps_per_day: steps,
            ..TimeGrid::default()
        }
    }

    fn no_ess() -> EmsParams {
        EmsParams {
            ess: EssParams {
                capacity: 0.0,
                soc_min: 0.0,
                soc_initial: 0.0,
                ..EssParams::default()
            },
            ..EmsParams::default()
        }
    }

    /// One-hour steps; PV rated at 100 kW so radiation 500 W/m² gives 50 kW.
    fn scenario(demand: Vec<f64>, radiation: Vec<f64>, rbe: Vec<f64>, price: Vec<f64>) -> Scenario {
        let n = demand.len();
        build_scenario(
            0,
            1.0,
            grid(n),
            &PvParams {
                rated_kw: 100.0,
                ..PvParams::default()
            },
            SeriesBundle {
                demand_kw: demand,
                rbe_kw: rbe,
                radiation_w_m2: radiation,
                buy_price: price.clone(),
                sell_price: price,
            },
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn model_has_nine_variables_per_step() {
        let n = 144;
        let s = scenario(vec![100.0; n], vec![0.0; n], vec![0.0; n], vec![0.1; n]);
        let built = build_ems_model(&s, &vec![0.0; n], &EmsParams::default()).unwrap();
        let vars = built.model.variables();
        assert_eq!(vars.iter().filter(|v| v.is_binary()).count(), 2 * n);
        assert_eq!(vars.iter().filter(|v| !v.is_binary()).count(), 7 * n);
    }

    #[test]
    fn hourly_purchase_covers_net_load() {
        // the same one-hour situation repeated for every hour of the day
        let n = 24;
        let s = scenario(vec![100.0; n], vec![500.0; n], vec![0.0; n], vec![0.1; n]);
        assert!((s.pv_kw[0] - 50.0).abs() < 1e-12);
        let sol = solve_ems(&s, &vec![0.0; n], &no_ess(), &MilpOptions::exact()).unwrap();
        assert!(sol.p_g.iter().all(|&p| (p - 50.0).abs() < 1e-9));
        assert!((sol.cost - 5.0 * n as f64).abs() < 1e-9);
    }

    #[test]
    fn pv_surplus_is_sold() {
        let n = 24;
        let s = scenario(vec![10.0; n], vec![500.0; n], vec![0.0; n], vec![0.1; n]);
        let sol = solve_ems(&s, &vec![0.0; n], &no_ess(), &MilpOptions::exact()).unwrap();
        assert!(sol.p_s.iter().all(|&p| (p - 40.0).abs() < 1e-9));
        assert!(sol.cost < 0.0);
        assert!(sol.u_g.iter().all(|&u| u == 0));
    }

    #[test]
    fn idle_day_costs_nothing() {
        let n = 24;
        let s = scenario(vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.1; n]);
        let params = EmsParams {
            discharge_form: DischargeForm::Conventional,
            terminal_soc: true,
            ..EmsParams::default()
        };
        let sol = solve_ems(&s, &vec![0.0; n], &params, &MilpOptions::exact()).unwrap();
        assert!(sol.cost.abs() < 1e-9);
        for t in 0..n {
            for f in [sol.p_g[t], sol.p_s[t], sol.p_bplus[t], sol.p_bminus[t], sol.p_rbe[t]] {
                assert!(f.abs() < 1e-9, "step {t}: {f}");
            }
        }
    }

    #[test]
    fn zero_braking_energy_stays_unused() {
        let n = 24;
        let price: Vec<f64> = (0..n).map(|t| 0.05 + 0.01 * (t % 7) as f64).collect();
        let s = scenario(vec![200.0; n], vec![0.0; n], vec![0.0; n], price);
        let sol = solve_ems(&s, &vec![0.0; n], &EmsParams::default(), &MilpOptions::exact()).unwrap();
        assert!(sol.p_rbe.iter().all(|&p| p == 0.0));
        assert!(sol.cost <= baseline_cost(&s, &vec![0.0; n]).unwrap() + 1e-6);
    }

    #[test]
    fn overload_reports_step() {
        let s = scenario(vec![100.0, 30_000.0], vec![0.0; 2], vec![0.0; 2], vec![0.1; 2]);
        match solve_ems(&s, &[0.0, 0.0], &no_ess(), &MilpOptions::exact()).unwrap_err() {
            EmsError::Infeasible { step, .. } => assert_eq!(step, Some(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn misaligned_profile_is_rejected() {
        let s = scenario(vec![1.0; 24], vec![0.0; 24], vec![0.0; 24], vec![0.1; 24]);
        assert!(matches!(
            solve_ems(&s, &[0.0; 23], &EmsParams::default(), &MilpOptions::exact()),
            Err(EmsError::LengthMismatch { expected: 24, found: 23 })
        ));
    }
}

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::ev::ChargingMode;
use crate::scenario::{write_series_csv, Scenario, VehicleKind};

use super::{summarize, Experiment, PipelineError, Report, ScenarioResult};

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Export {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), PipelineError> {
    fs::write(path, contents).map_err(io_error(path))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn scenario_dir(root: &Path, id: usize) -> Result<std::path::PathBuf, PipelineError> {
    let dir = root.join(id.to_string());
    fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    Ok(dir)
}

fn mode_name(mode: ChargingMode) -> &'static str {
    match mode {
        ChargingMode::Optimized => "optimized",
        ChargingMode::Uncoordinated => "uncoordinated",
    }
}

/// Writes `report.json`, `summary.txt`, `peaks.csv` and the per-scenario
/// directories. All of them are reproducible byte for byte.
pub fn write_experiment(experiment: &Experiment, dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let report = &experiment.report;
    write(&dir.join("report.json"), &(report.to_json() + "\n"))?;
    write(&dir.join("summary.txt"), &summarize(report))?;

    let mut peaks = String::from("scenario,uncoordinated_kw,optimized_kw,saving_pct\n");
    for r in &report.scenarios {
        let _ = writeln!(
            peaks,
            "{},{},{},{}",
            r.scenario,
            cell(r.uncoordinated_peak_kw),
            cell(r.optimized_peak_kw),
            cell(r.peak_saving_pct)
        );
    }
    write(&dir.join("peaks.csv"), &peaks)?;

    for r in &experiment.results {
        write_scenario_outputs(r, dir)?;
    }
    Ok(())
}

/// Writes `scenario,generate_s,charging_s,dispatch_s` wall-clock times.
pub fn write_timings(report: &Report, path: &Path) -> Result<(), PipelineError> {
    let mut out = String::from("scenario,generate_s,charging_s,dispatch_s\n");
    for (r, t) in report.scenarios.iter().zip(&report.timings) {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{:.6}",
            r.scenario, t.generate_s, t.charging_s, t.dispatch_s
        );
    }
    write(path, &out)
}

/// Writes the charging profiles (`charging_<mode>.csv` per vehicle,
/// `ev_<mode>.csv` aggregate) and the case 1 `dispatch.csv` of one scenario
/// under `dir/<id>/`.
pub fn write_scenario_outputs(result: &ScenarioResult, dir: &Path) -> Result<(), PipelineError> {
    let dir = scenario_dir(dir, result.scenario.id)?;
    for profile in [&result.optimized, &result.uncoordinated].into_iter().flatten() {
        let name = mode_name(profile.mode);
        let path = dir.join(format!("charging_{name}.csv"));
        profile.write_vehicle_csv(&path).map_err(io_error(&path))?;
        let path = dir.join(format!("ev_{name}.csv"));
        profile.write_aggregate_csv(&path).map_err(io_error(&path))?;
    }
    if let Some(d) = &result.dispatch {
        let path = dir.join("dispatch.csv");
        d.write_csv(&path).map_err(io_error(&path))?;
    }
    Ok(())
}

/// Writes the exogenous series (`series.csv`) and EV sessions
/// (`sessions.csv`) of a scenario under `dir/<id>/`.
pub fn write_scenario_inputs(scenario: &Scenario, dir: &Path) -> Result<(), PipelineError> {
    let dir = scenario_dir(dir, scenario.id)?;
    let path = dir.join("series.csv");
    write_series_csv(
        &path,
        &["demand_kw", "rbe_kw", "radiation_w_m2", "pv_kw", "buy_eur_kwh", "sell_eur_kwh"],
        &[
            &scenario.demand_kw,
            &scenario.rbe_kw,
            &scenario.radiation_w_m2,
            &scenario.pv_kw,
            &scenario.buy_price,
            &scenario.sell_price,
        ],
    )
    .map_err(|e| PipelineError::Export {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;

    let mut out =
        String::from("id,kind,arrival_step,departure_step,demand_kwh,nominal_kw,max_kw,efficiency\n");
    for s in &scenario.sessions {
        let kind = match s.kind {
            VehicleKind::Car => "car",
            VehicleKind::Bus => "bus",
        };
        let _ = writeln!(
            out,
            "{},{kind},{},{},{},{},{},{}",
            s.id, s.arrival, s.departure, s.demand_kwh, s.nominal_kw, s.max_kw, s.efficiency
        );
    }
    write(&dir.join("sessions.csv"), &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{run_experiment, ExperimentConfig};

    fn read(dir: &Path, name: &str) -> String {
        fs::read_to_string(dir.join(name)).unwrap()
    }

    #[test]
    fn output_tree_layout() {
        let config = ExperimentConfig {
            scenarios: 2,
            seed: 11,
            ..ExperimentConfig::default()
        };
        let e = run_experiment(&config).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        write_experiment(&e, tmp.path()).unwrap();
        let peaks = read(tmp.path(), "peaks.csv");
        assert_eq!(peaks.lines().next(), Some("scenario,uncoordinated_kw,optimized_kw,saving_pct"));
        assert_eq!(peaks.lines().count(), 3);
        for id in ["0", "1"] {
            let d = tmp.path().join(id);
            for f in ["charging_optimized.csv", "ev_optimized.csv", "charging_uncoordinated.csv", "ev_uncoordinated.csv"] {
                assert!(d.join(f).is_file(), "{id}/{f}");
            }
            assert_eq!(
                read(&d, "dispatch.csv").lines().next(),
                Some("step,p_g,p_s,p_bplus,p_bminus,p_rbe,soc_b,u_g,u_b")
            );
            assert_eq!(read(&d, "ev_optimized.csv").lines().count(), 145);
        }
        let report: serde_json::Value = serde_json::from_str(&read(tmp.path(), "report.json")).unwrap();
        assert_eq!(report["config"]["seed"], 11);
        assert!(report["scenarios"][0].get("milp_gap").is_some());
        assert!(read(tmp.path(), "summary.txt").contains("Case 2"));
    }

    #[test]
    fn scenario_inputs_layout() {
        let config = ExperimentConfig::default().scenario_config();
        let s = crate::scenario::generate_scenario(&config, 5, 0, 1).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        write_scenario_inputs(&s, tmp.path()).unwrap();
        let d = tmp.path().join("0");
        let series = read(&d, "series.csv");
        assert_eq!(series.lines().count(), 145);
        assert!(series.starts_with("step,demand_kw,rbe_kw,radiation_w_m2,pv_kw,buy_eur_kwh,sell_eur_kwh\n"));
        assert_eq!(read(&d, "sessions.csv").lines().count(), s.sessions.len() + 1);
    }
}

use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::solver::MilpStatus;

use super::ExperimentConfig;

/// `(reference - value) / reference` in percent; `None` unless the reference
/// is positive.
pub fn percent_saving(value: f64, reference: f64) -> Option<f64> {
    (reference > 0.0).then(|| (reference - value) / reference * 100.0)
}

/// Per-scenario results. Fields of stages that were not run are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub scenario: usize,
    pub probability: f64,
    pub ev_sessions: usize,
    pub optimized_peak_kw: Option<f64>,
    pub uncoordinated_peak_kw: Option<f64>,
    pub peak_saving_pct: Option<f64>,
    /// Receding-horizon LPs solved in the optimized policy.
    pub lp_solves: Option<usize>,
    pub case1_cost: Option<f64>,
    pub case2_cost: Option<f64>,
    pub saving_pct: Option<f64>,
    pub milp_status: Option<MilpStatus>,
    pub milp_gap: Option<f64>,
    pub milp_nodes: Option<usize>,
}

impl ScenarioRow {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            scenario: scenario.id,
            probability: scenario.probability,
            ev_sessions: scenario.sessions.len(),
            optimized_peak_kw: None,
            uncoordinated_peak_kw: None,
            peak_saving_pct: None,
            lp_solves: None,
            case1_cost: None,
            case2_cost: None,
            saving_pct: None,
            milp_status: None,
            milp_gap: None,
            milp_nodes: None,
        }
    }

    pub fn set_peaks(&mut self, optimized: Option<f64>, uncoordinated: Option<f64>) {
        self.optimized_peak_kw = optimized;
        self.uncoordinated_peak_kw = uncoordinated;
        self.peak_saving_pct = match (optimized, uncoordinated) {
            (Some(o), Some(u)) => percent_saving(o, u),
            _ => None,
        };
    }
}

/// Wall-clock seconds per stage. Kept out of `report.json` so that reports
/// are reproducible byte for byte.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Timings {
    pub generate_s: f64,
    pub charging_s: f64,
    pub dispatch_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregates {
    pub expected_cost_case1: Option<f64>,
    pub expected_cost_case2: Option<f64>,
    pub saving_pct: Option<f64>,
    pub mean_peak_saving_pct: Option<f64>,
    pub max_peak_saving_pct: Option<f64>,
    pub max_milp_gap: Option<f64>,
    /// Scenarios whose dispatch stopped at a limit above the gap target.
    pub scenarios_over_gap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// The configuration that produced the report, without the output path.
    pub config: ExperimentConfig,
    pub scenarios: Vec<ScenarioRow>,
    pub aggregates: Aggregates,
    #[serde(skip)]
    pub timings: Vec<Timings>,
}

/// Probability-weighted sum of a per-row value, if every row has it.
fn expectation(rows: &[ScenarioRow], f: impl Fn(&ScenarioRow) -> Option<f64>) -> Option<f64> {
    if rows.is_empty() {
        return None;
    }
    rows.iter()
        .map(|r| f(r).map(|v| v * r.probability))
        .sum::<Option<f64>>()
}

impl Report {
    pub fn new(config: &ExperimentConfig, rows: Vec<ScenarioRow>, timings: Vec<Timings>) -> Self {
        let config = ExperimentConfig {
            out_dir: None,
            ..config.clone()
        };
        let expected_cost_case1 = expectation(&rows, |r| r.case1_cost);
        let expected_cost_case2 = expectation(&rows, |r| r.case2_cost);
        let peak_savings: Vec<f64> = rows.iter().filter_map(|r| r.peak_saving_pct).collect();
        let gaps: Vec<f64> = rows.iter().filter_map(|r| r.milp_gap).collect();
        let aggregates = Aggregates {
            expected_cost_case1,
            expected_cost_case2,
            saving_pct: match (expected_cost_case1, expected_cost_case2) {
                (Some(c1), Some(c2)) => percent_saving(c1, c2),
                _ => None,
            },
            mean_peak_saving_pct: (!peak_savings.is_empty())
                .then(|| peak_savings.iter().sum::<f64>() / peak_savings.len() as f64),
            max_peak_saving_pct: peak_savings.iter().copied().reduce(f64::max),
            max_milp_gap: gaps.iter().copied().reduce(f64::max),
            scenarios_over_gap: rows
                .iter()
                .filter(|r| r.milp_status == Some(MilpStatus::FeasibleGap))
                .count(),
        };
        Self {
            config,
            scenarios: rows,
            aggregates,
            timings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn money(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// Two-row cost comparison (case 1 with storage and PV, case 2 without),
/// followed by the charging peak comparison.
pub fn summarize(report: &Report) -> String {
    let a = &report.aggregates;
    let saving = match (a.expected_cost_case1, a.expected_cost_case2) {
        (Some(_), Some(_)) => a.saving_pct.map_or_else(|| "n/a".to_string(), |s| format!("{s:.2}")),
        _ => "-".to_string(),
    };
    let header = ["Case", "ESS", "PV", "Total Operating Costs (€)", "Cost Savings (%)"];
    let rows = [
        ["Case 1".to_string(), "✓".into(), "✓".into(), money(a.expected_cost_case1), saving],
        ["Case 2".to_string(), "✗".into(), "✗".into(), money(a.expected_cost_case2), String::new()],
    ];
    let width = |i: usize| {
        rows.iter()
            .map(|r| r[i].chars().count())
            .chain([header[i].chars().count()])
            .max()
            .unwrap_or(0)
    };
    let widths: Vec<usize> = (0..header.len()).map(width).collect();
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };

    let mut out = format!(
        "Scenarios: {} (seed {})\n\n",
        report.scenarios.len(),
        report.config.seed
    );
    out.push_str(&line(header.to_vec()));
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in &rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    if let (Some(mean), Some(max)) = (a.mean_peak_saving_pct, a.max_peak_saving_pct) {
        out.push_str(&format!(
            "\nEV charging peak, optimized vs uncoordinated: mean saving {mean:.2}%, max saving {max:.2}%\n"
        ));
    }
    if let Some(gap) = a.max_milp_gap {
        out.push_str(&format!(
            "Dispatch MILP: largest final gap {:.3}%, {} scenario(s) above the {:.3}% target\n",
            gap * 100.0,
            a.scenarios_over_gap,
            report.config.solver.gap * 100.0
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report_with(c1: f64, c2: f64) -> Report {
        let row = ScenarioRow {
            case1_cost: Some(c1),
            case2_cost: Some(c2),
            saving_pct: percent_saving(c1, c2),
            ..ScenarioRow {
                scenario: 0,
                probability: 1.0,
                ev_sessions: 0,
                optimized_peak_kw: None,
                uncoordinated_peak_kw: None,
                peak_saving_pct: None,
                lp_solves: None,
                case1_cost: None,
                case2_cost: None,
                saving_pct: None,
                milp_status: None,
                milp_gap: None,
                milp_nodes: None,
            }
        };
        Report::new(&ExperimentConfig::default(), vec![row], vec![])
    }

    fn saving_cell(text: &str) -> String {
        let line = text.lines().find(|l| l.starts_with("| Case 1")).unwrap();
        line.split('|').nth(5).unwrap().trim().to_string()
    }

    #[test]
    fn table_savings_formatting() {
        let s = summarize(&report_with(3316.09, 4009.09));
        assert_eq!(saving_cell(&s), "17.29");
        assert!(s.contains("3316.09") && s.contains("4009.09"));
        assert_eq!(saving_cell(&summarize(&report_with(100.0, 100.0))), "0.00");
        assert_eq!(saving_cell(&summarize(&report_with(0.0, 0.0))), "n/a");
    }

    #[test]
    fn expected_costs_are_probability_weighted() {
        let mut a = report_with(10.0, 20.0).scenarios[0].clone();
        let mut b = a.clone();
        a.probability = 0.5;
        b.probability = 0.5;
        b.case1_cost = Some(30.0);
        b.case2_cost = Some(40.0);
        let r = Report::new(&ExperimentConfig::default(), vec![a, b], vec![]);
        assert!((r.aggregates.expected_cost_case1.unwrap() - 20.0).abs() < 1e-12);
        assert!((r.aggregates.expected_cost_case2.unwrap() - 30.0).abs() < 1e-12);
        assert!((r.aggregates.saving_pct.unwrap() - 100.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn peak_saving_guard() {
        assert_eq!(percent_saving(5.0, 0.0), None);
        assert_eq!(percent_saving(0.0, 0.0), None);
        assert!((percent_saving(80.0, 100.0).unwrap() - 20.0).abs() < 1e-12);
    }
}

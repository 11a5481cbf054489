//! Run outputs: `report.json`, `trace_node<k>.csv` per node and
//! `schedule.csv`.

use std::path::Path;

use prosumer_core::metrics::tce;
use prosumer_core::simulation::SimulationResult;
use serde::{Deserialize, Serialize};

use crate::scenario_file::ScenarioFile;
use crate::CliError;

pub const TRACE_HEADER: &str = "minute,U,p_inv,q_inv,p_curt,p_b,b";
pub const SCHEDULE_HEADER: &str = "step,x_day_ahead,y_day_ahead,x_realized,y_realized";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: ScenarioFile,
    /// SHA-256 of the scenario text and its series files.
    pub scenario_hash: String,
    pub policy: String,
    pub active_node: usize,
    /// Present for sweep points.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepReport>,
    pub metrics: MetricsReport,
    pub nodes: Vec<NodeReport>,
    pub timing: TimingReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cost_wic: f64,
    pub cost_inv: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lcg_abs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lcg_pct: Option<f64>,
    pub tce: f64,
    pub vci: [usize; 4],
    pub cvc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub node: usize,
    pub vci: [usize; 4],
    pub cvc: f64,
    pub tce: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub arbitrage_total_s: f64,
    pub powerflow_total_s: f64,
    pub inner_loop_total_s: f64,
    pub wall_s: f64,
}

impl Report {
    pub fn new(scenario: ScenarioFile, scenario_hash: String, res: &SimulationResult<f64>, sweep: Option<SweepReport>) -> Self {
        let h_fast = scenario.timegrid.h / scenario.timegrid.inner_per_outer as f64;
        let m = &res.metrics;
        let nodes = res
            .voltage
            .iter()
            .zip(&res.traces)
            .enumerate()
            .map(|(k, (v, tr))| NodeReport {
                node: k + 1,
                vci: v.vci,
                cvc: v.cvc,
                tce: tce(&tr.p_curt, h_fast),
            })
            .collect();
        let t = res.timing;
        Self {
            scenario,
            scenario_hash,
            policy: res.policy.to_string(),
            active_node: res.active_node,
            sweep,
            metrics: MetricsReport {
                cost_wic: m.cost_wic,
                cost_inv: m.cost_inv,
                lcg_abs: m.lcg_abs,
                lcg_pct: m.lcg_pct,
                tce: m.tce,
                vci: m.vci,
                cvc: m.cvc,
            },
            nodes,
            timing: TimingReport {
                arbitrage_total_s: t.arbitrage_total_s,
                powerflow_total_s: t.powerflow_total_s,
                inner_loop_total_s: t.inner_loop_total_s,
                wall_s: t.wall_s,
            },
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("report: {e}")))
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn trace_csv(res: &SimulationResult<f64>, node: usize) -> String {
    let tr = &res.traces[node - 1];
    let mut out = String::with_capacity(64 * tr.len());
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for k in 0..tr.len() {
        out.push_str(&format!(
            "{k},{},{},{},{},{},{}\n",
            tr.u[k], tr.p_inv[k], tr.q_inv[k], tr.p_curt[k], tr.p_b[k], tr.b[k]
        ));
    }
    out
}

/// Day-ahead plan next to what was executed. Realised `x` is the change in
/// stored energy over each slow step.
pub fn schedule_csv(res: &SimulationResult<f64>, b_0: f64) -> String {
    let tr = res.active_trace();
    let n = res.realized_y.len();
    let m = tr.len() / n.max(1);
    let mut out = String::new();
    out.push_str(SCHEDULE_HEADER);
    out.push('\n');
    let mut b_prev = b_0;
    for i in 0..n {
        let b_end = tr.b[(i + 1) * m - 1];
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            res.day_ahead.x[i],
            res.day_ahead.y[i],
            b_end - b_prev,
            res.realized_y[i]
        ));
        b_prev = b_end;
    }
    out
}

/// Write every output of one run into `dir`, creating it if needed.
pub fn write_run(dir: &Path, report: &Report, res: &SimulationResult<f64>, b_0: f64) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    write_file(&dir.join("report.json"), &report.to_json()?)?;
    for node in 1..=res.traces.len() {
        write_file(&dir.join(format!("trace_node{node}.csv")), &trace_csv(res, node))?;
    }
    write_file(&dir.join("schedule.csv"), &schedule_csv(res, b_0))
}

//! TOML scenario description.
//!
//! ```toml
//! seed = 1
//! policy = "prc"
//! active_node = 4
//!
//! [timegrid]
//! steps = 96
//! h = 0.25
//! inner_per_outer = 15
//!
//! [feeder]
//! nodes = 4
//! v_base = 230.0
//! s_base = 10.0
//! slack_voltage = 1.02
//! branches = [{ from = 1, to = 2, r_ohm = 0.0922, x_ohm = 0.047 }, ...]
//!
//! [feeder.rules]
//! u_min = 0.92
//! u_max = 1.08
//! delta_perm = 0.04
//!
//! [[prosumers]]
//! node = 2
//! series = "series/day.csv"     # relative to this file
//! battery = { capacity_kwh = 2.0, charge_c = 0.5, discharge_c = 0.5, eta_ch = 0.95, eta_dis = 0.95 }
//! flexibility = {}              # k and epsilon are optional
//! inverter = { s_max_kva = 3.0, pf = 0.9 }
//! ```

use std::path::{Path, PathBuf};

use prosumer_core::inverter::{Policy, VoltageRuleParams};
use prosumer_core::model::{BatterySpec, FlexibilitySpec, InverterSpec, PriceSeries, ScenarioSeries, TimeGrid};
use prosumer_core::powerflow::{Branch, FeederModel};
use prosumer_core::simulation::{Prosumer, Scenario};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::series_file::SeriesFile;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    pub policy: String,
    pub active_node: usize,
    pub timegrid: TimeGridSection,
    pub feeder: FeederSection,
    pub prosumers: Vec<ProsumerSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSection {
    pub steps: usize,
    pub h: f64,
    pub inner_per_outer: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederSection {
    pub nodes: usize,
    pub v_base: f64,
    pub s_base: f64,
    pub slack_voltage: f64,
    pub branches: Vec<BranchSection>,
    pub rules: RulesSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSection {
    pub from: usize,
    pub to: usize,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesSection {
    pub u_min: f64,
    pub u_max: f64,
    pub delta_perm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProsumerSection {
    pub node: usize,
    pub series: String,
    pub battery: BatterySection,
    #[serde(default)]
    pub flexibility: FlexibilitySection,
    pub inverter: InverterSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySection {
    pub capacity_kwh: f64,
    pub charge_c: f64,
    pub discharge_c: f64,
    pub eta_ch: f64,
    pub eta_dis: f64,
    /// Defaults to half the capacity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_kwh: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexibilitySection {
    /// Flexible energy target (kWh); defaults to the envelope midpoint energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverterSection {
    pub s_max_kva: f64,
    /// Defaults to the apparent rating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max_kw: Option<f64>,
    pub pf: f64,
}

/// A scenario file together with the series it references.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedScenario {
    pub file: ScenarioFile,
    /// Directory series paths are resolved against.
    pub base_dir: PathBuf,
    /// Series per prosumer section, in file order.
    pub series: Vec<SeriesFile>,
    /// Raw bytes of each series file, for hashing.
    pub series_bytes: Vec<Vec<u8>>,
}

pub fn parse_policy(s: &str) -> Result<Policy, CliError> {
    s.parse().map_err(CliError::Validation)
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("scenario: {e}")))
    }

    pub fn emit(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Io(format!("cannot serialise scenario: {e}")))
    }

    /// Schema-level checks that need no series data.
    pub fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        parse_policy(&self.policy)?;
        let mut seen = vec![false; self.feeder.nodes + 1];
        for p in &self.prosumers {
            if p.node < 2 || p.node > self.feeder.nodes {
                return bad(format!("household at node {} (load nodes are 2..={})", p.node, self.feeder.nodes));
            }
            if std::mem::replace(&mut seen[p.node], true) {
                return bad(format!("node {} has two households", p.node));
            }
        }
        if !self.prosumers.iter().any(|p| p.node == self.active_node) {
            return bad(format!("active node {} has no household", self.active_node));
        }
        Ok(())
    }

    /// Read `path` and every series file it references.
    pub fn load(path: &Path) -> Result<LoadedScenario, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read scenario {}: {e}", path.display())))?;
        let file = Self::parse(&text)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        file.with_series_from(&base_dir)
    }

    pub fn with_series_from(self, base_dir: &Path) -> Result<LoadedScenario, CliError> {
        self.check()?;
        let mut series = Vec::with_capacity(self.prosumers.len());
        let mut series_bytes = Vec::with_capacity(self.prosumers.len());
        for p in &self.prosumers {
            let path = base_dir.join(&p.series);
            let bytes = std::fs::read(&path)
                .map_err(|e| CliError::Validation(format!("cannot read series {}: {e}", path.display())))?;
            let s = SeriesFile::read_from(&bytes[..]).map_err(|e| match e {
                CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
                other => other,
            })?;
            if s.len() != self.timegrid.steps {
                return Err(CliError::Validation(format!(
                    "{} has {} rows, the time grid has {} steps",
                    path.display(),
                    s.len(),
                    self.timegrid.steps
                )));
            }
            series.push(s);
            series_bytes.push(bytes);
        }
        Ok(LoadedScenario {
            file: self,
            base_dir: base_dir.to_path_buf(),
            series,
            series_bytes,
        })
    }
}

impl LoadedScenario {
    /// SHA-256 over the emitted scenario text and the series bytes.
    pub fn hash(&self) -> Result<String, CliError> {
        let mut h = Sha256::new();
        h.update(self.file.emit()?.as_bytes());
        for bytes in &self.series_bytes {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }

    /// Build and validate the simulation scenario.
    pub fn to_scenario(&self) -> Result<Scenario<f64>, CliError> {
        let f = &self.file;
        let tg = &f.timegrid;
        let grid = TimeGrid::new(tg.steps, tg.h, tg.inner_per_outer).map_err(|e| CliError::Validation(e.to_string()))?;
        let feeder = FeederModel {
            nodes: f.feeder.nodes,
            branches: f
                .feeder
                .branches
                .iter()
                .map(|b| Branch { from: b.from, to: b.to, r_ohm: b.r_ohm, x_ohm: b.x_ohm })
                .collect(),
            v_base: f.feeder.v_base,
            s_base: f.feeder.s_base,
            slack_voltage: f.feeder.slack_voltage,
        };
        let mut prosumers = vec![None; f.feeder.nodes];
        for (p, s) in f.prosumers.iter().zip(&self.series) {
            let b = &p.battery;
            let mut battery = BatterySpec::from_c_rates(b.capacity_kwh, b.charge_c, b.discharge_c, b.eta_ch, b.eta_dis);
            battery.b_0 = b.initial_kwh.unwrap_or(b.capacity_kwh / 2.0);
            let y_min = s.column(|r| r.y_min);
            let y_max = s.column(|r| r.y_max);
            let k = p
                .flexibility
                .k
                .unwrap_or_else(|| tg.h * y_min.iter().zip(&y_max).map(|(a, b)| (a + b) / 2.0).sum::<f64>());
            let flex = FlexibilitySpec {
                y_min,
                y_max,
                k,
                epsilon: p.flexibility.epsilon.unwrap_or_else(|| FlexibilitySpec::default_epsilon(k)),
            };
            let mut inverter = InverterSpec::new(p.inverter.s_max_kva, p.inverter.pf);
            if let Some(pm) = p.inverter.p_max_kw {
                inverter.p_max = pm;
            }
            let series = ScenarioSeries {
                d: s.column(|r| r.d),
                r: s.column(|r| r.r),
                prices: PriceSeries {
                    buy: s.column(|r| r.p_b),
                    sell: s.column(|r| r.p_s),
                },
            };
            prosumers[p.node - 1] = Some(Prosumer { series, battery, flex, inverter });
        }
        let rules = &f.feeder.rules;
        let scn = Scenario {
            feeder,
            prosumers,
            active_node: f.active_node,
            policy: parse_policy(&f.policy)?,
            rules: VoltageRuleParams { u_min: rules.u_min, u_max: rules.u_max, delta_perm: rules.delta_perm },
            grid,
            rng_seed: f.seed,
        };
        scn.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(scn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> ScenarioFile {
        ScenarioFile {
            seed: 7,
            policy: "anrc".into(),
            active_node: 3,
            timegrid: TimeGridSection { steps: 4, h: 0.25, inner_per_outer: 15 },
            feeder: FeederSection {
                nodes: 3,
                v_base: 230.0,
                s_base: 10.0,
                slack_voltage: 1.01,
                branches: vec![
                    BranchSection { from: 1, to: 2, r_ohm: 0.1, x_ohm: 0.05 },
                    BranchSection { from: 2, to: 3, r_ohm: 0.2, x_ohm: 0.1 },
                ],
                rules: RulesSection { u_min: 0.92, u_max: 1.08, delta_perm: 0.04 },
            },
            prosumers: vec![ProsumerSection {
                node: 3,
                series: "s.csv".into(),
                battery: BatterySection {
                    capacity_kwh: 2.0,
                    charge_c: 0.5,
                    discharge_c: 0.5,
                    eta_ch: 0.95,
                    eta_dis: 0.9,
                    initial_kwh: Some(0.3),
                },
                flexibility: FlexibilitySection { k: None, epsilon: Some(1e-3) },
                inverter: InverterSection { s_max_kva: 3.0, p_max_kw: None, pf: 0.9 },
            }],
        }
    }

    #[test]
    fn emit_then_parse_is_identity() {
        let f = sample();
        let text = f.emit().unwrap();
        assert_eq!(ScenarioFile::parse(&text).unwrap(), f);
    }

    #[test]
    fn unknown_fields_and_bad_policies_are_rejected() {
        let text = sample().emit().unwrap().replace("seed = 7", "seed = 7\ncolour = \"red\"");
        assert!(ScenarioFile::parse(&text).is_err());
        let mut f = sample();
        f.policy = "droop".into();
        assert!(f.check().is_err());
        let mut f = sample();
        f.active_node = 2;
        assert!(f.check().is_err());
    }
}

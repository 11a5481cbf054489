//! Ready-made scenarios on the four-node house feeder.

use crate::inverter::{Policy, VoltageRuleParams};
use crate::model::{BatterySpec, FlexibilitySpec, InverterSpec, PriceSeries, ScenarioSeries, TimeGrid};
use crate::powerflow::FeederModel;
use crate::simulation::{Prosumer, Scenario};
use crate::synthetic::{residential_day, ResidentialProfile, SyntheticDay};

/// Knobs of the three-household feeder study.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub profile: ResidentialProfile,
    pub seed: u64,
    pub v_base: f64,
    pub s_base: f64,
    pub slack_voltage: f64,
    pub battery_kwh: f64,
    pub c_rate: f64,
    pub eta: f64,
    pub inverter_kva: f64,
    pub pf: f64,
    pub active_node: usize,
    pub policy: Policy,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            profile: ResidentialProfile::default(),
            seed: 1,
            v_base: 230.0,
            s_base: 10.0,
            slack_voltage: 1.02,
            battery_kwh: 2.0,
            c_rate: 0.5,
            eta: 0.95,
            inverter_kva: 3.0,
            pf: 0.9,
            active_node: 4,
            policy: Policy::None,
        }
    }
}

/// Household built from a generated day. The energy target of the flexible
/// load is the envelope midpoint and the battery starts half full.
pub fn prosumer_from_day(day: &SyntheticDay, h: f64, battery: BatterySpec<f64>, inverter: InverterSpec<f64>) -> Prosumer<f64> {
    let k: f64 = h * day.y_min.iter().zip(&day.y_max).map(|(a, b)| (a + b) / 2.0).sum::<f64>();
    Prosumer {
        series: ScenarioSeries {
            d: day.d.clone(),
            r: day.r.clone(),
            prices: PriceSeries {
                buy: day.p_b.clone(),
                sell: day.p_s.clone(),
            },
        },
        battery: battery.with_initial((battery.b_min + battery.b_max) / 2.0),
        flex: FlexibilitySpec {
            y_min: day.y_min.clone(),
            y_max: day.y_max.clone(),
            k,
            epsilon: FlexibilitySpec::default_epsilon(k),
        },
        inverter,
    }
}

/// Three identical households at nodes 2, 3 and 4 of the house feeder.
pub fn feeder_study(cfg: &StudyConfig) -> Scenario<f64> {
    let mut feeder = FeederModel::default_feeder();
    feeder.v_base = cfg.v_base;
    feeder.s_base = cfg.s_base;
    feeder.slack_voltage = cfg.slack_voltage;
    let h = cfg.profile.h;
    let steps_per_hour = (1.0 / h).round() as usize;
    let grid = TimeGrid::new(cfg.profile.steps, h, 60 / steps_per_hour.max(1))
        .expect("profile step must divide an hour into whole minutes");
    let day = residential_day(&cfg.profile, cfg.seed, 0);
    let battery = BatterySpec::from_c_rates(cfg.battery_kwh, cfg.c_rate, cfg.c_rate, cfg.eta, cfg.eta);
    let inverter = InverterSpec::new(cfg.inverter_kva, cfg.pf);
    let house = prosumer_from_day(&day, h, battery, inverter);
    Scenario {
        feeder,
        prosumers: vec![None, Some(house.clone()), Some(house.clone()), Some(house)],
        active_node: cfg.active_node,
        policy: cfg.policy,
        rules: VoltageRuleParams::default(),
        grid,
        rng_seed: cfg.seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn study_is_valid() {
        let scn = feeder_study(&StudyConfig::default());
        scn.validate().unwrap();
        assert_eq!(scn.grid.total_inner_steps(), 1440);
    }
}

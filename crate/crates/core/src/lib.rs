//! Prosumer energy arbitrage under voltage-dependent inverter rules.
//!
//! A household with PV, a battery and flexible load schedules its energy on
//! a 15-minute grid with a linear program, then an inverter controller
//! follows that plan minute by minute while respecting voltage-dependent
//! active/reactive power windows measured on a radial feeder.
//!
//! Everything numerical is generic over [`Scalar`] (`f64` or `f32`). The
//! aliases at the crate root fix the scalar to `f64`; [`single`] has the
//! `f32` versions.

pub mod arbitrage;
pub mod inverter;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod num;
pub mod powerflow;
pub mod scenarios;
pub mod simulation;
pub mod synthetic;

pub use inverter::{Policy, Zone};
pub use num::Scalar;

pub type DenseMatrix = lp::DenseMatrix<f64>;
pub type StandardLp = lp::StandardLp<f64>;
pub type LpSolution = lp::LpSolution<f64>;
pub type TimeGrid = model::TimeGrid<f64>;
pub type BatterySpec = model::BatterySpec<f64>;
pub type FlexibilitySpec = model::FlexibilitySpec<f64>;
pub type PriceSeries = model::PriceSeries<f64>;
pub type ScenarioSeries = model::ScenarioSeries<f64>;
pub type InverterSpec = model::InverterSpec<f64>;
pub type ArbitrageInputs = arbitrage::ArbitrageInputs<f64>;
pub type Schedule = arbitrage::Schedule<f64>;
pub type VoltageRuleParams = inverter::VoltageRuleParams<f64>;
pub type Envelope = inverter::Envelope<f64>;
pub type DispatchResult = inverter::DispatchResult<f64>;
pub type FeederModel = powerflow::FeederModel<f64>;
pub type NodalInjection = powerflow::NodalInjection<f64>;
pub type VoltageSolution = powerflow::VoltageSolution<f64>;
pub type MetricsBundle = metrics::MetricsBundle<f64>;
pub type Prosumer = simulation::Prosumer<f64>;
pub type Scenario = simulation::Scenario<f64>;
pub type SimulationResult = simulation::SimulationResult<f64>;

/// `f32` aliases.
pub mod single {
    pub type DenseMatrix = crate::lp::DenseMatrix<f32>;
    pub type StandardLp = crate::lp::StandardLp<f32>;
    pub type TimeGrid = crate::model::TimeGrid<f32>;
    pub type BatterySpec = crate::model::BatterySpec<f32>;
    pub type FlexibilitySpec = crate::model::FlexibilitySpec<f32>;
    pub type ScenarioSeries = crate::model::ScenarioSeries<f32>;
    pub type InverterSpec = crate::model::InverterSpec<f32>;
    pub type ArbitrageInputs = crate::arbitrage::ArbitrageInputs<f32>;
    pub type Schedule = crate::arbitrage::Schedule<f32>;
    pub type VoltageRuleParams = crate::inverter::VoltageRuleParams<f32>;
    pub type FeederModel = crate::powerflow::FeederModel<f32>;
    pub type Scenario = crate::simulation::Scenario<f32>;
    pub type SimulationResult = crate::simulation::SimulationResult<f32>;
}

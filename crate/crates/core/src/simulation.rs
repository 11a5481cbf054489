//! Two-timescale day simulation: receding-horizon arbitrage on the slow
//! grid, per-minute voltage measurement and inverter control on the fast
//! grid.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::arbitrage::{solve_arbitrage, ArbitrageError, ArbitrageInputs, Schedule};
use crate::inverter::{inverter_control_step, step_envelope, Policy, VoltageRuleParams};
use crate::metrics::{cost_with_inverter_control, cost_without_inverter_control, cvc, lcg, tce, vci, MetricsBundle};
use crate::model::{
    battery_energy_from_power, battery_power_unchecked, BatterySpec, FlexibilitySpec, InverterSpec, ScenarioSeries,
    TimeGrid,
};
use crate::num::Scalar;
use crate::powerflow::{sweep_with_topology, FeederModel, NodalInjection, PowerFlowError};

/// Devices and profiles of one household.
#[derive(Clone, Debug, PartialEq)]
pub struct Prosumer<T> {
    pub series: ScenarioSeries<T>,
    pub battery: BatterySpec<T>,
    pub flex: FlexibilitySpec<T>,
    pub inverter: InverterSpec<T>,
}

impl<T: Scalar> Prosumer<T> {
    /// Flexible load a passive household draws: the envelope interpolated at
    /// the fraction that delivers the energy target.
    pub fn passive_flex(&self, h: T) -> Vec<T> {
        let f = &self.flex;
        let lo: T = f.y_min.iter().copied().sum::<T>() * h;
        let span: T = f.y_min.iter().zip(&f.y_max).map(|(&a, &b)| b - a).sum::<T>() * h;
        let lambda = if span > T::zero() {
            ((f.k - lo) / span).clamp_to(T::zero(), T::one())
        } else {
            T::zero()
        };
        f.y_min.iter().zip(&f.y_max).map(|(&a, &b)| a + lambda * (b - a)).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario<T> {
    pub feeder: FeederModel<T>,
    /// Household at each node; entry `k` is node `k + 1`. The slack has none.
    pub prosumers: Vec<Option<Prosumer<T>>>,
    /// Node (1-based) whose household optimises and runs inverter control.
    pub active_node: usize,
    pub policy: Policy,
    pub rules: VoltageRuleParams<T>,
    pub grid: TimeGrid<T>,
    /// Seed of the synthetic data the scenario was built from.
    pub rng_seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("arbitrage failed at slow step {step}: {source}")]
    Arbitrage { step: usize, source: ArbitrageError },
    #[error("power flow failed at minute {minute}: {source}")]
    PowerFlow { minute: usize, source: PowerFlowError },
}

impl SimError {
    /// Whether the failure lies in the inputs rather than in a numerical solve.
    pub fn is_validation(&self) -> bool {
        matches!(self, SimError::Invalid(_))
    }
}

impl<T: Scalar> Scenario<T> {
    pub fn active(&self) -> Result<&Prosumer<T>, SimError> {
        self.prosumers
            .get(self.active_node.wrapping_sub(1))
            .and_then(Option::as_ref)
            .ok_or_else(|| SimError::Invalid(format!("node {} has no household", self.active_node)))
    }

    pub fn active_mut(&mut self) -> Result<&mut Prosumer<T>, SimError> {
        let node = self.active_node;
        self.prosumers
            .get_mut(node.wrapping_sub(1))
            .and_then(Option::as_mut)
            .ok_or_else(|| SimError::Invalid(format!("node {node} has no household")))
    }

    /// Arbitrage problem of the active household over the whole day.
    pub fn arbitrage_inputs(&self) -> Result<ArbitrageInputs<T>, SimError> {
        let p = self.active()?;
        Ok(ArbitrageInputs {
            grid: self.grid,
            battery: p.battery,
            flex: p.flex.clone(),
            series: p.series.clone(),
        })
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |e: &dyn std::fmt::Display| SimError::Invalid(e.to_string());
        self.feeder.validate().map_err(|e| invalid(&e))?;
        self.grid.validate().map_err(|e| invalid(&e))?;
        self.rules.validate().map_err(|e| invalid(&e))?;
        if self.prosumers.len() != self.feeder.nodes {
            return Err(SimError::Invalid(format!(
                "{} household entries for {} nodes",
                self.prosumers.len(),
                self.feeder.nodes
            )));
        }
        if self.prosumers[0].is_some() {
            return Err(SimError::Invalid("the slack node cannot host a household".into()));
        }
        if self.active_node < 2 {
            return Err(SimError::Invalid(format!("active node {} is not a load node", self.active_node)));
        }
        let n = self.grid.n;
        for (k, p) in self.prosumers.iter().enumerate() {
            let Some(p) = p else { continue };
            let node = k + 1;
            let ctx = |e: &dyn std::fmt::Display| SimError::Invalid(format!("node {node}: {e}"));
            if p.series.len() != n || p.flex.len() != n {
                return Err(SimError::Invalid(format!(
                    "node {node}: series has {} steps, flexibility {}, time grid {n}",
                    p.series.len(),
                    p.flex.len()
                )));
            }
            p.series.validate().map_err(|e| ctx(&e))?;
            p.battery.validate().map_err(|e| ctx(&e))?;
            p.inverter.validate().map_err(|e| ctx(&e))?;
            p.flex.validate_envelope().map_err(|e| ctx(&e))?;
        }
        self.arbitrage_inputs()?
            .validate()
            .map_err(|e| SimError::Invalid(format!("node {}: {e}", self.active_node)))
    }
}

/// Fast-timescale traces of one node, one entry per minute.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeTrace<T> {
    /// Post-dispatch voltage magnitude (p.u.).
    pub u: Vec<T>,
    pub p_inv: Vec<T>,
    pub q_inv: Vec<T>,
    pub p_curt: Vec<T>,
    pub p_b: Vec<T>,
    /// Battery charge at the end of the minute (kWh).
    pub b: Vec<T>,
}

impl<T: Scalar> NodeTrace<T> {
    fn with_capacity(m: usize) -> Self {
        Self {
            u: Vec::with_capacity(m),
            p_inv: Vec::with_capacity(m),
            q_inv: Vec::with_capacity(m),
            p_curt: Vec::with_capacity(m),
            p_b: Vec::with_capacity(m),
            b: Vec::with_capacity(m),
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// Remaining-horizon plan computed at one slow step.
#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleSnapshot<T> {
    pub step: usize,
    pub x: Vec<T>,
    pub y: Vec<T>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timing {
    pub arbitrage_total_s: f64,
    pub powerflow_total_s: f64,
    pub inner_loop_total_s: f64,
    pub wall_s: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoltageIndices<T> {
    pub vci: [usize; 4],
    pub cvc: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationResult<T> {
    pub active_node: usize,
    pub policy: Policy,
    /// One trace per node (entry `k` is node `k + 1`).
    pub traces: Vec<NodeTrace<T>>,
    pub schedules: Vec<ScheduleSnapshot<T>>,
    /// The full-day plan made before the first step.
    pub day_ahead: Schedule<T>,
    /// Flexible load actually drawn in each slow step.
    pub realized_y: Vec<T>,
    /// Metrics of the active household.
    pub metrics: MetricsBundle<T>,
    /// Voltage indices of every node.
    pub voltage: Vec<VoltageIndices<T>>,
    pub timing: Timing,
}

impl<T: Scalar> SimulationResult<T> {
    pub fn active_trace(&self) -> &NodeTrace<T> {
        &self.traces[self.active_node - 1]
    }

    /// The result with wall-clock timings zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: Timing::default(),
            ..self.clone()
        }
    }
}

/// Simulate one day of `scn`.
pub fn run_day<T: Scalar>(scn: &Scenario<T>) -> Result<SimulationResult<T>, SimError> {
    let wall = Instant::now();
    scn.validate()?;
    let topo = scn.feeder.topology().map_err(|e| SimError::Invalid(e.to_string()))?;
    let base = scn.arbitrage_inputs()?;
    let active = scn.active()?;
    let grid = scn.grid;
    let (n, m, h, h_fast) = (grid.n, grid.inner_per_outer, grid.h, grid.h_fast);
    let nodes = scn.feeder.nodes;
    let a = scn.active_node - 1;

    // background households draw a fixed profile and leave the battery idle
    let passive: Vec<Option<Vec<T>>> = scn.prosumers.iter().map(|p| p.as_ref().map(|p| p.passive_flex(h))).collect();
    let mut traces: Vec<NodeTrace<T>> = (0..nodes).map(|_| NodeTrace::with_capacity(n * m)).collect();
    let mut schedules = Vec::with_capacity(n);
    let mut realized_y = Vec::with_capacity(n);
    let mut inj = NodalInjection::zeros(nodes);
    let mut timing = Timing::default();
    let (mut t_arb, mut t_pf, mut t_inner) = (Duration::ZERO, Duration::ZERO, Duration::ZERO);

    let battery = active.battery;
    let inv = active.inverter;
    let mut b = battery.b_0;
    let mut flex_used = T::zero();
    let mut day_ahead = None;
    let mut u_meas = None;

    for i in 0..n {
        let clock = Instant::now();
        let inp = base.remaining(i, b, flex_used);
        let plan = solve_arbitrage(&inp).map_err(|source| SimError::Arbitrage { step: i, source })?;
        t_arb += clock.elapsed();

        let (x_i, y_i) = (plan.x[0], plan.y[0]);
        let (d_i, r_i) = (active.series.d[i], active.series.r[i]);
        let zeta = battery_power_unchecked(x_i, &battery, h) - r_i;
        schedules.push(ScheduleSnapshot {
            step: i,
            x: plan.x.clone(),
            y: plan.y.clone(),
        });
        if i == 0 {
            day_ahead = Some(plan);
        }
        realized_y.push(y_i);
        flex_used += h * y_i;

        for (k, p) in scn.prosumers.iter().enumerate() {
            if let (Some(p), Some(y)) = (p, &passive[k]) {
                inj.p[k] = p.series.d[i] + y[i] - p.series.r[i];
                inj.q[k] = T::zero();
            }
        }

        for j in 0..m {
            let minute = i * m + j;
            let u = match u_meas {
                Some(u) => u,
                None => {
                    // first minute of the day: measure with the plan's output
                    inj.p[a] = d_i + y_i + zeta;
                    inj.q[a] = T::zero();
                    let clock = Instant::now();
                    let sol = sweep_with_topology(&scn.feeder, &topo, &inj)
                        .map_err(|source| SimError::PowerFlow { minute, source })?;
                    t_pf += clock.elapsed();
                    sol.magnitude[a]
                }
            };

            let clock = Instant::now();
            let env = step_envelope(scn.policy, u, &scn.rules, &inv, zeta);
            let out = inverter_control_step(zeta, r_i, b, &env, &battery, &inv, h_fast);
            b = (b + battery_energy_from_power(out.p_b, &battery, h_fast)).clamp_to(battery.b_min, battery.b_max);
            t_inner += clock.elapsed();

            inj.p[a] = d_i + y_i + out.p_inv;
            inj.q[a] = -out.q_inv;
            let clock = Instant::now();
            let sol =
                sweep_with_topology(&scn.feeder, &topo, &inj).map_err(|source| SimError::PowerFlow { minute, source })?;
            t_pf += clock.elapsed();
            u_meas = Some(sol.magnitude[a]);

            for (k, tr) in traces.iter_mut().enumerate() {
                tr.u.push(sol.magnitude[k]);
                if k == a {
                    tr.p_inv.push(out.p_inv);
                    tr.q_inv.push(out.q_inv);
                    tr.p_curt.push(out.p_curt);
                    tr.p_b.push(out.p_b);
                    tr.b.push(b);
                } else {
                    let (p_inv, b_k) = match &scn.prosumers[k] {
                        Some(p) => (-p.series.r[i], p.battery.b_0),
                        None => (T::zero(), T::zero()),
                    };
                    tr.p_inv.push(p_inv);
                    tr.q_inv.push(T::zero());
                    tr.p_curt.push(T::zero());
                    tr.p_b.push(T::zero());
                    tr.b.push(b_k);
                }
            }
        }
    }

    let day_ahead = day_ahead.ok_or_else(|| SimError::Invalid("empty time grid".into()))?;
    let tr = &traces[a];
    let cost_wic = cost_without_inverter_control(&day_ahead, &base);
    let cost_inv = cost_with_inverter_control(&tr.p_b, &tr.p_curt, &realized_y, &active.series, &grid);
    let (lcg_abs, lcg_pct) = match scn.policy {
        Policy::None => (None, None),
        _ => {
            let (abs, pct) = lcg(cost_inv, cost_wic);
            (Some(abs), Some(pct))
        }
    };
    let metrics = MetricsBundle {
        cost_wic,
        cost_inv,
        lcg_abs,
        lcg_pct,
        tce: tce(&tr.p_curt, h_fast),
        vci: vci(&tr.u, &scn.rules),
        cvc: cvc(&tr.u, &scn.rules),
    };
    let voltage = traces
        .iter()
        .map(|t| VoltageIndices {
            vci: vci(&t.u, &scn.rules),
            cvc: cvc(&t.u, &scn.rules),
        })
        .collect();

    timing.arbitrage_total_s = t_arb.as_secs_f64();
    timing.powerflow_total_s = t_pf.as_secs_f64();
    timing.inner_loop_total_s = t_inner.as_secs_f64();
    timing.wall_s = wall.elapsed().as_secs_f64();
    Ok(SimulationResult {
        active_node: scn.active_node,
        policy: scn.policy,
        traces,
        schedules,
        day_ahead,
        realized_y,
        metrics,
        voltage,
        timing,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepParam {
    /// Selling-to-buying price ratio for every household.
    Kappa,
    /// Apparent rating (kVA) of the active inverter.
    InverterKva,
    /// Flexible share of the active household's load, in percent.
    FlexPct,
    Node,
    Policy,
}

impl std::str::FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kappa" => Ok(SweepParam::Kappa),
            "inverter_kva" => Ok(SweepParam::InverterKva),
            "flex_pct" => Ok(SweepParam::FlexPct),
            "node" => Ok(SweepParam::Node),
            "policy" => Ok(SweepParam::Policy),
            other => Err(format!(
                "unknown sweep parameter '{other}' (expected kappa|inverter_kva|flex_pct|node|policy)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepValue<T> {
    Number(T),
    Node(usize),
    Policy(Policy),
}

impl<T: Scalar> std::fmt::Display for SweepValue<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Number(v) => write!(f, "{v}"),
            SweepValue::Node(v) => write!(f, "{v}"),
            SweepValue::Policy(p) => write!(f, "{p}"),
        }
    }
}

impl<T: Scalar> SweepValue<T> {
    /// Parse one sweep value for `param`.
    pub fn parse(param: SweepParam, s: &str) -> Result<Self, String> {
        let s = s.trim();
        match param {
            SweepParam::Node => s.parse().map(SweepValue::Node).map_err(|e| format!("node '{s}': {e}")),
            SweepParam::Policy => s.parse().map(SweepValue::Policy),
            _ => {
                let v: f64 = s.parse().map_err(|e| format!("value '{s}': {e}"))?;
                if !v.is_finite() {
                    return Err(format!("value '{s}' is not finite"));
                }
                Ok(SweepValue::Number(T::lit(v)))
            }
        }
    }
}

/// Scenario with one sweep value applied.
pub fn apply_sweep<T: Scalar>(base: &Scenario<T>, param: SweepParam, value: SweepValue<T>) -> Result<Scenario<T>, SimError> {
    let mut scn = base.clone();
    let bad = || SimError::Invalid(format!("value {value} does not fit parameter {param:?}"));
    match (param, value) {
        (SweepParam::Kappa, SweepValue::Number(k)) => {
            if !(k >= T::zero() && k <= T::one()) {
                return Err(SimError::Invalid(format!("kappa {k} outside [0, 1]")));
            }
            for p in scn.prosumers.iter_mut().flatten() {
                p.series.prices = p.series.prices.with_kappa(k);
            }
        }
        (SweepParam::InverterKva, SweepValue::Number(s)) => {
            if !(s > T::zero()) {
                return Err(SimError::Invalid(format!("inverter size {s} must be positive")));
            }
            let inv = &mut scn.active_mut()?.inverter;
            inv.s_max = s;
            inv.p_max = s;
        }
        (SweepParam::FlexPct, SweepValue::Number(pct)) => {
            if !(pct >= T::zero() && pct <= T::lit(100.0)) {
                return Err(SimError::Invalid(format!("flexibility {pct}% outside [0, 100]")));
            }
            let h = scn.grid.h;
            let p = scn.active_mut()?;
            let share = pct / T::lit(100.0);
            let n = p.series.len();
            let mut k = T::zero();
            for i in 0..n {
                let total = p.series.d[i] + (p.flex.y_min[i] + p.flex.y_max[i]) / T::lit(2.0);
                let nominal = share * total;
                p.series.d[i] = total - nominal;
                p.flex.y_min[i] = T::zero();
                p.flex.y_max[i] = T::lit(2.0) * nominal;
                k += h * nominal;
            }
            p.flex.k = k;
            p.flex.epsilon = FlexibilitySpec::default_epsilon(k);
        }
        (SweepParam::Node, SweepValue::Node(node)) => scn.active_node = node,
        (SweepParam::Policy, SweepValue::Policy(pol)) => scn.policy = pol,
        _ => return Err(bad()),
    }
    Ok(scn)
}

#[derive(Clone, Debug)]
pub struct SweepPoint<T> {
    pub value: SweepValue<T>,
    pub result: Result<SimulationResult<T>, SimError>,
}

/// Independent runs of `base` for each value, ordered by value (policies
/// keep the given order). Failing points are recorded and the sweep goes on.
pub fn run_sweep<T: Scalar>(base: &Scenario<T>, param: SweepParam, values: &[SweepValue<T>]) -> Vec<SweepPoint<T>> {
    let mut values = values.to_vec();
    values.sort_by(|a, b| match (a, b) {
        (SweepValue::Number(x), SweepValue::Number(y)) => x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal),
        (SweepValue::Node(x), SweepValue::Node(y)) => x.cmp(y),
        _ => std::cmp::Ordering::Equal,
    });
    values
        .into_iter()
        .map(|value| SweepPoint {
            value,
            result: apply_sweep(base, param, value).and_then(|s| run_day(&s)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PriceSeries;

    fn flat_prosumer(n: usize, d: f64, r: f64) -> Prosumer<f64> {
        Prosumer {
            series: ScenarioSeries::new(vec![d; n], vec![r; n], PriceSeries { buy: vec![10.0; n], sell: vec![5.0; n] })
                .unwrap(),
            battery: BatterySpec::from_c_rates(2.0, 0.5, 0.5, 0.95, 0.95).with_initial(1.0),
            flex: FlexibilitySpec::none(n),
            inverter: InverterSpec::new(3.0, 0.9),
        }
    }

    fn scenario(n: usize, d: f64, r: f64, policy: Policy) -> Scenario<f64> {
        Scenario {
            feeder: FeederModel::default_feeder(),
            prosumers: vec![None, Some(flat_prosumer(n, d, r)), Some(flat_prosumer(n, d, r)), Some(flat_prosumer(n, d, r))],
            active_node: 4,
            policy,
            rules: VoltageRuleParams::default(),
            grid: TimeGrid::new(n, 0.25, 15).unwrap(),
            rng_seed: 0,
        }
    }

    #[test]
    fn idle_day_is_flat() {
        let mut scn = scenario(8, 0.0, 0.0, Policy::None);
        for p in scn.prosumers.iter_mut().flatten() {
            p.battery = BatterySpec::none();
        }
        let res = run_day(&scn).unwrap();
        let tr = res.active_trace();
        assert_eq!(tr.len(), 8 * 15);
        assert!(tr.u.iter().all(|&u| u == 1.0));
        assert!(tr.p_inv.iter().chain(&tr.q_inv).chain(&tr.p_curt).all(|&v| v == 0.0));
        assert_eq!(res.metrics.lcg_pct, None);
    }

    #[test]
    fn flat_prices_keep_the_battery_until_it_pays() {
        let res = run_day(&scenario(8, 0.5, 0.0, Policy::Anrc)).unwrap();
        let tr = res.active_trace();
        assert!(tr.b.iter().all(|&b| (0.0..=2.0).contains(&b)));
        assert_eq!(res.schedules.len(), 8);
        assert!(res.metrics.lcg_abs.unwrap().abs() < 1e-9);
    }

    #[test]
    fn anrc_is_neutral_in_the_permissible_band() {
        let a = run_day(&scenario(8, 0.5, 1.0, Policy::None)).unwrap();
        let b = run_day(&scenario(8, 0.5, 1.0, Policy::Anrc)).unwrap();
        assert!(a.active_trace().u.iter().all(|&u| (0.96..=1.04).contains(&u)));
        assert_eq!(a.traces, b.traces);
    }

    #[test]
    fn energy_bookkeeping() {
        let res = run_day(&scenario(8, 0.2, 2.0, Policy::Prc)).unwrap();
        let tr = res.active_trace();
        let bat = BatterySpec::from_c_rates(2.0, 0.5, 0.5, 0.95, 0.95);
        let moved: f64 = tr.p_b.iter().map(|&p| battery_energy_from_power(p, &bat, 1.0 / 60.0)).sum();
        assert!((1.0 + moved - tr.b.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn invalid_scenarios_are_rejected() {
        let mut scn = scenario(4, 0.5, 0.0, Policy::None);
        scn.active_node = 1;
        assert!(run_day(&scn).unwrap_err().is_validation());
        let mut scn = scenario(4, 0.5, 0.0, Policy::None);
        scn.prosumers[3].as_mut().unwrap().series.d.pop();
        assert!(run_day(&scn).unwrap_err().is_validation());
    }

    #[test]
    fn sweep_orders_and_applies_values() {
        let scn = scenario(4, 0.5, 0.0, Policy::None);
        let values: Vec<SweepValue<f64>> =
            ["1.0", "0.1", "0.5"].iter().map(|s| SweepValue::parse(SweepParam::Kappa, s).unwrap()).collect();
        let pts = run_sweep(&scn, SweepParam::Kappa, &values);
        let order: Vec<String> = pts.iter().map(|p| p.value.to_string()).collect();
        assert_eq!(order, ["0.1", "0.5", "1"]);
        let bad = run_sweep(&scn, SweepParam::Kappa, &[SweepValue::Number(2.0)]);
        assert!(bad[0].result.is_err());
        let flex = apply_sweep(&scn, SweepParam::FlexPct, SweepValue::Number(10.0)).unwrap();
        let p = flex.active().unwrap();
        assert!((p.flex.k - 4.0 * 0.25 * 0.05).abs() < 1e-12);
        assert!((p.series.d[0] - 0.45).abs() < 1e-12);
    }
}

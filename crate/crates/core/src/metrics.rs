//! Cost, curtailment and voltage indices computed from simulation traces.

use crate::arbitrage::{evaluate_cost, ArbitrageInputs, Schedule};
use crate::inverter::VoltageRuleParams;
use crate::model::{ScenarioSeries, TimeGrid};
use crate::num::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsBundle<T> {
    /// Bill of the planned schedule with no inverter rules applied.
    pub cost_wic: T,
    /// Bill of the dispatch actually realised under the inverter rules.
    pub cost_inv: T,
    /// `cost_inv − cost_wic`; absent for uncontrolled runs.
    pub lcg_abs: Option<T>,
    /// `lcg_abs` as a percentage of `|cost_wic|`.
    pub lcg_pct: Option<T>,
    /// Curtailed PV energy (kWh).
    pub tce: T,
    /// Sample counts above `u_max`, above `1 + Δ`, below `1 − Δ`, below `u_min`.
    pub vci: [usize; 4],
    /// Accumulated exceedance beyond `[1 − Δ, 1 + Δ]` (p.u. samples).
    pub cvc: T,
}

/// Two-price bill of net load `l` (kW) held for `h` hours.
#[inline]
pub fn bill<T: Scalar>(l: T, p_b: T, p_s: T, h: T) -> T {
    h * (l.pos_part() * p_b - l.neg_part() * p_s)
}

/// Bill of a slow-timescale schedule evaluated on `d + y − r + f(x)`.
pub fn cost_without_inverter_control<T: Scalar>(schedule: &Schedule<T>, inp: &ArbitrageInputs<T>) -> T {
    evaluate_cost(schedule, inp)
}

/// Bill with inverter control. Per slow step the billed net load is
/// `d + y − r + mean_k(p_b + p_curt)` over that step's fast samples.
///
/// `p_b` and `p_curt` hold `n · inner_per_outer` fast samples, `y` the
/// flexible load realised in each slow step.
pub fn cost_with_inverter_control<T: Scalar>(
    p_b: &[T],
    p_curt: &[T],
    y: &[T],
    series: &ScenarioSeries<T>,
    grid: &TimeGrid<T>,
) -> T {
    let m = grid.inner_per_outer;
    let inner = T::from_usize(m).unwrap();
    (0..grid.n)
        .map(|i| {
            let fast: T = (i * m..(i + 1) * m).map(|k| p_b[k] + p_curt[k]).sum();
            let l = series.d[i] + y[i] - series.r[i] + fast / inner;
            bill(l, series.prices.buy[i], series.prices.sell[i], grid.h)
        })
        .sum()
}

/// Loss of consumer gain: absolute and percent of `|cost_wic|`.
///
/// A zero baseline gives 0 % for a zero loss and a signed infinity otherwise.
pub fn lcg<T: Scalar>(cost_inv: T, cost_wic: T) -> (T, T) {
    let abs = cost_inv - cost_wic;
    let base = cost_wic.abs();
    let pct = if base > T::zero() {
        abs / base * T::lit(100.0)
    } else if abs == T::zero() {
        T::zero()
    } else {
        abs.signum() * T::infinity()
    };
    (abs, pct)
}

/// Total curtailed energy (kWh) of a fast-timescale curtailment trace.
pub fn tce<T: Scalar>(p_curt: &[T], h_fast: T) -> T {
    p_curt.iter().map(|&p| p * h_fast).sum()
}

pub fn vci<T: Scalar>(u: &[T], params: &VoltageRuleParams<T>) -> [usize; 4] {
    let (lo, hi) = (params.lower_band(), params.upper_band());
    let mut out = [0usize; 4];
    for &v in u {
        out[0] += usize::from(v > params.u_max);
        out[1] += usize::from(v > hi);
        out[2] += usize::from(v < lo);
        out[3] += usize::from(v < params.u_min);
    }
    out
}

pub fn cvc<T: Scalar>(u: &[T], params: &VoltageRuleParams<T>) -> T {
    let (lo, hi) = (params.lower_band(), params.upper_band());
    u.iter().map(|&v| (v - hi).pos_part() + (lo - v).pos_part()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PriceSeries;
    use proptest::prelude::*;

    fn params() -> VoltageRuleParams<f64> {
        VoltageRuleParams::default()
    }

    fn one_step(d: f64, r: f64, pb: f64, ps: f64) -> (ScenarioSeries<f64>, TimeGrid<f64>) {
        let s = ScenarioSeries::new(vec![d], vec![r], PriceSeries { buy: vec![pb], sell: vec![ps] }).unwrap();
        (s, TimeGrid::new(1, 0.25, 15).unwrap())
    }

    #[test]
    fn bill_examples() {
        assert_eq!(bill(0.0, 10.0, 4.0, 0.25), 0.0);
        assert_eq!(bill(2.0, 10.0, 4.0, 0.25), 5.0);
        assert_eq!(bill(-2.0, 10.0, 4.0, 0.25), -2.0);
    }

    #[test]
    fn curtailment_adds_to_billed_load() {
        let (s, g) = one_step(2.0, 1.0, 10.0, 4.0);
        let base = cost_with_inverter_control(&[0.0; 15], &[0.0; 15], &[0.0], &s, &g);
        let curt = cost_with_inverter_control(&[0.0; 15], &[1.0; 15], &[0.0], &s, &g);
        assert!((base - 0.25 * 10.0).abs() < 1e-12);
        assert!((curt - base - 0.25 * 10.0).abs() < 1e-12);
    }

    #[test]
    fn full_curtailment_bills_only_load() {
        let (s, g) = one_step(0.5, 2.0, 10.0, 4.0);
        let c = cost_with_inverter_control(&[0.0; 15], &[2.0; 15], &[0.3], &s, &g);
        assert!((c - bill(0.8, 10.0, 4.0, 0.25)).abs() < 1e-12);
    }

    #[test]
    fn lcg_examples() {
        assert_eq!(lcg(3.0, 3.0), (0.0, 0.0));
        // costs are given to the cent, which moves the percentage by up to ~0.03
        let (_, pct): (f64, f64) = lcg(54.16, 37.78);
        assert!((pct - 43.35).abs() < 0.05);
        let (_, pct): (f64, f64) = lcg(38.27, 37.78);
        assert!((pct - 1.3).abs() < 0.05);
        let (abs, pct) = lcg(-1.0, -2.0);
        assert_eq!((abs, pct), (1.0, 50.0));
    }

    #[test]
    fn tce_examples() {
        assert_eq!(tce(&[0.0; 60], 1.0 / 60.0), 0.0);
        assert!((tce(&[1.0f64; 60], 1.0 / 60.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn voltage_index_examples() {
        let p = params();
        assert_eq!(vci(&[1.0; 10], &p), [0, 0, 0, 0]);
        assert_eq!(vci(&[1.09], &p), [1, 1, 0, 0]);
        assert_eq!(cvc(&[1.0; 10], &p), 0.0);
        assert!((cvc(&[1.05, 1.03], &p) - 0.01).abs() < 1e-12);
        assert!((cvc(&[0.95, 0.955], &p) - 0.015).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn vci_nesting_and_cvc_zero(u in prop::collection::vec(0.85f64..1.15, 0..200)) {
            let p = params();
            let v = vci(&u, &p);
            prop_assert!(v[0] <= v[1] && v[3] <= v[2]);
            let c = cvc(&u, &p);
            prop_assert!(c >= 0.0);
            prop_assert_eq!(c == 0.0, v[1] == 0 && v[2] == 0);
        }

        #[test]
        fn schedule_following_dispatch_bills_the_schedule(
            z in prop::collection::vec(-3.0f64..3.0, 1..8),
            pb in 1.0f64..20.0, kappa in 0.0f64..=1.0, x0 in -0.2f64..0.2,
        ) {
            let n = z.len();
            let d: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
            let r: Vec<f64> = z.iter().map(|v| (-v).max(0.0)).collect();
            let series = ScenarioSeries::new(d, r, PriceSeries { buy: vec![pb; n], sell: vec![kappa * pb; n] }).unwrap();
            let grid = TimeGrid::new(n, 0.25, 15).unwrap();
            let battery = crate::model::BatterySpec::from_c_rates(2.0, 1.0, 1.0, 0.95, 0.9).with_initial(1.0);
            let x: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { x0 } else { -x0 }).collect();
            let schedule = Schedule { x: x.clone(), y: vec![0.0; n], t: vec![0.0; n], objective: 0.0 };
            let inp = ArbitrageInputs { grid, battery, flex: crate::model::FlexibilitySpec::none(n), series: series.clone() };
            let p_b: Vec<f64> = x.iter()
                .flat_map(|&xi| std::iter::repeat(crate::model::battery_power_unchecked(xi, &battery, 0.25)).take(15))
                .collect();
            let wic = cost_without_inverter_control(&schedule, &inp);
            let inv = cost_with_inverter_control(&p_b, &vec![0.0; 15 * n], &schedule.y, &series, &grid);
            prop_assert!((wic - inv).abs() < 1e-9);
        }
    }
}

//! Device parameters, time discretisation and battery power/energy conversion.
//!
//! Sign conventions used across the crate: active power is positive when
//! consumed from the grid (battery charging), reactive power is positive when
//! injected into the grid.

use thiserror::Error;

use crate::num::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid time grid: {0}")]
    TimeGrid(String),
    #[error("invalid battery: {0}")]
    Battery(String),
    #[error("invalid flexibility: {0}")]
    Flexibility(String),
    #[error("invalid prices at step {step}: {reason}")]
    Prices { step: usize, reason: String },
    #[error("invalid series: {0}")]
    Series(String),
    #[error("invalid inverter: {0}")]
    Inverter(String),
    #[error("energy delta {x} kWh outside ramp range [{lo}, {hi}]")]
    OutsideRamp { x: f64, lo: f64, hi: f64 },
}

/// Two-timescale discretisation: `n` outer steps of `h` hours, each split
/// into `inner_per_outer` inner steps of `h_fast` hours.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    pub n: usize,
    pub h: T,
    pub inner_per_outer: usize,
    pub h_fast: T,
}

impl<T: Scalar> TimeGrid<T> {
    /// Builds a grid with `h_fast = h / inner_per_outer`.
    pub fn new(n: usize, h: T, inner_per_outer: usize) -> Result<Self, ModelError> {
        if inner_per_outer == 0 {
            return Err(ModelError::TimeGrid("inner_per_outer must be positive".into()));
        }
        let g = Self {
            n,
            h,
            inner_per_outer,
            h_fast: h / T::from_usize(inner_per_outer).unwrap(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n == 0 {
            return Err(ModelError::TimeGrid("n must be positive".into()));
        }
        if !(self.h > T::zero()) || !(self.h_fast > T::zero()) {
            return Err(ModelError::TimeGrid("step durations must be positive".into()));
        }
        let k = T::from_usize(self.inner_per_outer).unwrap();
        if (k * self.h_fast - self.h).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) * self.h {
            return Err(ModelError::TimeGrid(format!(
                "h = {} is not inner_per_outer × h_fast = {} × {}",
                self.h, self.inner_per_outer, self.h_fast
            )));
        }
        Ok(())
    }

    pub fn total_inner_steps(&self) -> usize {
        self.n * self.inner_per_outer
    }

    /// Same step sizes, shorter horizon.
    pub fn with_horizon(&self, n: usize) -> Self {
        Self { n, ..*self }
    }
}

impl<T: Scalar> Default for TimeGrid<T> {
    /// 96 quarter-hour steps, each regulated minute by minute.
    fn default() -> Self {
        Self {
            n: 96,
            h: T::lit(0.25),
            inner_per_outer: 15,
            h_fast: T::lit(1.0 / 60.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatterySpec<T> {
    pub b_min: T,
    pub b_max: T,
    pub b_0: T,
    /// Maximum discharge rate (kW, ≤ 0).
    pub delta_min: T,
    /// Maximum charge rate (kW, ≥ 0).
    pub delta_max: T,
    pub eta_ch: T,
    pub eta_dis: T,
}

impl<T: Scalar> BatterySpec<T> {
    /// A battery given as `capacity kWh, xC-yC`: full charge takes `1/x` hours
    /// and full discharge `1/y` hours.
    pub fn from_c_rates(capacity: T, charge_c: T, discharge_c: T, eta_ch: T, eta_dis: T) -> Self {
        Self {
            b_min: T::zero(),
            b_max: capacity,
            b_0: T::zero(),
            delta_min: -discharge_c * capacity,
            delta_max: charge_c * capacity,
            eta_ch,
            eta_dis,
        }
    }

    /// A device that can neither store nor release energy.
    pub fn none() -> Self {
        Self {
            b_min: T::zero(),
            b_max: T::zero(),
            b_0: T::zero(),
            delta_min: T::zero(),
            delta_max: T::zero(),
            eta_ch: T::one(),
            eta_dis: T::one(),
        }
    }

    pub fn with_initial(self, b_0: T) -> Self {
        Self { b_0, ..self }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [
            self.b_min,
            self.b_max,
            self.b_0,
            self.delta_min,
            self.delta_max,
            self.eta_ch,
            self.eta_dis,
        ];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(ModelError::Battery("non-finite parameter".into()));
        }
        if !(self.b_min <= self.b_0 && self.b_0 <= self.b_max) {
            return Err(ModelError::Battery(format!(
                "need b_min ≤ b_0 ≤ b_max, got {} ≤ {} ≤ {}",
                self.b_min, self.b_0, self.b_max
            )));
        }
        if !(self.delta_min <= T::zero() && T::zero() <= self.delta_max) {
            return Err(ModelError::Battery("need delta_min ≤ 0 ≤ delta_max".into()));
        }
        for (name, eta) in [("eta_ch", self.eta_ch), ("eta_dis", self.eta_dis)] {
            if !(eta > T::zero() && eta <= T::one()) {
                return Err(ModelError::Battery(format!("{name} = {eta} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Smallest admissible energy delta over `dur` hours (`δ_min · dur`).
    pub fn x_min(&self, dur: T) -> T {
        self.delta_min * dur
    }

    pub fn x_max(&self, dur: T) -> T {
        self.delta_max * dur
    }

    /// Battery power range (kW at the meter) over one step of `step` hours
    /// starting at charge `b_prev`.
    ///
    /// The stored-energy rate is limited by the ramp bounds and by the energy
    /// left before either capacity bound; it is then mapped through the
    /// efficiencies, so the range is exactly the image of the admissible
    /// energy deltas under [`battery_power`].
    pub fn power_range(&self, b_prev: T, step: T) -> (T, T) {
        let lo = self.eta_dis * self.delta_min.max((self.b_min - b_prev) / step);
        let hi = self.delta_max.min((self.b_max - b_prev) / step) / self.eta_ch;
        (lo.min(T::zero()), hi.max(T::zero()))
    }
}

/// Power drawn by the battery (kW, positive when charging) for an energy
/// change `x` kWh spread over `dur` hours.
pub fn battery_power<T: Scalar>(x: T, spec: &BatterySpec<T>, dur: T) -> Result<T, ModelError> {
    let (lo, hi) = (spec.x_min(dur), spec.x_max(dur));
    let tol = T::lit(1e-12) * T::one().max(lo.abs()).max(hi.abs());
    if !(x >= lo - tol && x <= hi + tol) {
        return Err(ModelError::OutsideRamp {
            x: x.as_f64(),
            lo: lo.as_f64(),
            hi: hi.as_f64(),
        });
    }
    Ok(battery_power_unchecked(x, spec, dur))
}

/// [`battery_power`] without the ramp check.
#[inline]
pub fn battery_power_unchecked<T: Scalar>(x: T, spec: &BatterySpec<T>, dur: T) -> T {
    x.pos_part() / (dur * spec.eta_ch) - spec.eta_dis * x.neg_part() / dur
}

/// Inverse of [`battery_power`]: energy change (kWh) produced by holding
/// battery power `p` kW for `dur` hours.
#[inline]
pub fn battery_energy_from_power<T: Scalar>(p: T, spec: &BatterySpec<T>, dur: T) -> T {
    if p >= T::zero() {
        p * dur * spec.eta_ch
    } else {
        p * dur / spec.eta_dis
    }
}

/// Flexible load envelope and its cumulative energy target
/// (`K − ε ≤ h Σ y ≤ K + ε`).
#[derive(Clone, Debug, PartialEq)]
pub struct FlexibilitySpec<T> {
    pub y_min: Vec<T>,
    pub y_max: Vec<T>,
    pub k: T,
    pub epsilon: T,
}

impl<T: Scalar> FlexibilitySpec<T> {
    /// No flexible load over `n` steps.
    pub fn none(n: usize) -> Self {
        Self {
            y_min: vec![T::zero(); n],
            y_max: vec![T::zero(); n],
            k: T::zero(),
            epsilon: T::zero(),
        }
    }

    /// The slack used when a configuration leaves it unspecified.
    pub fn default_epsilon(k: T) -> T {
        T::lit(1e-6).max(T::lit(1e-4) * k)
    }

    pub fn len(&self) -> usize {
        self.y_min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_min.is_empty()
    }

    /// Envelope-only checks (no cumulative target).
    pub fn validate_envelope(&self) -> Result<(), ModelError> {
        if self.y_min.len() != self.y_max.len() {
            return Err(ModelError::Flexibility("y_min and y_max lengths differ".into()));
        }
        for (i, (&lo, &hi)) in self.y_min.iter().zip(&self.y_max).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(ModelError::Flexibility(format!("non-finite envelope at step {i}")));
            }
            if !(T::zero() <= lo && lo <= hi) {
                return Err(ModelError::Flexibility(format!(
                    "need 0 ≤ y_min ≤ y_max at step {i}, got [{lo}, {hi}]"
                )));
            }
        }
        if !(self.k.is_finite() && self.epsilon.is_finite() && self.epsilon >= T::zero()) {
            return Err(ModelError::Flexibility("K and ε must be finite with ε ≥ 0".into()));
        }
        Ok(())
    }

    /// Checks that the envelope can deliver `K ± ε` over steps of `h` hours.
    pub fn validate(&self, h: T) -> Result<(), ModelError> {
        self.validate_envelope()?;
        let (lo, hi) = self.energy_range(h);
        let tol = T::lit(1e-9) * T::one().max(self.k.abs());
        if lo > self.k + self.epsilon + tol || hi < self.k - self.epsilon - tol {
            return Err(ModelError::Flexibility(format!(
                "envelope delivers [{lo}, {hi}] kWh, target is {} ± {}",
                self.k, self.epsilon
            )));
        }
        Ok(())
    }

    /// `[h Σ y_min, h Σ y_max]`.
    pub fn energy_range(&self, h: T) -> (T, T) {
        (
            h * self.y_min.iter().copied().sum::<T>(),
            h * self.y_max.iter().copied().sum::<T>(),
        )
    }

    /// Envelope restricted to steps `from..`.
    pub fn tail(&self, from: usize) -> Self {
        Self {
            y_min: self.y_min[from..].to_vec(),
            y_max: self.y_max[from..].to_vec(),
            k: self.k,
            epsilon: self.epsilon,
        }
    }
}

/// Buying and selling prices per step (currency per kWh).
#[derive(Clone, Debug, PartialEq)]
pub struct PriceSeries<T> {
    pub buy: Vec<T>,
    pub sell: Vec<T>,
}

impl<T: Scalar> PriceSeries<T> {
    /// `0 ≤ p_s ≤ p_b` at every step; the piecewise cost is only convex then.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.buy.len() != self.sell.len() {
            return Err(ModelError::Series("buy and sell prices differ in length".into()));
        }
        for (step, (&pb, &ps)) in self.buy.iter().zip(&self.sell).enumerate() {
            if !(pb.is_finite() && ps.is_finite()) {
                return Err(ModelError::Prices {
                    step,
                    reason: "non-finite price".into(),
                });
            }
            if ps < T::zero() {
                return Err(ModelError::Prices {
                    step,
                    reason: format!("negative selling price {ps}"),
                });
            }
            if ps > pb {
                return Err(ModelError::Prices {
                    step,
                    reason: format!("selling price {ps} exceeds buying price {pb}"),
                });
            }
        }
        Ok(())
    }

    /// `κ_i = p_s / p_b` (1 where `p_b = 0`).
    pub fn kappa(&self) -> Vec<T> {
        self.buy
            .iter()
            .zip(&self.sell)
            .map(|(&b, &s)| if b > T::zero() { s / b } else { T::one() })
            .collect()
    }

    /// Selling price set to `kappa × buying price`.
    pub fn with_kappa(&self, kappa: T) -> Self {
        Self {
            buy: self.buy.clone(),
            sell: self.buy.iter().map(|&b| b * kappa).collect(),
        }
    }
}

/// Inelastic load, renewable generation and prices over a horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSeries<T> {
    pub d: Vec<T>,
    pub r: Vec<T>,
    pub prices: PriceSeries<T>,
}

impl<T: Scalar> ScenarioSeries<T> {
    pub fn new(d: Vec<T>, r: Vec<T>, prices: PriceSeries<T>) -> Result<Self, ModelError> {
        let s = Self { d, r, prices };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Net uncontrolled load `z_i = d_i − r_i`.
    pub fn z(&self) -> Vec<T> {
        self.d.iter().zip(&self.r).map(|(&d, &r)| d - r).collect()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.d.len();
        if self.r.len() != n || self.prices.buy.len() != n {
            return Err(ModelError::Series(format!(
                "lengths differ: d={}, r={}, prices={}",
                n,
                self.r.len(),
                self.prices.buy.len()
            )));
        }
        for (i, (&d, &r)) in self.d.iter().zip(&self.r).enumerate() {
            if !(d.is_finite() && r.is_finite() && d >= T::zero() && r >= T::zero()) {
                return Err(ModelError::Series(format!(
                    "load and generation must be finite and non-negative (step {i})"
                )));
            }
        }
        self.prices.validate()
    }

    pub fn tail(&self, from: usize) -> Self {
        Self {
            d: self.d[from..].to_vec(),
            r: self.r[from..].to_vec(),
            prices: PriceSeries {
                buy: self.prices.buy[from..].to_vec(),
                sell: self.prices.sell[from..].to_vec(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverterSpec<T> {
    /// Apparent power rating (kVA).
    pub s_max: T,
    /// Active power rating (kW).
    pub p_max: T,
    /// Worst-case power factor allowed by the operator.
    pub pf_wc: T,
}

impl<T: Scalar> InverterSpec<T> {
    /// Inverter whose active rating equals its apparent rating.
    pub fn new(s_max: T, pf_wc: T) -> Self {
        Self {
            s_max,
            p_max: s_max,
            pf_wc,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.p_max > T::zero() && self.p_max <= self.s_max && self.s_max.is_finite()) {
            return Err(ModelError::Inverter(format!(
                "need 0 < p_max ≤ s_max, got p_max={}, s_max={}",
                self.p_max, self.s_max
            )));
        }
        if !(self.pf_wc > T::zero() && self.pf_wc <= T::one()) {
            return Err(ModelError::Inverter(format!("pf_wc = {} outside (0, 1]", self.pf_wc)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn battery(eta: f64) -> BatterySpec<f64> {
        BatterySpec {
            b_min: 0.0,
            b_max: 2.0,
            b_0: 1.0,
            delta_min: -2.0,
            delta_max: 2.0,
            eta_ch: eta,
            eta_dis: eta,
        }
    }

    #[test]
    fn power_examples() {
        let b = battery(0.95);
        assert_eq!(battery_power(0.0, &b, 0.25).unwrap(), 0.0);
        assert!((battery_power(0.25, &b, 0.25).unwrap() - 1.052_631_578_947_368).abs() < 1e-12);
        assert!((battery_power(-0.25, &b, 0.25).unwrap() + 0.95).abs() < 1e-12);
    }

    #[test]
    fn energy_examples() {
        let b = battery(0.95);
        assert_eq!(battery_energy_from_power(0.0, &b, 0.25), 0.0);
        assert!((battery_energy_from_power(1.0 / 0.95, &b, 0.25) - 0.25).abs() < 1e-12);
        assert!((battery_energy_from_power(-0.95, &b, 0.25) + 0.25).abs() < 1e-12);
    }

    #[test]
    fn outside_ramp_is_domain_error() {
        let b = battery(1.0);
        assert!(matches!(
            battery_power(0.6, &b, 0.25),
            Err(ModelError::OutsideRamp { .. })
        ));
    }

    #[test]
    fn c_rate_notation() {
        let b = BatterySpec::<f64>::from_c_rates(2.0, 0.5, 0.5, 0.95, 0.95);
        assert_eq!(b.delta_max, 1.0);
        assert_eq!(b.delta_min, -1.0);
    }

    #[test]
    fn default_grid_is_quarter_hour_minutes() {
        let g = TimeGrid::<f64>::default();
        g.validate().unwrap();
        assert_eq!(g.total_inner_steps(), 1440);
        assert!(TimeGrid::<f64> {
            n: 4,
            h: 0.25,
            inner_per_outer: 15,
            h_fast: 0.1
        }
        .validate()
        .is_err());
    }

    #[test]
    fn prices_must_be_convex() {
        let p = PriceSeries {
            buy: vec![1.0, 2.0],
            sell: vec![0.5, 2.5],
        };
        assert!(matches!(p.validate(), Err(ModelError::Prices { step: 1, .. })));
        assert_eq!(p.kappa(), vec![0.5, 1.25]);
    }

    #[test]
    fn flexibility_feasibility() {
        let f = FlexibilitySpec {
            y_min: vec![0.0; 4],
            y_max: vec![1.0; 4],
            k: 1.5,
            epsilon: 0.0,
        };
        f.validate(0.25).unwrap_err();
        f.validate(1.0).unwrap();
    }

    #[test]
    fn power_range_respects_capacity() {
        let b = battery(0.9).with_initial(2.0);
        let (lo, hi) = b.power_range(2.0, 1.0 / 60.0);
        assert_eq!(hi, 0.0);
        assert!((lo + 1.8).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_on_power(p in -2.0f64..2.0, eta_ch in 0.5f64..=1.0, eta_dis in 0.5f64..=1.0, dur in 0.01f64..1.0) {
            let b = BatterySpec { eta_ch, eta_dis, delta_min: -2.0 / eta_dis.min(eta_ch), delta_max: 2.0 * 2.0, ..battery(1.0) };
            let x = battery_energy_from_power(p, &b, dur);
            let back = battery_power_unchecked(x, &b, dur);
            prop_assert!((back - p).abs() <= 1e-12);
        }

        #[test]
        fn power_monotone(x1 in -0.5f64..0.5, x2 in -0.5f64..0.5, eta in 0.5f64..=1.0) {
            let b = battery(eta);
            let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            prop_assert!(battery_power(lo, &b, 0.25).unwrap() <= battery_power(hi, &b, 0.25).unwrap());
        }

        #[test]
        fn charge_update_stays_in_bounds(b0 in 0.0f64..=2.0, p in -3.0f64..3.0, eta in 0.5f64..=1.0) {
            let b = battery(eta).with_initial(b0);
            let step = 1.0 / 60.0;
            let (lo, hi) = b.power_range(b0, step);
            let p = p.clamp(lo, hi);
            let next = b0 + battery_energy_from_power(p, &b, step);
            prop_assert!(next >= b.b_min - 1e-12 && next <= b.b_max + 1e-12);
        }
    }
}

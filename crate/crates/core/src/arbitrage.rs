//! Joint battery arbitrage and flexible-load scheduling as an epigraph LP.
//!
//! The per-step bill `h·([L]⁺ p_b − [L]⁻ p_s)` with `L = z + y + f(x)` is convex
//! whenever `0 ≤ p_s ≤ p_b`, and equals the largest of four affine pieces
//! (buy/sell price × charge/discharge branch of `f`). Each step gets an
//! epigraph variable `t_i` bounded below by those four pieces.
//!
//! Variable layout: `X = [x_1..x_N, y_1..y_N, t_1..t_N]`.
//! Row layout: four blocks of `N` segment rows, `N` cumulative upper
//! capacity rows, `N` cumulative lower capacity rows, then the two
//! cumulative flexibility rows, `6N + 2` in total.

use thiserror::Error;

use crate::lp::{solve_lp, DenseMatrix, LpError, LpStatus, StandardLp};
use crate::model::{
    battery_power_unchecked, BatterySpec, FlexibilitySpec, ModelError, ScenarioSeries, TimeGrid,
};
use crate::num::Scalar;

/// Constraint family blamed for an infeasible schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintFamily {
    BatteryRamp,
    BatteryCapacity,
    FlexibilityEnvelope,
    CumulativeFlexibility,
    EpigraphBounds,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArbitrageError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("horizon mismatch: grid has {grid} steps, {what} has {len}")]
    Horizon {
        grid: usize,
        what: &'static str,
        len: usize,
    },
    #[error("flexibility envelope cannot deliver the energy target: {0}")]
    FlexibilityEnvelope(String),
    #[error("arbitrage LP infeasible ({family:?} constraints)")]
    Infeasible { family: ConstraintFamily },
    #[error("arbitrage LP reported unbounded")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArbitrageInputs<T> {
    pub grid: TimeGrid<T>,
    pub battery: BatterySpec<T>,
    pub flex: FlexibilitySpec<T>,
    pub series: ScenarioSeries<T>,
}

/// Optimal battery and flexible-load plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule<T> {
    /// Battery energy change per step (kWh).
    pub x: Vec<T>,
    /// Flexible load per step (kW).
    pub y: Vec<T>,
    /// Epigraph value per step (currency).
    pub t: Vec<T>,
    pub objective: T,
}

impl<T: Scalar> ArbitrageInputs<T> {
    pub fn horizon(&self) -> usize {
        self.grid.n
    }

    pub fn validate(&self) -> Result<(), ArbitrageError> {
        self.grid.validate()?;
        self.battery.validate()?;
        self.series.validate()?;
        let n = self.grid.n;
        for (what, len) in [
            ("series", self.series.len()),
            ("y_min", self.flex.y_min.len()),
            ("y_max", self.flex.y_max.len()),
        ] {
            if len != n {
                return Err(ArbitrageError::Horizon { grid: n, what, len });
            }
        }
        self.flex.validate_envelope()?;
        self.flex
            .validate(self.grid.h)
            .map_err(|e| ArbitrageError::FlexibilityEnvelope(e.to_string()))?;
        Ok(())
    }

    /// Magnitude bound on the epigraph variables.
    pub fn epigraph_bound(&self) -> T {
        let max_abs = |v: &[T]| v.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
        let z = self.series.z();
        let p = max_abs(&self.series.prices.buy);
        let ramp = self.battery.delta_min.abs().max(self.battery.delta_max);
        let eta = self.battery.eta_ch.min(self.battery.eta_dis);
        let n = T::from_usize(self.grid.n).unwrap();
        let m = T::lit(10.0) * self.grid.h * n * p * (max_abs(&z) + max_abs(&self.flex.y_max) + ramp / eta);
        m.max(T::one())
    }

    /// Inputs for the remaining horizon `from..N` given the realised battery
    /// charge and the flexible energy already consumed.
    ///
    /// The remaining target is clamped into what the remaining envelope can
    /// deliver.
    pub fn remaining(&self, from: usize, b_now: T, flex_used: T) -> Self {
        let flex = self.flex.tail(from);
        let (lo, hi) = flex.energy_range(self.grid.h);
        let k = (self.flex.k - flex_used).clamp_to(lo, hi);
        let b_now = b_now.clamp_to(self.battery.b_min, self.battery.b_max);
        Self {
            grid: self.grid.with_horizon(self.grid.n - from),
            battery: self.battery.with_initial(b_now),
            flex: FlexibilitySpec { k, ..flex },
            series: self.series.tail(from),
        }
    }
}

impl<T: Scalar> Schedule<T> {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// The four epigraph coefficient triples `(x, y, rhs)` for step `i`, in
/// segment order: buy/charge, sell/discharge, buy/discharge, sell/charge.
/// Each segment reads `cx·x + cy·y − t ≤ rhs`.
pub fn segment_coefficients<T: Scalar>(inp: &ArbitrageInputs<T>, i: usize) -> [(T, T, T); 4] {
    let h = inp.grid.h;
    let pb = inp.series.prices.buy[i];
    let ps = inp.series.prices.sell[i];
    let z = inp.series.d[i] - inp.series.r[i];
    let (ech, edis) = (inp.battery.eta_ch, inp.battery.eta_dis);
    [
        (pb / ech, h * pb, -h * z * pb),
        (ps * edis, h * ps, -h * z * ps),
        (pb * edis, h * pb, -h * z * pb),
        (ps / ech, h * ps, -h * z * ps),
    ]
}

/// Value of segment `(cx, cy, rhs)` at `(x, y)`: the lower bound it puts on `t`.
#[inline]
pub fn segment_value<T: Scalar>(seg: (T, T, T), x: T, y: T) -> T {
    seg.0 * x + seg.1 * y - seg.2
}

pub fn build_arbitrage_lp<T: Scalar>(inp: &ArbitrageInputs<T>) -> Result<StandardLp<T>, ArbitrageError> {
    inp.validate()?;
    let n = inp.grid.n;
    let h = inp.grid.h;
    let bat = &inp.battery;
    let cols = 3 * n;
    let rows = 6 * n + 2;
    let mut a = DenseMatrix::zeros(rows, cols);
    let mut b = vec![T::zero(); rows];

    for i in 0..n {
        for (s, seg) in segment_coefficients(inp, i).into_iter().enumerate() {
            let r = s * n + i;
            a.set(r, i, seg.0);
            a.set(r, n + i, seg.1);
            a.set(r, 2 * n + i, -T::one());
            b[r] = seg.2;
        }
    }
    for k in 0..n {
        let up = 4 * n + k;
        let down = 5 * n + k;
        for j in 0..=k {
            a.set(up, j, T::one());
            a.set(down, j, -T::one());
        }
        b[up] = bat.b_max - bat.b_0;
        b[down] = bat.b_0 - bat.b_min;
    }
    let (fu, fd) = (6 * n, 6 * n + 1);
    for i in 0..n {
        a.set(fu, n + i, h);
        a.set(fd, n + i, -h);
    }
    b[fu] = inp.flex.k + inp.flex.epsilon;
    b[fd] = -inp.flex.k + inp.flex.epsilon;

    let m = inp.epigraph_bound();
    let mut lb = Vec::with_capacity(cols);
    let mut ub = Vec::with_capacity(cols);
    lb.extend(std::iter::repeat(bat.x_min(h)).take(n));
    ub.extend(std::iter::repeat(bat.x_max(h)).take(n));
    lb.extend_from_slice(&inp.flex.y_min);
    ub.extend_from_slice(&inp.flex.y_max);
    lb.extend(std::iter::repeat(-m).take(n));
    ub.extend(std::iter::repeat(m).take(n));

    let mut c = vec![T::zero(); cols];
    for v in c.iter_mut().skip(2 * n) {
        *v = T::one();
    }
    Ok(StandardLp { c, a, b, lb, ub })
}

pub fn solve_arbitrage<T: Scalar>(inp: &ArbitrageInputs<T>) -> Result<Schedule<T>, ArbitrageError> {
    let lp = build_arbitrage_lp(inp)?;
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(ArbitrageError::Infeasible {
                family: diagnose_infeasibility(inp),
            })
        }
        LpStatus::Unbounded => return Err(ArbitrageError::Unbounded),
    }
    let v = sol.x.expect("optimal solution carries x");
    let n = inp.grid.n;
    Ok(Schedule {
        x: v[..n].to_vec(),
        y: v[n..2 * n].to_vec(),
        t: v[2 * n..].to_vec(),
        objective: sol.objective,
    })
}

fn diagnose_infeasibility<T: Scalar>(inp: &ArbitrageInputs<T>) -> ConstraintFamily {
    let bat = &inp.battery;
    if bat.delta_min > T::zero() || bat.delta_max < T::zero() {
        return ConstraintFamily::BatteryRamp;
    }
    if bat.b_0 < bat.b_min || bat.b_0 > bat.b_max {
        return ConstraintFamily::BatteryCapacity;
    }
    if inp.flex.validate_envelope().is_err() {
        return ConstraintFamily::FlexibilityEnvelope;
    }
    if inp.flex.validate(inp.grid.h).is_err() {
        return ConstraintFamily::CumulativeFlexibility;
    }
    ConstraintFamily::EpigraphBounds
}

/// Direct evaluation of the two-price bill `h Σ [L]⁺ p_b − [L]⁻ p_s` for a
/// plan, with `L = z + y + f(x)`.
pub fn evaluate_cost<T: Scalar>(schedule: &Schedule<T>, inp: &ArbitrageInputs<T>) -> T {
    let h = inp.grid.h;
    (0..schedule.len())
        .map(|i| {
            let l = inp.series.d[i] - inp.series.r[i] + schedule.y[i]
                + battery_power_unchecked(schedule.x[i], &inp.battery, h);
            h * (l.pos_part() * inp.series.prices.buy[i] - l.neg_part() * inp.series.prices.sell[i])
        })
        .sum()
}

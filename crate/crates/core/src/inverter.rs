//! Voltage-dependent inverter rules on the fast (per-minute) timescale.
//!
//! Voltage is split into five zones by `u_min`, `1 ± Δ` and `u_max`. Each
//! policy maps the zone and the measured voltage to a feasible active and
//! reactive power window (the envelope):
//!
//! * PRC pushes the voltage back towards nominal: the window collapses to a
//!   single corrective point in zones 1 and 5 and follows a linear droop in
//!   zones 2 and 4.
//! * ANRC only forbids outputs that make the deviation worse.
//! * Hybrid takes the active-power rows of ANRC and the reactive rows of PRC.
//!
//! In zone 3 every policy leaves the full rating box available.

use thiserror::Error;

use crate::model::{BatterySpec, InverterSpec};
use crate::num::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoltageRuleParams<T> {
    pub u_min: T,
    pub u_max: T,
    /// Permissible deviation around 1 p.u. before any correction applies.
    pub delta_perm: T,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("need u_min < 1 - Δ < 1 + Δ < u_max with Δ > 0, got u_min={u_min}, Δ={delta}, u_max={u_max}")]
    Params { u_min: f64, delta: f64, u_max: f64 },
    #[error("|p_inv| = {p} exceeds the apparent rating {s_max}")]
    AboveRating { p: f64, s_max: f64 },
}

impl<T: Scalar> VoltageRuleParams<T> {
    pub fn validate(&self) -> Result<(), RuleError> {
        let one = T::one();
        let ok = self.delta_perm > T::zero()
            && self.u_min < one - self.delta_perm
            && one + self.delta_perm < self.u_max;
        if ok {
            Ok(())
        } else {
            Err(RuleError::Params {
                u_min: self.u_min.as_f64(),
                delta: self.delta_perm.as_f64(),
                u_max: self.u_max.as_f64(),
            })
        }
    }

    pub fn lower_band(&self) -> T {
        T::one() - self.delta_perm
    }

    pub fn upper_band(&self) -> T {
        T::one() + self.delta_perm
    }
}

impl<T: Scalar> Default for VoltageRuleParams<T> {
    fn default() -> Self {
        Self {
            u_min: T::lit(0.92),
            u_max: T::lit(1.08),
            delta_perm: T::lit(0.04),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Zone {
    /// Below `u_min`.
    Z1,
    /// `[u_min, 1 − Δ)`.
    Z2,
    /// `[1 − Δ, 1 + Δ]`.
    Z3,
    /// `(1 + Δ, u_max]`.
    Z4,
    /// Above `u_max`.
    Z5,
}

pub fn classify_zone<T: Scalar>(u: T, params: &VoltageRuleParams<T>) -> Zone {
    if u < params.u_min {
        Zone::Z1
    } else if u < params.lower_band() {
        Zone::Z2
    } else if u <= params.upper_band() {
        Zone::Z3
    } else if u <= params.u_max {
        Zone::Z4
    } else {
        Zone::Z5
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Policy {
    None,
    Prc,
    Anrc,
    Hybrid,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::None, Policy::Prc, Policy::Anrc, Policy::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            Policy::None => "none",
            Policy::Prc => "prc",
            Policy::Anrc => "anrc",
            Policy::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Policy::None),
            "prc" => Ok(Policy::Prc),
            "anrc" => Ok(Policy::Anrc),
            "hybrid" => Ok(Policy::Hybrid),
            other => Err(format!("unknown policy '{other}' (expected none|prc|anrc|hybrid)")),
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Feasible active (kW) and reactive (kVAr) windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope<T> {
    pub p_lo: T,
    pub p_hi: T,
    pub q_lo: T,
    pub q_hi: T,
}

impl<T: Scalar> Envelope<T> {
    pub fn full(p_min: T, p_max: T, q_min: T, q_max: T) -> Self {
        Self {
            p_lo: p_min,
            p_hi: p_max,
            q_lo: q_min,
            q_hi: q_max,
        }
    }

    pub fn contains_p(&self, p: T) -> bool {
        self.p_lo <= p && p <= self.p_hi
    }

    pub fn contains_q(&self, q: T) -> bool {
        self.q_lo <= q && q <= self.q_hi
    }

    /// Whether `other`'s windows lie inside this envelope's windows.
    pub fn contains(&self, other: &Self, tol: T) -> bool {
        self.p_lo <= other.p_lo + tol
            && other.p_hi <= self.p_hi + tol
            && self.q_lo <= other.q_lo + tol
            && other.q_hi <= self.q_hi + tol
    }
}

/// Row of the policy table for the measured voltage `u`.
///
/// `p_min ≤ 0 ≤ p_max` and `q_min ≤ 0 ≤ q_max` are the rating limits.
pub fn envelope<T: Scalar>(
    policy: Policy,
    u: T,
    params: &VoltageRuleParams<T>,
    p_min: T,
    p_max: T,
    q_min: T,
    q_max: T,
) -> Envelope<T> {
    let full = Envelope::full(p_min, p_max, q_min, q_max);
    if policy == Policy::None {
        return full;
    }
    let zone = classify_zone(u, params);
    let (p_lo, p_hi) = match policy {
        Policy::Prc => prc_p(zone, u, params, p_min, p_max),
        _ => anrc_p(zone, u, params, p_min, p_max),
    };
    let (q_lo, q_hi) = match policy {
        Policy::Anrc => anrc_q(zone, u, params, q_min, q_max),
        _ => prc_q(zone, u, params, q_min, q_max),
    };
    Envelope { p_lo, p_hi, q_lo, q_hi }
}

/// Droop fractions for zones 2 and 4. `s2`/`s4` rise from 0 at the band
/// edge to 1 at the hard limit, `a2`/`a4` fall from 1 to 0.
struct Droop<T> {
    s2: T,
    a2: T,
    s4: T,
    a4: T,
}

fn droop<T: Scalar>(u: T, p: &VoltageRuleParams<T>) -> Droop<T> {
    let lo = p.lower_band();
    let hi = p.upper_band();
    Droop {
        s2: (u - lo) / (p.u_min - lo),
        a2: (p.u_min - u) / (p.u_min - lo),
        s4: (u - hi) / (p.u_max - hi),
        a4: (p.u_max - u) / (p.u_max - hi),
    }
}

fn prc_p<T: Scalar>(zone: Zone, u: T, params: &VoltageRuleParams<T>, p_min: T, p_max: T) -> (T, T) {
    let d = droop(u, params);
    match zone {
        Zone::Z1 => (p_min, p_min),
        Zone::Z2 => (p_min, p_min * d.s2),
        Zone::Z3 => (p_min, p_max),
        Zone::Z4 => (p_max * d.s4, p_max),
        Zone::Z5 => (p_max, p_max),
    }
}

fn prc_q<T: Scalar>(zone: Zone, u: T, params: &VoltageRuleParams<T>, q_min: T, q_max: T) -> (T, T) {
    let d = droop(u, params);
    match zone {
        Zone::Z1 => (q_max, q_max),
        Zone::Z2 => (q_max * d.s2, q_max),
        Zone::Z3 => (q_min, q_max),
        Zone::Z4 => (q_min, q_min * d.s4),
        Zone::Z5 => (q_min, q_min),
    }
}

fn anrc_p<T: Scalar>(zone: Zone, u: T, params: &VoltageRuleParams<T>, p_min: T, p_max: T) -> (T, T) {
    let d = droop(u, params);
    match zone {
        Zone::Z1 => (p_min, T::zero()),
        Zone::Z2 => (p_min, p_max * d.a2),
        Zone::Z3 => (p_min, p_max),
        Zone::Z4 => (p_min * d.a4, p_max),
        Zone::Z5 => (T::zero(), p_max),
    }
}

fn anrc_q<T: Scalar>(zone: Zone, u: T, params: &VoltageRuleParams<T>, q_min: T, q_max: T) -> (T, T) {
    let d = droop(u, params);
    match zone {
        Zone::Z1 => (T::zero(), q_max),
        Zone::Z2 => (q_min * d.a2, q_max),
        Zone::Z3 => (q_min, q_max),
        Zone::Z4 => (q_min, q_max * d.a4),
        Zone::Z5 => (q_min, T::zero()),
    }
}

/// Default lower edge of the constant power-factor wedge, as a fraction of
/// the apparent rating.
pub const Q_WEDGE_THRESHOLD: f64 = 0.1;

/// Reactive capability `q_max ≥ 0` at active output `p_inv` (`q_min = −q_max`).
pub fn q_capability<T: Scalar>(p_inv: T, inv: &InverterSpec<T>) -> Result<T, RuleError> {
    q_capability_with_threshold(p_inv, inv, T::lit(Q_WEDGE_THRESHOLD))
}

/// [`q_capability`] with the wedge threshold (fraction of `s_max`) exposed.
///
/// * `|p|/s_max ∈ [threshold, pf]`: power-factor wedge, `|p| tan(acos pf)`.
/// * `|p|/s_max > pf`: apparent-power circle, `√(s_max² − p²)`.
/// * `|p|/s_max < threshold`: constant floor `threshold · s_max · tan(acos pf)`.
pub fn q_capability_with_threshold<T: Scalar>(
    p_inv: T,
    inv: &InverterSpec<T>,
    threshold: T,
) -> Result<T, RuleError> {
    let p = p_inv.abs();
    let tol = T::lit(1e-12) * inv.s_max;
    if p > inv.s_max + tol {
        return Err(RuleError::AboveRating {
            p: p_inv.as_f64(),
            s_max: inv.s_max.as_f64(),
        });
    }
    let p = p.min(inv.s_max);
    let tan_phi = inv.pf_wc.acos().tan();
    let ratio = p / inv.s_max;
    let q = if ratio > inv.pf_wc {
        (inv.s_max * inv.s_max - p * p).max(T::zero()).sqrt()
    } else if ratio >= threshold {
        p * tan_phi
    } else {
        threshold * inv.s_max * tan_phi
    };
    Ok(q)
}

/// Envelope used at one fast step: the policy window for voltage `u`, with
/// the reactive limit taken from the capability at the active output the
/// inverter is heading for (`zeta` pulled into the active window).
pub fn step_envelope<T: Scalar>(
    policy: Policy,
    u: T,
    params: &VoltageRuleParams<T>,
    inv: &InverterSpec<T>,
    zeta: T,
) -> Envelope<T> {
    let p_max = inv.p_max;
    let probe = envelope(policy, u, params, -p_max, p_max, T::zero(), T::zero());
    let p_est = zeta.clamp_to(probe.p_lo, probe.p_hi).clamp_to(-inv.s_max, inv.s_max);
    let q_max = q_capability(p_est, inv).unwrap_or_else(|_| T::zero());
    envelope(policy, u, params, -p_max, p_max, -q_max, q_max)
}

/// Optimal point of the minimum-curtailment problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurtailmentPoint<T> {
    pub p_b: T,
    pub p_curt: T,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("target active power unreachable with the available battery range and generation")]
pub struct CurtailmentInfeasible;

/// Minimum PV curtailment that makes the inverter output hit `p_trgt`:
///
/// `min p_curt  s.t.  p_b − (r − p_curt) = p_trgt,  0 ≤ p_curt ≤ r,
///  p_b ∈ battery.power_range(b_prev, step)`.
///
/// Curtailment falls as `p_b` rises, so the optimum takes the largest
/// admissible battery power.
pub fn min_curtailment_dispatch<T: Scalar>(
    p_trgt: T,
    r: T,
    b_prev: T,
    battery: &BatterySpec<T>,
    step: T,
) -> Result<CurtailmentPoint<T>, CurtailmentInfeasible> {
    let (lo, hi) = battery.power_range(b_prev, step);
    let tol = T::lit(1e-12) * T::one().max(p_trgt.abs()).max(r);
    // p_b ranges over [p_trgt, p_trgt + r] as p_curt goes from r to 0.
    if p_trgt > hi + tol || p_trgt + r < lo - tol {
        return Err(CurtailmentInfeasible);
    }
    let p_b = (p_trgt + r).min(hi).max(lo);
    let p_curt = (p_trgt + r - p_b).clamp_to(T::zero(), r);
    Ok(CurtailmentPoint { p_b, p_curt })
}

/// Outcome of one fast control step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispatchResult<T> {
    pub p_curt: T,
    pub p_b: T,
    /// `p_b − r + p_curt`.
    pub p_inv: T,
    pub q_inv: T,
    pub fallback_used: bool,
}

/// Local inverter output control for one fast step.
///
/// `zeta = f(x_i) − r_i` is the output the slow schedule asks for. If the
/// battery cannot follow it (charge or ramp limit) the battery part is cut
/// back first. An output outside the active window is moved to the nearest
/// window edge with minimum curtailment; when that is unreachable the
/// battery runs flat out towards the edge (charging with all PV curtailed
/// for a positive edge, discharging with none curtailed otherwise). The
/// reactive set-point defaults to zero, moves to the nearest edge of the
/// reactive window, and is finally clipped to what the rating leaves over.
pub fn inverter_control_step<T: Scalar>(
    zeta: T,
    r: T,
    b_prev: T,
    env: &Envelope<T>,
    battery: &BatterySpec<T>,
    inv: &InverterSpec<T>,
    step: T,
) -> DispatchResult<T> {
    let (lo, hi) = battery.power_range(b_prev, step);
    let p_b_sched = (zeta + r).clamp_to(lo, hi);
    let zeta = p_b_sched - r;

    let (p_b, p_curt, fallback_used) = if env.contains_p(zeta) {
        (p_b_sched, T::zero(), false)
    } else {
        let target = if zeta < env.p_lo { env.p_lo } else { env.p_hi };
        match min_curtailment_dispatch(target, r, b_prev, battery, step) {
            Ok(pt) => (pt.p_b, pt.p_curt, false),
            Err(CurtailmentInfeasible) if target > T::zero() => (hi, r, true),
            Err(CurtailmentInfeasible) => (lo, T::zero(), true),
        }
    };
    let p_inv = p_b - r + p_curt;

    let q_default = T::zero();
    let q_target = q_default.clamp_to(env.q_lo, env.q_hi);
    let room = (inv.s_max * inv.s_max - p_inv * p_inv).max(T::zero()).sqrt();
    let q_lim = q_capability(p_inv, inv).map_or(T::zero(), |q| q.min(room));
    let q_inv = q_target.clamp_to(-q_lim, q_lim);

    DispatchResult {
        p_curt,
        p_b,
        p_inv,
        q_inv,
        fallback_used,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::battery_energy_from_power;
    use proptest::prelude::*;

    fn params() -> VoltageRuleParams<f64> {
        VoltageRuleParams::default()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn zone_examples() {
        let p = params();
        assert_eq!(classify_zone(1.0, &p), Zone::Z3);
        assert_eq!(classify_zone(0.92, &p), Zone::Z2);
        assert_eq!(classify_zone(1.09, &p), Zone::Z5);
        assert_eq!(classify_zone(0.96, &p), Zone::Z3);
        assert_eq!(classify_zone(1.04, &p), Zone::Z3);
        assert_eq!(classify_zone(1.08, &p), Zone::Z4);
        assert_eq!(classify_zone(0.9199, &p), Zone::Z1);
    }

    #[test]
    fn table_rows() {
        let p = params();
        let e = envelope(Policy::Prc, 1.09, &p, -3.0, 3.0, -1.0, 1.0);
        assert_eq!((e.p_lo, e.p_hi, e.q_lo, e.q_hi), (3.0, 3.0, -1.0, -1.0));
        let e = envelope(Policy::Anrc, 0.90, &p, -3.0, 3.0, -1.0, 1.0);
        assert_eq!((e.p_lo, e.p_hi, e.q_lo, e.q_hi), (-3.0, 0.0, 0.0, 1.0));
        let e = envelope(Policy::Prc, 1.06, &p, -3.0, 3.0, -1.0, 1.0);
        assert!(close(e.p_lo, 1.5));
        let e = envelope(Policy::Hybrid, 0.94, &p, -3.0, 3.0, -1.0, 1.0);
        assert!(close(e.p_hi, 1.5));
        assert!(close(e.q_lo, 0.5));
        let e = envelope(Policy::None, 1.2, &p, -3.0, 3.0, -1.0, 1.0);
        assert_eq!(e, Envelope::full(-3.0, 3.0, -1.0, 1.0));
    }

    #[test]
    fn q_capability_examples() {
        let inv = InverterSpec::<f64>::new(3.0, 0.9);
        assert!(q_capability(3.0, &inv).unwrap().abs() < 1e-12);
        let wedge = 1.5 * (0.9f64).acos().tan();
        assert!((q_capability(1.5, &inv).unwrap() - wedge).abs() < 1e-12);
        assert!((q_capability(1.5, &inv).unwrap() - 0.7264).abs() < 1e-4);
        assert!((q_capability(2.85, &inv).unwrap() - 0.936_749).abs() < 1e-6);
        assert!((q_capability(-2.85, &inv).unwrap() - 0.936_749).abs() < 1e-6);
        let floor = q_capability(0.1, &inv).unwrap();
        assert!((floor - 0.3 * (0.9f64).acos().tan()).abs() < 1e-12);
        assert!(q_capability(3.5, &inv).is_err());
        // threshold exposed
        let q = q_capability_with_threshold(0.45, &inv, 0.2).unwrap();
        assert!((q - 0.6 * (0.9f64).acos().tan()).abs() < 1e-12);
    }

    fn bat(b0: f64) -> BatterySpec<f64> {
        BatterySpec {
            b_min: 0.0,
            b_max: 2.0,
            b_0: b0,
            delta_min: -1.0,
            delta_max: 1.0,
            eta_ch: 1.0,
            eta_dis: 1.0,
        }
    }

    #[test]
    fn curtailment_examples() {
        let step = 1.0 / 60.0;
        let pt = min_curtailment_dispatch(-1.0, 1.0, 1.0, &bat(1.0), step).unwrap();
        assert_eq!((pt.p_b, pt.p_curt), (0.0, 0.0));
        let pt = min_curtailment_dispatch(0.0, 2.0, 2.0, &bat(2.0), step).unwrap();
        assert_eq!((pt.p_b, pt.p_curt), (0.0, 2.0));
        assert_eq!(
            min_curtailment_dispatch(3.0, 1.0, 0.0, &bat(0.0), step),
            Err(CurtailmentInfeasible)
        );
    }

    #[test]
    fn pass_through_in_zone_three() {
        let inv = InverterSpec::<f64>::new(3.0, 0.9);
        let env = envelope(Policy::Prc, 1.0, &params(), -3.0, 3.0, -1.0, 1.0);
        let d = inverter_control_step(-0.5, 1.0, 1.0, &env, &bat(1.0), &inv, 1.0 / 60.0);
        assert_eq!((d.p_inv, d.q_inv, d.p_curt), (-0.5, 0.0, 0.0));
        assert!(!d.fallback_used);
    }

    #[test]
    fn zone_five_prc_falls_back_to_full_charge() {
        let inv = InverterSpec::<f64>::new(2.0, 0.9);
        let env = envelope(Policy::Prc, 1.1, &params(), -2.0, 2.0, -0.5, 0.5);
        assert_eq!((env.p_lo, env.p_hi), (2.0, 2.0));
        let d = inverter_control_step(-1.0, 2.0, 1.0, &env, &bat(1.0), &inv, 1.0 / 60.0);
        assert!(d.fallback_used);
        assert_eq!((d.p_b, d.p_curt, d.p_inv), (1.0, 2.0, 1.0));
    }

    #[test]
    fn zone_one_prc_injects_reactive_up_to_capability() {
        let inv = InverterSpec::<f64>::new(3.0, 0.9);
        let q_cap = q_capability(1.0, &inv).unwrap();
        let mut env = envelope(Policy::Prc, 0.9, &params(), -3.0, 3.0, -q_cap, q_cap);
        env.p_lo = -3.0;
        env.p_hi = 3.0;
        let d = inverter_control_step(-1.0, 1.0, 1.0, &env, &bat(1.0), &inv, 1.0 / 60.0);
        assert_eq!(d.p_inv, -1.0);
        let expected = q_cap.min((9.0f64 - 1.0).sqrt());
        assert!((d.q_inv - expected).abs() < 1e-12);
    }

    #[test]
    fn discharge_fallback_when_target_too_negative() {
        let inv = InverterSpec::<f64>::new(3.0, 0.9);
        let env = Envelope::full(-3.0, -2.5, -1.0, 1.0);
        // only 1 kW of PV and 1 kW of discharge available
        let d = inverter_control_step(0.0, 1.0, 1.0, &env, &bat(1.0), &inv, 1.0 / 60.0);
        assert!(d.fallback_used);
        assert_eq!((d.p_b, d.p_curt, d.p_inv), (-1.0, 0.0, -2.0));
    }

    #[test]
    fn schedule_cut_back_at_full_charge() {
        let inv = InverterSpec::<f64>::new(3.0, 0.9);
        let env = Envelope::full(-3.0, 3.0, -1.0, 1.0);
        let d = inverter_control_step(1.0, 0.0, 2.0, &env, &bat(2.0), &inv, 1.0 / 60.0);
        assert_eq!(d.p_b, 0.0);
        assert_eq!(d.p_inv, 0.0);
    }

    fn nested_policy_strategy() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
        (0.85f64..1.15, 0.01f64..0.06, 0.01f64..0.06, 0.01f64..0.06, 0.5f64..5.0)
    }

    proptest! {
        #[test]
        fn anrc_contains_prc((u, d, gl, gh, p) in nested_policy_strategy()) {
            let params = VoltageRuleParams { u_min: 1.0 - d - gl, u_max: 1.0 + d + gh, delta_perm: d };
            let prc = envelope(Policy::Prc, u, &params, -p, p, -p / 2.0, p / 2.0);
            let anrc = envelope(Policy::Anrc, u, &params, -p, p, -p / 2.0, p / 2.0);
            let hyb = envelope(Policy::Hybrid, u, &params, -p, p, -p / 2.0, p / 2.0);
            prop_assert!(anrc.contains(&prc, 1e-12));
            prop_assert_eq!((hyb.p_lo, hyb.p_hi), (anrc.p_lo, anrc.p_hi));
            prop_assert_eq!((hyb.q_lo, hyb.q_hi), (prc.q_lo, prc.q_hi));
            for e in [prc, anrc, hyb] {
                prop_assert!(e.p_lo <= e.p_hi && e.q_lo <= e.q_hi);
                prop_assert!(e.p_lo >= -p - 1e-12 && e.p_hi <= p + 1e-12);
            }
        }

        #[test]
        fn curtailment_beats_grid_search(p_trgt in -3.0f64..3.0, r in 0.0f64..3.0, b0 in 0.0f64..=2.0) {
            let b = bat(b0);
            let step = 1.0 / 60.0;
            let (lo, hi) = b.power_range(b0, step);
            let grid_best = (0..=3000)
                .map(|k| (k as f64 * 1e-3).min(r))
                .filter(|&c| {
                    let pb = p_trgt + r - c;
                    pb >= lo - 1e-12 && pb <= hi + 1e-12
                })
                .fold(f64::INFINITY, f64::min);
            match min_curtailment_dispatch(p_trgt, r, b0, &b, step) {
                Ok(pt) => {
                    prop_assert!(pt.p_curt <= grid_best + 1e-12);
                    prop_assert!((pt.p_b - (r - pt.p_curt) - p_trgt).abs() < 1e-12);
                }
                Err(_) => prop_assert!(grid_best.is_infinite()),
            }
        }

        #[test]
        fn dispatch_identity_and_rating(
            zeta in -4.0f64..4.0, r in 0.0f64..3.0, b0 in 0.0f64..=2.0, u in 0.85f64..1.15,
            s in 1.0f64..4.0, pol in 0usize..4,
        ) {
            let inv = InverterSpec::new(s, 0.9);
            let env = step_envelope(Policy::ALL[pol], u, &params(), &inv, zeta);
            let b = bat(b0);
            let step = 1.0 / 60.0;
            let d = inverter_control_step(zeta, r, b0, &env, &b, &inv, step);
            prop_assert_eq!(d.p_inv, d.p_b - r + d.p_curt);
            prop_assert!((d.p_inv * d.p_inv + d.q_inv * d.q_inv).sqrt() <= s + 1e-9);
            prop_assert!(d.p_curt >= 0.0 && d.p_curt <= r);
            let next = b0 + battery_energy_from_power(d.p_b, &b, step);
            prop_assert!(next >= -1e-12 && next <= 2.0 + 1e-12);
        }
    }
}

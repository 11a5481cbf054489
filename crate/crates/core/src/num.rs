//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point type the whole library is generic over: `f32` or `f64`.
///
/// The associated tolerances are chosen per precision; the `f64` values are
/// the ones the numerical contracts are stated in.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Internal primal feasibility tolerance of the simplex solver.
    const FEAS_TOL: f64;
    /// Tolerance reported to callers for primal feasibility of an optimum.
    const EXTERNAL_TOL: f64;
    /// Smallest pivot magnitude accepted by the ratio test.
    const PIVOT_TOL: f64;
    /// Entries of magnitude below this are flushed to zero in the tableau.
    const DROP_TOL: f64;
    /// Power-mismatch target of the radial power flow (p.u.).
    const PF_MISMATCH_TOL: f64;
    /// Successive voltage-change target of the radial power flow (p.u.).
    const PF_STEP_TOL: f64;

    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Converts to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn pos_part(self) -> Self {
        self.max(Self::zero())
    }

    #[inline]
    fn neg_part(self) -> Self {
        (-self).max(Self::zero())
    }

    #[inline]
    fn clamp_to(self, lo: Self, hi: Self) -> Self {
        self.max(lo).min(hi)
    }
}

impl Scalar for f64 {
    const FEAS_TOL: f64 = 1e-9;
    const EXTERNAL_TOL: f64 = 1e-7;
    const PIVOT_TOL: f64 = 1e-9;
    const DROP_TOL: f64 = 1e-13;
    const PF_MISMATCH_TOL: f64 = 1e-8;
    const PF_STEP_TOL: f64 = 1e-10;
}

impl Scalar for f32 {
    const FEAS_TOL: f64 = 1e-5;
    const EXTERNAL_TOL: f64 = 1e-3;
    const PIVOT_TOL: f64 = 1e-5;
    const DROP_TOL: f64 = 1e-7;
    const PF_MISMATCH_TOL: f64 = 1e-5;
    const PF_STEP_TOL: f64 = 1e-6;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parts_split_sign() {
        assert_eq!(2.5f64.pos_part(), 2.5);
        assert_eq!(2.5f64.neg_part(), 0.0);
        assert_eq!((-1.5f64).neg_part(), 1.5);
        assert_eq!((-1.5f32).pos_part(), 0.0);
    }

    #[test]
    fn clamp_is_ordered() {
        assert_eq!(5.0f64.clamp_to(0.0, 1.0), 1.0);
        assert_eq!((-5.0f64).clamp_to(0.0, 1.0), 0.0);
    }
}

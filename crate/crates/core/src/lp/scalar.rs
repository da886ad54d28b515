use std::fmt::Debug;

use num::traits::{Num, Signed, ToPrimitive};
use num::BigRational;

/// Field the simplex runs over. Floating point uses tolerances; exact
/// rationals compare against zero.
pub trait LpScalar: Clone + Debug + PartialOrd + Num + Signed {
    const EXACT: bool;

    /// Exact conversion for rationals (every finite `f64` is a dyadic
    /// rational), identity for floats.
    fn from_f64(v: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn to_rational(&self) -> Option<BigRational>;

    /// Smallest pivot magnitude accepted in the ratio test.
    fn pivot_tol() -> Self;

    /// Reduced-cost threshold for optimality.
    fn opt_tol() -> Self;

    /// Phase-one infeasibility threshold.
    fn feas_tol() -> Self;
}

impl LpScalar for f64 {
    const EXACT: bool = false;

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Option<BigRational> {
        None
    }

    fn pivot_tol() -> Self {
        1e-10
    }

    fn opt_tol() -> Self {
        1e-11
    }

    fn feas_tol() -> Self {
        1e-10
    }
}

impl LpScalar for BigRational {
    const EXACT: bool = true;

    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("LP data is validated finite")
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }

    fn pivot_tol() -> Self {
        num::Zero::zero()
    }

    fn opt_tol() -> Self {
        num::Zero::zero()
    }

    fn feas_tol() -> Self {
        num::Zero::zero()
    }
}

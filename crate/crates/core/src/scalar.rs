//! Floating point abstraction shared by kernels, estimators and the exponent formulas.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// f32 or f64.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Never fails for the finite constants used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("representable count")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sentinel for an infinite mixing or covariance size.
///
/// Every piecewise exponent formula treats any value above its top threshold identically, so the
/// largest finite value behaves as +∞ without producing NaN in products such as `q * v`.
#[inline]
pub fn infinite_size<S: Scalar>() -> S {
    S::max_value()
}

//! Floating point scalar abstraction shared by the geometry, LP and mechanism layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the planner math runs on: `f32` or `f64`.
///
/// Tolerances scale with the precision of the type.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Absolute residual tolerance for constraint feasibility.
    fn feasibility_tol() -> Self;
    /// Pivot magnitude below which a tableau entry counts as zero.
    fn pivot_tol() -> Self;
    /// Relative tolerance of orientation tests.
    fn collinear_tol() -> Self;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn feasibility_tol() -> Self {
        1e-9
    }
    fn pivot_tol() -> Self {
        1e-11
    }
    fn collinear_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn feasibility_tol() -> Self {
        1e-3
    }
    fn pivot_tol() -> Self {
        1e-5
    }
    fn collinear_tol() -> Self {
        1e-6
    }
}

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the game arithmetic is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances that are quoted in absolute
/// terms (normalization, identity checks) only hold at `f64` precision; the
/// `f32` instantiation is useful for fast approximate self-play.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal. Every finite `f64` maps to some value of
    /// the implementing types, so this never fails for them.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Tolerance for "sums to one" checks: 1e-12, widened to a few ulps of
    /// the scalar type when that is coarser.
    #[inline]
    fn normalization_tol(len: usize) -> Self {
        let ulps = Self::epsilon() * Self::lit(4.0 * (len.max(1) as f64));
        ulps.max(Self::lit(1e-12))
    }

    /// Smallest probability used inside logarithms. Rows are never mutated
    /// with this floor; it only guards `ln(0)` at evaluation time.
    #[inline]
    fn log_floor() -> Self {
        Self::lit(1e-300).max(Self::min_positive_value())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

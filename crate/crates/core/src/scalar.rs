//! Floating-point abstraction shared by the numeric modules.

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

/// Real scalar used by the statistics, fitting and Markov code.
///
/// Implemented for `f32` and `f64`. Dataset-facing code (coordinates,
/// distances of stored records) is fixed to `f64`; the pure math is generic.
pub trait Scalar:
    'static
    + Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
{
    /// Converts an `f64` literal. Panics only for values the type cannot hold,
    /// which never happens for the constants used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used for fixed-point iterations: `1e-12`, or a few ulps when
    /// the type cannot resolve that.
    #[inline]
    fn fixed_point_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(8.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Total order for finite scalars; NaN sorts last.
#[inline]
pub(crate) fn total_cmp<S: Scalar>(a: &S, b: &S) -> std::cmp::Ordering {
    a.partial_cmp(b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the training core and diagnostics are generic over.
///
/// Implemented for `f32` and `f64`. Experiments run in `f64`; `f32` is
/// available for memory-constrained inference.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Short type tag written into checkpoints.
    const NAME: &'static str;

    /// Absolute tolerance for internal consistency checks (risk identities,
    /// decomposition sums).
    fn consistency_tolerance() -> Self;

    /// Converts an `f64` literal. Infallible for the implemented types.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn consistency_tolerance() -> Self {
        1e-4
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn consistency_tolerance() -> Self {
        1e-9
    }
}

/// Lower clamp applied to probabilities before taking logarithms.
pub const LOG_CLIP: f64 = 1e-12;

/// `ln(max(p, LOG_CLIP))`.
#[inline]
pub fn clamped_ln<T: Scalar>(p: T) -> T {
    p.max(T::lit(LOG_CLIP)).ln()
}

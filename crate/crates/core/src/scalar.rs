//! Floating-point scalar abstraction used by every numeric kernel.
//!
//! All core types are generic over [`Scalar`] so the same code runs in `f32`
//! and `f64`; the crate root exports `f64` aliases for the common case.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar the numeric kernels are generic over.
///
/// Everything needed is already provided by `num-traits`; this trait exists to
/// bundle the bounds and to add infallible conversions from the literal types
/// used in defaults and tolerances.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + num_traits::ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant (tolerance, coordinate, literal) to `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant must convert")
    }

    /// Converts a count to `Self` (exact for the grid sizes in scope).
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize must convert to float")
    }

    /// Lossy view as `f64` for reports and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

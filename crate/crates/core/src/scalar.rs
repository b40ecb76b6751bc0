//! The real scalar abstraction every numerical routine is generic over.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
///
/// All tolerances quoted in the tests are for `f64`; `f32` builds work but
/// only reach single-precision agreement.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + std::fmt::Debug + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    /// `2^e` for a possibly negative integer exponent.
    #[inline]
    fn pow2(e: i32) -> Self {
        Self::lit(2f64.powi(e))
    }
}

impl Real for f32 {}
impl Real for f64 {}

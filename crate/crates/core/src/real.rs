use core::fmt::{Debug, Display};
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating point scalar used throughout the numerical kernels.
///
/// Implemented for `f32` (training and inference) and `f64` (gradient
/// checking).
pub trait Real:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant, rounding for narrower types.
    fn lit(v: f64) -> Self;
    fn as_f64(self) -> f64;

    fn of_f32(v: f32) -> Self {
        Self::lit(v as f64)
    }

    fn as_f32(self) -> f32 {
        self.as_f64() as f32
    }

    fn of_usize(v: usize) -> Self {
        Self::lit(v as f64)
    }

    /// `exp`, `tanh` and `ln` from `libm`, so results do not depend on
    /// whether the platform math library is linked.
    fn pexp(self) -> Self;
    fn ptanh(self) -> Self;
    fn pln(self) -> Self;

    fn sigmoid(self) -> Self {
        if self >= Self::zero() {
            Self::one() / (Self::one() + (-self).pexp())
        } else {
            let e = self.pexp();
            e / (Self::one() + e)
        }
    }
}

impl Real for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn pexp(self) -> Self {
        libm::expf(self)
    }
    #[inline]
    fn ptanh(self) -> Self {
        libm::tanhf(self)
    }
    #[inline]
    fn pln(self) -> Self {
        libm::logf(self)
    }
}

impl Real for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn pexp(self) -> Self {
        libm::exp(self)
    }
    #[inline]
    fn ptanh(self) -> Self {
        libm::tanh(self)
    }
    #[inline]
    fn pln(self) -> Self {
        libm::log(self)
    }
}

//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the library is generic over (`f32` or `f64`).
///
/// Besides the usual `num-traits` bounds it carries the one special function
/// the kernels need, so that callers never have to know which precision the
/// Bessel routine was evaluated in.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Bessel function of the first kind, order zero.
    fn bessel_j0(self) -> Self;

    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts a count or index into this scalar.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Widens to `f64` for reporting and serialization.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    #[inline]
    fn bessel_j0(self) -> Self {
        libm::j0(self)
    }
}

impl Real for f32 {
    #[inline]
    fn bessel_j0(self) -> Self {
        libm::j0f(self)
    }
}

/// Complex amplitude over a real scalar.
pub type Cplx<T> = Complex<T>;

/// `exp(i * phase)`.
#[inline]
pub fn cis<T: Real>(phase: T) -> Cplx<T> {
    Complex::new(phase.cos(), phase.sin())
}

/// Trapezoidal weights for `n` uniform nodes with spacing `step`.
pub fn trapezoid_weights<T: Real>(n: usize, step: T) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![T::zero()],
        _ => {
            let half = step / T::lit(2.0);
            let mut w = vec![step; n];
            w[0] = half;
            w[n - 1] = half;
            w
        }
    }
}

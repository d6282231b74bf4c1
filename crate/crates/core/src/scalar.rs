//! Scalar abstractions.
//!
//! Tensor algebra only needs a field with an ordering, so it is written
//! against [`Scalar`] and works for `f32`, `f64` and exact rationals.
//! Everything that differentiates, takes logarithms or square roots is
//! written against [`Real`].

use std::fmt::Debug;

use num_rational::Rational64;
use std::ops::Neg;

use num_traits::{Float, FloatConst, FromPrimitive, Num};

/// An ordered field element.
pub trait Scalar:
    Num + Neg<Output = Self> + Copy + PartialOrd + Debug + Send + Sync + 'static
{
    /// Whether `a` and `b` agree to within the rounding noise expected for
    /// quantities of magnitude `scale`. Exact types compare for equality.
    fn close(a: Self, b: Self, scale: Self) -> bool;

    fn two() -> Self {
        Self::one() + Self::one()
    }
}

macro_rules! impl_float_scalar {
    ($t:ty, $tol:expr) => {
        impl Scalar for $t {
            fn close(a: Self, b: Self, scale: Self) -> bool {
                (a - b).abs() <= $tol * scale.abs().max(1.0)
            }
        }
    };
}

impl_float_scalar!(f32, 1e-5);
impl_float_scalar!(f64, 1e-12);

impl Scalar for Rational64 {
    fn close(a: Self, b: Self, _scale: Self) -> bool {
        a == b
    }
}

/// Floating-point scalar used by every analytic and numerical routine.
pub trait Real: Scalar + Float + FloatConst + FromPrimitive {}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `S`.
#[inline]
pub fn lit<S: Real>(x: f64) -> S {
    S::from_f64(x).expect("literal representable in scalar type")
}

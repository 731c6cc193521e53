//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::{ComplexField, RealField};
use num_complex::Complex;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating point type the laboratory can run on (`f32` or `f64`).
///
/// Method names of `RealField` and `num_traits::Signed` overlap (`abs`,
/// `signum`), so the helpers below are the preferred spelling in generic code.
pub trait Real:
    RealField
    + Copy
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn magnitude(self) -> Self {
        ComplexField::abs(self)
    }

    fn finite(self) -> bool {
        ComplexField::is_finite(&self)
    }

    /// Machine epsilon.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}
impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Complex number over a [`Real`] scalar.
pub type C<T> = Complex<T>;

/// `e^{iθ}`.
pub fn cis<T: Real>(theta: T) -> C<T> {
    C::new(theta.cos(), theta.sin())
}

/// Modulus of a complex number, overflow-safe.
pub fn cabs<T: Real>(z: C<T>) -> T {
    z.re.hypot(z.im)
}

pub fn cfinite<T: Real>(z: C<T>) -> bool {
    z.re.finite() && z.im.finite()
}

//! Scalar abstraction for the numeric core.
//!
//! Every numerical routine in this crate is generic over a floating-point
//! scalar implementing [`Real`]. The concrete aliases at the crate root
//! (`CMat`, `State`, …) fix `f64`, which is what all shipped tolerances are
//! calibrated for; `f32` instantiations are exercised in tests on the
//! algebraic identities that survive single precision.
//!
//! Quantities that are exact by construction — generalized-Pauli exponents
//! and their phases — are *not* represented in floating point at all; see
//! the symbolic word types in [`crate::pauli`], which carry integers mod d.

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
///
/// The bounds cover arithmetic (`Float`, `NumAssign`), mathematical
/// constants (`FloatConst`), conversion from literal constants baked into
/// algorithms (`FromPrimitive`), reductions (`Sum`), diagnostics (`Debug`,
/// `Display`), and thread-safe sharing for parallel sweeps.
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` constant. Panics only if the constant is not
    /// representable, which cannot happen for the finite literals used here.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    /// The complex unit `0 + 1i` over this scalar.
    #[inline]
    fn i() -> Complex<Self> {
        Complex::new(Self::zero(), Self::one())
    }

    /// `exp(iθ)` over this scalar.
    #[inline]
    fn cis(theta: Self) -> Complex<Self> {
        Complex::new(theta.cos(), theta.sin())
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex number over a [`Real`] scalar.
pub type C<R> = Complex<R>;

/// Real part `x` promoted to a complex number.
#[inline]
pub fn re<R: Real>(x: R) -> C<R> {
    Complex::new(x, R::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cis_matches_euler() {
        let z = f64::cis(std::f64::consts::FRAC_PI_2);
        assert!((z.re).abs() < 1e-15 && (z.im - 1.0).abs() < 1e-15);
        let w = f32::cis(std::f32::consts::PI);
        assert!((w.re + 1.0).abs() < 1e-6 && w.im.abs() < 1e-6);
    }

    #[test]
    fn constant_conversion_roundtrips() {
        assert_eq!(f64::of(2.5), 2.5);
        assert_eq!(f32::of(0.25), 0.25f32);
    }
}

//! Scalar abstraction for the floating-point stages of the pipeline.
//!
//! Depth frames and height images are integer millimeter grids; everything
//! downstream of them (geometry, features, the classifier, tracking) is
//! generic over [`Real`] so it can run in `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
///
/// `Display`/`FromStr` must round-trip exactly, which holds for the primitive
/// float types and is relied on by the model file format.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + FromStr + Send + Sync + 'static
{
    /// Lossy conversion from `f64`.
    #[inline]
    fn of(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 representable")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numerically stable logistic function, kept strictly inside `(0, 1)`.
pub fn sigmoid<T: Real>(x: T) -> T {
    let one = T::one();
    let s = if x >= T::zero() {
        one / (one + (-x).exp())
    } else {
        let e = x.exp();
        e / (one + e)
    };
    // largest value below one is 1 - eps/2
    s.max(T::min_positive_value()).min(one - T::epsilon() / T::of(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_range() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(40.0f64) < 1.0);
        assert!(sigmoid(-700.0f64) > 0.0);
        assert!(sigmoid(3.0f32) > sigmoid(2.0f32));
    }
}

//! Scalar abstraction shared by the signal-processing and model code.
//!
//! Everything numeric in this crate is written against [`Scalar`], which is
//! implemented for `f32` and `f64`. Feature extraction and training default to
//! `f32`; oracles and gradient checks run in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + FftNum
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant, rounding if the target is narrower.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 is representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::lit(v as f64)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn as_f32(self) -> f32 {
        ToPrimitive::to_f32(&self).unwrap_or(f32::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts a slice between scalar types.
pub fn cast_slice<A: Scalar, B: Scalar>(src: &[A]) -> Vec<B> {
    src.iter().map(|v| B::lit(v.as_f64())).collect()
}

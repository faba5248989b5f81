//! Floating-point abstraction shared by the signal-processing modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Real scalar the engine can run on: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + FftNum
    + Default
    + Debug
    + Display
    + Send
    + Sync
{
    /// Lossy conversion from an `f64` literal or config value.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Real")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::infinity)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc<T: Real>(x: T) -> T {
    let px = T::PI() * x;
    if px.abs() < T::lit(1e-8) {
        T::one() - px * px / T::lit(6.0)
    } else {
        px.sin() / px
    }
}

//! Scalar abstraction for the floating-point kernels.
//!
//! Geometry and height fields are exact integers throughout the crate; only
//! Green tables, Boltzmann weights and Monte Carlo accumulators are real
//! valued. Those are generic over [`Real`] so the same code runs in `f32`
//! or `f64` (the shipped aliases at the crate root use `f64`).

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable by every numeric routine in this crate.
pub trait Real:
    Float + FloatConst + NumAssign + FromPrimitive + ToPrimitive + Sum<Self> + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` literals and counters.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any Real")
    }

    /// Conversion from integer counts (sample sizes, lattice sizes).
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to any Real")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + fmt::Debug
        + fmt::Display
        + Send
        + Sync
        + 'static
{
}

//! Scalar abstraction for the numeric kernels.
//!
//! All ratio metrics, ICC, nested averaging and bootstrap intervals are
//! generic over a floating-point scalar so the same code runs at f32 or
//! f64. The shipped pipeline uses [`crate::Scalar`] (f64).

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: f32 or f64.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless-enough conversion from an integer count.
    ///
    /// Counts in this crate stay far below 2^53, so the f64 path is exact.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

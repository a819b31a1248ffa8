//! Scalar abstraction for the numeric core.
//!
//! Everything in [`crate::matrix`] and [`crate::nn`] is generic over [`Real`],
//! so the same code runs at f32 or f64. The rest of the crate works with the
//! f64 aliases exported from the crate root.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the math core.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + Default + Send + Sync + std::iter::Sum + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 value representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize value representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

//! Scalar abstraction for the numeric pipeline.
//!
//! Everything downstream of the EDF parser (feature extraction, the network,
//! metrics, attribution) is generic over [`Scalar`] so the same code runs in
//! f64 (the precision all tests and gradient checks use) or f32 (faster full
//! runs). Concrete aliases live at the crate root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from f64, used for constants and config values.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 -> scalar")
    }

    /// Lossless widening to f64 for reporting and serialization.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar -> f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

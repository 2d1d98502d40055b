use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::ToPrimitive;

/// Floating point scalar used throughout the crate (`f32` or `f64`).
pub trait Real: RealField + Copy + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Tolerance `x`, raised to a few ulps when `Self` cannot resolve it.
    #[inline]
    fn tol(x: f64) -> Self {
        Self::lit(x.max(4.0 * Self::default_epsilon().as_f64()))
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

//! Floating-point scalar abstraction shared by every table, message and belief.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

/// floating point: f32 or f64
pub trait Scalar: Float + FromPrimitive + NumCast + Debug + Display + Default + Sum + Send + Sync + 'static {
    /// Converts an `f64` literal, panicking only for values the type cannot hold at all.
    fn lit(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

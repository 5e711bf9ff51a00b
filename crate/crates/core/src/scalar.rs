use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Pixel scalar used by every numeric kernel: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Send + Sync + 'static
{
    fn half() -> Self;

    /// Lossy conversion from `f64`, used for constants and coordinates.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every float scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance under which two accumulated sums are considered equal.
    fn plateau_eps() -> Self;
}

impl Scalar for f32 {
    fn half() -> Self {
        0.5
    }

    fn plateau_eps() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn half() -> Self {
        0.5
    }

    fn plateau_eps() -> Self {
        1e-10
    }
}

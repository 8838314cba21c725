//! Scalar abstraction shared by the numeric modules.
//!
//! Everything that accumulates contributions, objectives or payoffs is
//! generic over [`Scalar`], so the same engine runs in `f64` (the default
//! used by the harness) or `f32`. Random draws are always produced in `f64`
//! and converted with [`Scalar::of`], which keeps generated tables identical
//! up to the target type's rounding.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or draw.
    fn of(value: f64) -> Self;

    /// Widening conversion used for emission and statistics.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Mean of a non-empty slice; zero for an empty one.
    fn mean_of(values: &[Self]) -> Self {
        if values.is_empty() {
            return Self::zero();
        }
        values.iter().copied().sum::<Self>() / Self::of(values.len() as f64)
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(value: f64) -> Self {
        value
    }
}

impl Scalar for f32 {
    #[inline]
    fn of(value: f64) -> Self {
        value as f32
    }
}

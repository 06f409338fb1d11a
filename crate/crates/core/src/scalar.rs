use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar the numeric core is generic over.
///
/// Implemented for `f32` and `f64`. Feature extraction, discretization and
/// every classifier are written against this trait; the crate root exposes
/// `f64` aliases for the common case.
pub trait Scalar:
    Float
    + FftNum
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; used for constants and for casting timeline data.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to every float scalar")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize converts to every float scalar")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

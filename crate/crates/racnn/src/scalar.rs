use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumCast};

/// Element type for all numeric code in the crate.
///
/// `f32` is the production width; `f64` exists so finite-difference
/// gradient checks have enough precision to be meaningful. Both widths run
/// the same code paths via monomorphization.
pub trait Scalar: Float + NumCast + Sum + Debug + Default + Send + Sync + 'static {
    /// Bit width, reported by benchmarks so comparisons are honest.
    const BITS: u32;
}

impl Scalar for f32 {
    const BITS: u32 = 32;
}

impl Scalar for f64 {
    const BITS: u32 = 64;
}

/// Converts an `f64` literal or intermediate into the working scalar type.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    <T as NumCast>::from(v).expect("finite f64 converts to any Scalar")
}

/// Widens a scalar to `f64` for reporting and accumulation.
#[inline]
pub fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().expect("Scalar converts to f64")
}

//! Scalar abstraction for probability and statistics arithmetic.
//!
//! The analytic layer (revealing probabilities, bound calculators, trial
//! summaries) is written once over [`Scalar`] and instantiated at `f32`/`f64`
//! for simulation-scale work or at [`crate::Exact`] (big rational) where a
//! result must be exact.

use num_traits::{FromPrimitive, Num};

pub trait Scalar: Num + FromPrimitive + PartialOrd + Clone {}

impl<T: Num + FromPrimitive + PartialOrd + Clone> Scalar for T {}

/// `n / d` in `T`. Exact for rational scalars, correctly rounded for floats.
pub fn ratio<T: Scalar>(n: u64, d: u64) -> T {
    from_count::<T>(n) / from_count::<T>(d)
}

/// Lossless-enough conversion of a counter into the scalar type.
pub fn from_count<T: Scalar>(n: u64) -> T {
    T::from_u64(n).expect("count representable in scalar type")
}

//! Numeric abstraction shared by every solver.
//!
//! All solvers, oracles and generators are written against [`Scalar`] so that
//! the same code runs in `f64` (the default used by the CLI) and `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A real number type usable by the solvers: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal, panicking only if the target cannot hold
    /// any finite value (never the case for `f32`/`f64`).
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Natural log of the largest finite value; exponents above this overflow.
    #[inline]
    fn ln_max() -> Self {
        Self::max_value().ln()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable `ln(Σ exp(x_i))`. Returns `-inf` for an empty input.
pub fn log_sum_exp<S: Scalar, I>(xs: I) -> S
where
    I: IntoIterator<Item = S>,
    I::IntoIter: Clone,
{
    let it = xs.into_iter();
    let max = it.clone().fold(S::neg_infinity(), |m, x| m.max(x));
    if max == S::neg_infinity() {
        return max;
    }
    let sum: S = it.map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

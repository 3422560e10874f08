//! Scalar abstraction shared by the search tree, critic scores and the
//! retrieval index.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumCast
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("literal representable in scalar type")
    }

    /// Lossless widening used for reporting.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Converts a count.
    fn from_count(n: u64) -> Self {
        <Self as NumCast>::from(n).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

//! Scalar abstraction shared by every solver in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the models and solvers are generic over (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// A comparison tolerance of `x`, floored at a small multiple of machine
    /// epsilon so that `f64` tolerances stay meaningful for `f32`.
    fn tol(x: f64) -> Self {
        Self::lit(x).max(Self::epsilon() * Self::lit(64.0))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Equality tolerance used for rewards, block probabilities and tie-breaking.
pub const EQ_TOL: f64 = 1e-12;

/// Tolerance on transition row sums.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Sup-norm distance between two equal-length vectors.
pub fn sup_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()))
}

//! Floating-point scalar abstraction shared by the vector code paths.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};
use std::str::FromStr;

/// f32 or f64.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + FromStr
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless for f64, rounds for f32.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Scalar")
    }

    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to any Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Inner product of two equal-length slices.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc += *x * *y;
    }
    acc
}

/// Squared Euclidean distance.
#[inline]
pub fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        let d = *x - *y;
        acc += d * d;
    }
    acc
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Weighted mean of `(vector, weight)` pairs, accumulated in iteration order.
///
/// Every centroid in the crate goes through this function so that two
/// representations built from the same members in the same order are
/// bit-identical. Returns `None` when the total weight is zero.
pub fn weighted_mean<'a, T, I>(dim: usize, members: I) -> Option<Vec<T>>
where
    T: Scalar,
    I: IntoIterator<Item = (&'a [T], T)>,
{
    let mut acc = vec![T::zero(); dim];
    let mut total = T::zero();
    for (v, w) in members {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += w * *x;
        }
        total += w;
    }
    if total == T::zero() {
        return None;
    }
    for a in acc.iter_mut() {
        *a /= total;
    }
    Some(acc)
}

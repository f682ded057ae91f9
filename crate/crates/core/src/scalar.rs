//! Floating-point scalar abstraction shared by every solver.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the projection machinery is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Relative band used to decide that a simplex closed-form value is an exact zero.
    const BREAKPOINT_TOL: f64;
    /// Relative floor below which a quantity is treated as vanishing (e.g. `eta` in the
    /// Jacobian case split).
    const DEGENERACY_TOL: f64;

    /// Converts an `f64` literal; panics only for values the type cannot represent at all.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Scalar for f64 {
    const BREAKPOINT_TOL: f64 = 1e-10;
    const DEGENERACY_TOL: f64 = 1e-10;
}

impl Scalar for f32 {
    const BREAKPOINT_TOL: f64 = 1e-5;
    const DEGENERACY_TOL: f64 = 1e-5;
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp = self.comp + ((self.sum - t) + v);
        } else {
            self.comp = self.comp + ((v - t) + self.sum);
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator of scalars.
pub fn compensated_sum<T: Scalar, I: IntoIterator<Item = T>>(values: I) -> T {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Compensated inner product.
pub fn dot<T: Scalar>(u: &[T], v: &[T]) -> T {
    compensated_sum(u.iter().zip(v).map(|(&p, &q)| p * q))
}

pub(crate) fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}

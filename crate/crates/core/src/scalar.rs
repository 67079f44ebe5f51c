//! Numeric traits the algorithms are generic over.
//!
//! Random-walk probabilities only need field arithmetic, so [`Probability`]
//! admits exact rationals as well as floats. The optimizer needs `exp`/`ln`
//! and is bounded by [`Real`].

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Field-like scalar usable for walk probabilities: f32, f64 or a rational.
pub trait Probability:
    Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync
{
}

impl<T> Probability for T where
    T: Num + Clone + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync
{
}

/// Floating-point scalar: f32 or f64.
pub trait Real: Probability + Float + Copy + std::iter::Sum {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

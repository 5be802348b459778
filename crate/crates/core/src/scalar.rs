//! Floating-point scalar abstraction shared by every numeric routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar type the models and solvers are generic over.
///
/// Implemented for `f32` and `f64`. Text serialization uses the shortest
/// representation that parses back to the identical value.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Parses a decimal token, rejecting anything that is not a finite number.
    fn parse_finite(token: &str) -> Option<Self>;

    /// Round-trip exact decimal rendering.
    fn to_token(self) -> String {
        format!("{self:?}")
    }

    /// Lossy conversion from an `f64` constant.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_scalar {
    ($($t:ty)*) => ($(
        impl Scalar for $t {
            fn parse_finite(token: &str) -> Option<Self> {
                token.trim().parse::<$t>().ok().filter(|v| v.is_finite())
            }
        }
    )*)
}

impl_scalar!(f32 f64);

/// Dot product of two equal-length slices.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub(crate) fn sq_norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a)
}

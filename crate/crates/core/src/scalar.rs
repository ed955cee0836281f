use std::fmt::{Debug, Display};

use num_traits::Float;

/// Floating-point scalar the numeric kernels are generic over.
///
/// The documented accuracy targets (1e-13 on the incomplete gamma, 1e-12 on
/// window confidences) hold for `f64`; `f32` works but resolves only to its
/// own epsilon.
pub trait Real: Float + Debug + Display + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Shorthand for pulling an `f64` constant into the working scalar type.
#[inline]
pub(crate) fn cast<T: Real, S: num_traits::ToPrimitive>(x: S) -> T {
    T::from(x).expect("numeric constant representable in scalar type")
}

/// Restrict a probability-valued result to [0, 1] after rounding.
#[inline]
pub(crate) fn clamp01<T: Real>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

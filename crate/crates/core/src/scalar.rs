//! Floating point abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used by the simulator, frequency analysis, feature extraction
/// and the simplex optimizer: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Trapezoidal integral of uniformly sampled values.
pub fn trapezoid<T: Real>(dt: T, values: impl IntoIterator<Item = T>) -> T {
    let mut iter = values.into_iter();
    let Some(first) = iter.next() else {
        return T::zero();
    };
    let mut sum = T::zero();
    let mut prev = first;
    for v in iter {
        sum = sum + (prev + v);
        prev = v;
    }
    sum * dt * T::lit(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_of_line_is_exact() {
        let v: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        assert!((trapezoid(0.1, v) - 0.5).abs() < 1e-12);
        assert_eq!(trapezoid(0.1f32, std::iter::empty()), 0.0);
        assert_eq!(trapezoid(0.1f64, [3.0]), 0.0);
    }
}

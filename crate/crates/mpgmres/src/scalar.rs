//! Floating-point widths and the precision-generic scalar trait.
//!
//! Two widths are supported: `High` (IEEE binary64) and `Low` (IEEE binary32).
//! Low-to-high conversion is exact; high-to-low rounds to nearest and is
//! checked for range overflow where it matters.

use crate::error::{Error, Result};

/// Storage width of a floating-point value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Width {
    /// 32-bit IEEE single precision.
    Low,
    /// 64-bit IEEE double precision.
    High,
}

impl Width {
    pub fn bytes(self) -> u64 {
        match self {
            Width::Low => 4,
            Width::High => 8,
        }
    }
}

impl std::fmt::Display for Width {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Width::Low => write!(f, "low"),
            Width::High => write!(f, "high"),
        }
    }
}

/// Scalar types the solver kernels are generic over.
pub trait Scalar:
    Copy
    + PartialOrd
    + Send
    + Sync
    + std::fmt::Debug
    + std::fmt::Display
    + num_traits::Float
    + num_traits::NumAssign
    + 'static
{
    const WIDTH: Width;

    /// Round-to-nearest conversion from double precision.
    fn from_f64(v: f64) -> Self;

    /// Exact embedding into double precision.
    fn as_f64(self) -> f64;
}

impl Scalar for f64 {
    const WIDTH: Width = Width::High;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const WIDTH: Width = Width::Low;

    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

/// Round a double through single-precision storage.
#[inline]
pub fn round_low(v: f64) -> f64 {
    v as f32 as f64
}

/// Convert a slice between scalar widths, failing on range overflow
/// instead of silently producing infinities.
pub fn convert_slice<S: Scalar, T: Scalar>(xs: &[S]) -> Result<Vec<T>> {
    xs.iter()
        .map(|&v| {
            let w = T::from_f64(v.as_f64());
            if w.is_infinite() && v.is_finite() {
                Err(Error::Overflow { value: v.as_f64() })
            } else {
                Ok(w)
            }
        })
        .collect()
}

/// Infallible upcast of a slice to double precision.
pub fn upcast_slice<S: Scalar>(xs: &[S]) -> Vec<f64> {
    xs.iter().map(|&v| v.as_f64()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_values_convert_exactly() {
        let hi = vec![1.0f64, 0.5];
        let lo: Vec<f32> = convert_slice(&hi).unwrap();
        assert_eq!(lo, vec![1.0f32, 0.5]);
    }

    #[test]
    fn low_high_low_round_trip_is_identity() {
        let lo = vec![1.5f32, -2.25, 3.0e-5, 1.0e30];
        let hi: Vec<f64> = convert_slice(&lo).unwrap();
        let back: Vec<f32> = convert_slice(&hi).unwrap();
        assert_eq!(back, lo);
    }

    #[test]
    fn sub_single_bits_round_away() {
        let v = 1.0 + 2.0f64.powi(-30);
        let lo: Vec<f32> = convert_slice(&[v]).unwrap();
        assert_eq!(lo[0], 1.0f32);
    }

    #[test]
    fn overflow_is_an_error() {
        let err = convert_slice::<f64, f32>(&[1.0e300]).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
    }

    #[test]
    fn high_low_high_within_one_low_ulp() {
        // deterministic pseudo-random values
        let mut x = 0.1234567890123_f64;
        for _ in 0..1000 {
            x = (x * 997.0 + 0.123).fract() * 2.0 - 1.0;
            let v = x * 1.0e6;
            let r = round_low(v);
            let ulp = (v.abs() as f32).max(f32::MIN_POSITIVE) as f64 * f32::EPSILON as f64;
            assert!((r - v).abs() <= ulp, "v={v} r={r}");
        }
    }
}

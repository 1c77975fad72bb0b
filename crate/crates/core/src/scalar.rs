//! Floating-point scalar abstraction shared by the channel and decoders.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

/// Real scalar used for channel values, LLRs and path metrics: `f32` or `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Real type")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `log(exp(a) + exp(b))`, max-shifted. Two `-inf` inputs give `-inf`.
    #[inline]
    fn log_add_exp(a: Self, b: Self) -> Self {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        if hi == Self::neg_infinity() {
            return hi;
        }
        hi + (lo - hi).exp().ln_1p()
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_exp_matches_direct_sum() {
        let v = f64::log_add_exp(1.0, 2.0);
        assert!((v - (1f64.exp() + 2f64.exp()).ln()).abs() < 1e-14);
        assert_eq!(f64::log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
        assert_eq!(
            f64::log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY),
            f64::NEG_INFINITY
        );
        // no overflow far from zero
        assert!((f64::log_add_exp(1000.0, 1000.0) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((f32::log_add_exp(0.0, 0.0) - 2f32.ln()).abs() < 1e-6);
    }
}

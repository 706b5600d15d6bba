use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used for every learned quantity (Q-values, logits,
/// classifier parameters, sampling weights).
///
/// Implemented for `f32` and `f64`. `Display` must round-trip through `FromStr`
/// so that checkpoints are bit-exact.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Display + LowerExp + FromStr + Debug + Default + Send + Sync + 'static
{
    /// Converts an `f64` hyperparameter into this scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shortest decimal text that parses back to `x` exactly. Magnitudes outside
/// `[1e-5, 1e16)` use exponent notation.
pub fn fmt_real<F: Scalar>(x: F) -> String {
    let a = x.abs();
    if x.is_finite() && a != F::zero() && (a < F::of(1e-5) || a >= F::of(1e16)) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_real_round_trips() {
        for x in [0.0, -0.0, 1.0, -19.999999999999996, 1.3600232051658168e-15, 2.5e-300, 1e16, 0.1, f64::MIN_POSITIVE] {
            let t = fmt_real(x);
            assert_eq!(t.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{t}");
        }
        assert_eq!(fmt_real(0.25), "0.25");
        assert_eq!(fmt_real(1.5e-7), "1.5e-7");
        assert_eq!(fmt_real(f64::NAN), "NaN");
        assert_eq!(fmt_real(0.1f32).parse::<f32>().unwrap(), 0.1f32);
    }
}

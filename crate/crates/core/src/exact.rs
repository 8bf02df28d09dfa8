//! Exact summation of `f64` values.
//!
//! Forest weights are reported as the exact sum of the edge weights, so two
//! forests with the same edge set always report the same weight regardless of
//! the order the edges were added.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{ToPrimitive, Zero};

/// Every finite `f64` is an integer multiple of 2^-1074.
const FRAC_BITS: u32 = 1074;

/// Exact sum of finite `f64` values, stored as an integer count of 2^-1074.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactSum {
    units: BigInt,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `x` exactly. Panics on NaN or infinity.
    pub fn add(&mut self, x: f64) {
        assert!(x.is_finite(), "cannot sum non-finite value {x}");
        if x == 0.0 {
            return;
        }
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as u32;
        let frac = bits & ((1u64 << 52) - 1);
        // value = mant * 2^(shift - 1074)
        let (mant, shift) = if exp == 0 { (frac, 0) } else { (frac | (1u64 << 52), exp - 1) };
        let mag = BigInt::from(mant) << shift;
        if x.is_sign_negative() {
            self.units -= mag;
        } else {
            self.units += mag;
        }
    }

    /// Nearest `f64`, good to 1 ulp.
    pub fn to_f64(&self) -> f64 {
        let bits = self.units.bits();
        if bits == 0 {
            return 0.0;
        }
        // Keep the top 64 bits so the integer conversion is exact.
        let drop = bits.saturating_sub(64);
        let top = (&self.units >> drop).to_f64().unwrap_or(f64::NAN);
        // 2^-1074 itself underflows `powi`, so scale in two halves.
        let half = FRAC_BITS as i32 / 2;
        top * 2f64.powi(drop as i32 - half) * 2f64.powi(-half)
    }
}

impl<'a> FromIterator<&'a f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = &'a f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        iter.into_iter().for_each(|&x| s.add(x));
        s
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// Exact decimal expansion, no trailing zeros.
impl fmt::Display for ExactSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (sign, mag) = self.units.clone().into_parts();
        if sign == Sign::Minus {
            f.write_str("-")?;
        }
        let int_part: BigUint = &mag >> FRAC_BITS;
        let mut rem: BigUint = mag - (&int_part << FRAC_BITS);
        write!(f, "{int_part}")?;
        if rem.is_zero() {
            return Ok(());
        }
        f.write_str(".")?;
        // Each step produces one digit; terminates because the denominator is
        // a power of two.
        let mut digits = String::new();
        while !rem.is_zero() {
            rem *= 10u32;
            let d: BigUint = &rem >> FRAC_BITS;
            rem -= &d << FRAC_BITS;
            digits.push(char::from(b'0' + d.to_u8().unwrap_or(0)));
        }
        f.write_str(&digits)
    }
}

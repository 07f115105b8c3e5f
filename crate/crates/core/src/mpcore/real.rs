use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::{Error, Result};

const LOG2_10: f64 = std::f64::consts::LOG2_10;

/// Binary precision (bits) that carries at least `digits` decimal digits.
pub fn bits_for_digits(digits: u32) -> u32 {
    ((digits.max(1) as f64) * LOG2_10).ceil() as u32 + 1
}

/// Decimal digits guaranteed by a binary precision of `bits`.
pub fn digits_for_bits(bits: u32) -> u32 {
    (((bits.saturating_sub(1)) as f64) / LOG2_10).floor() as u32
}

/// Arbitrary-precision real number with a working precision expressed in
/// decimal digits.
///
/// Every operation is correctly rounded by MPFR. The precision of a binary
/// operation's result is the larger of the operand precisions; operations
/// with `f64` or integer scalars keep the precision of the `Real` operand.
#[derive(Clone, PartialEq, PartialOrd)]
pub struct Real(Float);

impl Real {
    pub fn from_f64(x: f64, digits: u32) -> Self {
        Real(Float::with_val(bits_for_digits(digits), x))
    }

    pub fn from_i64(x: i64, digits: u32) -> Self {
        Real(Float::with_val(bits_for_digits(digits), x))
    }

    pub fn from_integer(x: &Integer, digits: u32) -> Self {
        Real(Float::with_val(bits_for_digits(digits), x))
    }

    pub fn from_rational(x: &Rational, digits: u32) -> Self {
        Real(Float::with_val(bits_for_digits(digits), x))
    }

    pub fn zero(digits: u32) -> Self {
        Self::from_i64(0, digits)
    }

    pub fn one(digits: u32) -> Self {
        Self::from_i64(1, digits)
    }

    pub fn pi(digits: u32) -> Self {
        Real(Float::with_val(bits_for_digits(digits), Constant::Pi))
    }

    /// Parses a decimal string such as `"-1.25e-3"`.
    pub fn parse(s: &str, digits: u32) -> Result<Self> {
        let parsed = Float::parse(s.trim())
            .map_err(|e| Error::Parameter(format!("cannot parse {s:?} as a real number: {e}")))?;
        Ok(Real(Float::with_val(bits_for_digits(digits), parsed)))
    }

    pub(crate) fn from_float(f: Float) -> Self {
        Real(f)
    }

    pub fn as_float(&self) -> &Float {
        &self.0
    }

    pub fn into_float(self) -> Float {
        self.0
    }

    pub fn prec_bits(&self) -> u32 {
        self.0.prec()
    }

    pub fn digits(&self) -> u32 {
        digits_for_bits(self.0.prec())
    }

    /// Same value rounded (or exactly extended) to `digits` digits.
    pub fn with_digits(&self, digits: u32) -> Self {
        Real(Float::with_val(bits_for_digits(digits), &self.0))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.0.is_sign_negative()
    }

    /// Approximate `log10 |x|`; `-inf` for zero.
    pub fn log10_abs(&self) -> f64 {
        if self.0.is_zero() {
            return f64::NEG_INFINITY;
        }
        let (mantissa, exp) = self.0.to_f64_exp();
        mantissa.abs().log10() + exp as f64 * std::f64::consts::LOG10_2
    }

    /// Decimal representation with enough significant digits to reproduce
    /// the binary value exactly when parsed back at the same precision.
    pub fn to_decimal_string(&self) -> String {
        let sig = (self.0.prec() as f64 / LOG2_10).ceil() as usize + 2;
        self.to_decimal_string_sig(sig)
    }

    pub fn to_decimal_string_sig(&self, significant: usize) -> String {
        if self.0.is_zero() {
            return "0".to_string();
        }
        self.0.to_string_radix(10, Some(significant.max(1)))
    }

    pub fn abs(&self) -> Self {
        Real(self.0.clone().abs())
    }

    pub fn sqrt(&self) -> Self {
        Real(self.0.clone().sqrt())
    }

    pub fn exp(&self) -> Self {
        Real(self.0.clone().exp())
    }

    pub fn ln(&self) -> Self {
        Real(self.0.clone().ln())
    }

    pub fn sin(&self) -> Self {
        Real(self.0.clone().sin())
    }

    pub fn cos(&self) -> Self {
        Real(self.0.clone().cos())
    }

    pub fn sin_cos(&self) -> (Self, Self) {
        let (s, c) = self.0.clone().sin_cos(Float::new(self.0.prec()));
        (Real(s), Real(c))
    }

    pub fn sinh(&self) -> Self {
        Real(self.0.clone().sinh())
    }

    pub fn cosh(&self) -> Self {
        Real(self.0.clone().cosh())
    }

    pub fn tanh(&self) -> Self {
        Real(self.0.clone().tanh())
    }

    pub fn atanh(&self) -> Self {
        Real(self.0.clone().atanh())
    }

    pub fn csch(&self) -> Self {
        Real(self.0.clone().csch())
    }

    pub fn recip(&self) -> Self {
        Real(self.0.clone().recip())
    }

    pub fn powi(&self, n: i32) -> Self {
        Real(self.0.clone().pow(n))
    }

    pub fn powu(&self, n: u32) -> Self {
        Real(self.0.clone().pow(n))
    }

    pub fn pow(&self, e: &Real) -> Self {
        let prec = self.prec_bits().max(e.prec_bits());
        Real(Float::with_val(prec, (&self.0).pow(&e.0)))
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Real({}; {} bits)", self.to_decimal_string_sig(20), self.prec_bits())
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => f.write_str(&self.to_decimal_string_sig(p)),
            None => f.write_str(&self.to_decimal_string()),
        }
    }
}

impl PartialEq<f64> for Real {
    fn eq(&self, other: &f64) -> bool {
        self.0 == *other
    }
}

impl PartialOrd<f64> for Real {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.0.partial_cmp(other)
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(-self.0)
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real(-self.0.clone())
    }
}

macro_rules! real_binop {
    ($Trait:ident, $method:ident) => {
        impl $Trait<&Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                let prec = self.0.prec().max(rhs.0.prec());
                Real(Float::with_val(prec, (&self.0).$method(&rhs.0)))
            }
        }
        impl $Trait<Real> for Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                (&self).$method(&rhs)
            }
        }
        impl $Trait<&Real> for Real {
            type Output = Real;
            fn $method(self, rhs: &Real) -> Real {
                (&self).$method(rhs)
            }
        }
        impl $Trait<Real> for &Real {
            type Output = Real;
            fn $method(self, rhs: Real) -> Real {
                self.$method(&rhs)
            }
        }
        impl $Trait<f64> for &Real {
            type Output = Real;
            fn $method(self, rhs: f64) -> Real {
                Real(Float::with_val(self.0.prec(), (&self.0).$method(rhs)))
            }
        }
        impl $Trait<f64> for Real {
            type Output = Real;
            fn $method(self, rhs: f64) -> Real {
                (&self).$method(rhs)
            }
        }
        impl $Trait<i64> for &Real {
            type Output = Real;
            fn $method(self, rhs: i64) -> Real {
                Real(Float::with_val(self.0.prec(), (&self.0).$method(rhs)))
            }
        }
        impl $Trait<i64> for Real {
            type Output = Real;
            fn $method(self, rhs: i64) -> Real {
                (&self).$method(rhs)
            }
        }
    };
}

real_binop!(Add, add);
real_binop!(Sub, sub);
real_binop!(Mul, mul);
real_binop!(Div, div);

impl AddAssign<&Real> for Real {
    fn add_assign(&mut self, rhs: &Real) {
        if rhs.0.prec() > self.0.prec() {
            self.0.set_prec(rhs.0.prec());
        }
        self.0 += &rhs.0;
    }
}

impl AddAssign<Real> for Real {
    fn add_assign(&mut self, rhs: Real) {
        *self += &rhs;
    }
}

impl SubAssign<&Real> for Real {
    fn sub_assign(&mut self, rhs: &Real) {
        if rhs.0.prec() > self.0.prec() {
            self.0.set_prec(rhs.0.prec());
        }
        self.0 -= &rhs.0;
    }
}

impl SubAssign<Real> for Real {
    fn sub_assign(&mut self, rhs: Real) {
        *self -= &rhs;
    }
}

impl MulAssign<&Real> for Real {
    fn mul_assign(&mut self, rhs: &Real) {
        if rhs.0.prec() > self.0.prec() {
            self.0.set_prec(rhs.0.prec());
        }
        self.0 *= &rhs.0;
    }
}

impl MulAssign<f64> for Real {
    fn mul_assign(&mut self, rhs: f64) {
        self.0 *= rhs;
    }
}

impl AddAssign<f64> for Real {
    fn add_assign(&mut self, rhs: f64) {
        self.0 += rhs;
    }
}

impl SubAssign<f64> for Real {
    fn sub_assign(&mut self, rhs: f64) {
        self.0 -= rhs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_ops_take_max_precision() {
        let a = Real::from_f64(1.5, 20);
        let b = Real::from_f64(2.25, 60);
        assert_eq!((&a + &b).prec_bits(), b.prec_bits());
        assert_eq!((&b * &a).prec_bits(), b.prec_bits());
        assert_eq!((&a / 3i64).prec_bits(), a.prec_bits());
    }

    #[test]
    fn digits_round_trip_through_bits() {
        for d in [1u32, 15, 30, 65, 130, 450] {
            assert!(digits_for_bits(bits_for_digits(d)) >= d);
        }
    }

    #[test]
    fn decimal_string_round_trips_exactly() {
        let x = Real::pi(450) / 7i64;
        let s = x.to_decimal_string();
        let back = Real::parse(&s, 450).unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn division_is_faithful() {
        // 1/3 * 3 - 1 within 10^(2-D)
        let d = 50;
        let third = Real::one(d) / 3i64;
        let err = (third * 3i64 - 1i64).abs();
        assert!(err.log10_abs() <= 2.0 - d as f64);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Real::parse("abc", 20).is_err());
    }
}

//! Binary fixed-point reals of arbitrary precision.
//!
//! A [`FixedReal`] is `value · 2^(-frac_bits)` for a big integer `value`.
//! Every operation takes a requested precision `p` and returns a result
//! whose absolute error is at most `2^(-p)`, treating its inputs as exact.
//! Rounding is truncation toward zero.

mod elementary;

pub use elementary::{arctan, log, pi, sqrt};

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

/// Extra bits carried by the elementary functions above the requested precision.
pub const GUARD_BITS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FixedError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative number")]
    NegativeSqrt,
    #[error("logarithm of a non-positive number")]
    NonPositiveLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FixedReal {
    value: BigInt,
    frac_bits: u32,
}

/// Multiplies `v` by `2^shift`, truncating toward zero when `shift < 0`.
pub(crate) fn shift_trunc(v: &BigInt, shift: i64) -> BigInt {
    match shift.cmp(&0) {
        Ordering::Equal => v.clone(),
        Ordering::Greater => v << (shift as usize),
        Ordering::Less => {
            let mag = v.magnitude() >> ((-shift) as usize);
            BigInt::from_biguint(v.sign(), mag)
        }
    }
}

impl FixedReal {
    pub fn from_raw(value: BigInt, frac_bits: u32) -> Self {
        FixedReal { value, frac_bits }
    }

    pub fn zero(p: u32) -> Self {
        FixedReal::from_raw(BigInt::zero(), p)
    }

    pub fn one(p: u32) -> Self {
        FixedReal::from_int(1, p)
    }

    pub fn from_int(v: impl Into<BigInt>, p: u32) -> Self {
        FixedReal::from_raw(v.into() << (p as usize), p)
    }

    /// `num / den` truncated to `p` fractional bits.
    pub fn from_ratio(num: &BigInt, den: &BigInt, p: u32) -> Result<Self, FixedError> {
        if den.is_zero() {
            return Err(FixedError::DivisionByZero);
        }
        Ok(FixedReal::from_raw((num << (p as usize)) / den, p))
    }

    pub fn from_rational(q: &BigRational, p: u32) -> Self {
        // BigRational keeps a non-zero denominator.
        FixedReal::from_raw((q.numer() << (p as usize)) / q.denom(), p)
    }

    pub fn raw(&self) -> &BigInt {
        &self.value
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// −1, 0 or +1.
    pub fn sign(&self) -> i8 {
        match self.value.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn mantissa(&self) -> BigUint {
        self.value.magnitude().clone()
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.value.is_negative()
    }

    pub fn abs(&self) -> Self {
        FixedReal::from_raw(self.value.abs(), self.frac_bits)
    }

    /// Re-expresses the value with `p` fractional bits (truncating if `p` shrinks).
    pub fn with_precision(&self, p: u32) -> Self {
        FixedReal::from_raw(shift_trunc(&self.value, p as i64 - self.frac_bits as i64), p)
    }

    /// Exact multiplication by `2^k`.
    pub fn mul_pow2(&self, k: i64) -> Self {
        if k >= 0 {
            FixedReal::from_raw(&self.value << (k as usize), self.frac_bits)
        } else {
            FixedReal::from_raw(self.value.clone(), self.frac_bits + (-k) as u32)
        }
    }

    fn aligned(&self, other: &FixedReal) -> (BigInt, BigInt, u32) {
        let f = self.frac_bits.max(other.frac_bits);
        (&self.value << ((f - self.frac_bits) as usize), &other.value << ((f - other.frac_bits) as usize), f)
    }

    pub fn add(&self, other: &FixedReal, p: u32) -> Self {
        let (a, b, f) = self.aligned(other);
        FixedReal::from_raw(a + b, f).with_precision(p)
    }

    pub fn sub(&self, other: &FixedReal, p: u32) -> Self {
        let (a, b, f) = self.aligned(other);
        FixedReal::from_raw(a - b, f).with_precision(p)
    }

    /// Sum without rounding.
    pub fn add_exact(&self, other: &FixedReal) -> Self {
        let (a, b, f) = self.aligned(other);
        FixedReal::from_raw(a + b, f)
    }

    /// Difference without rounding.
    pub fn sub_exact(&self, other: &FixedReal) -> Self {
        let (a, b, f) = self.aligned(other);
        FixedReal::from_raw(a - b, f)
    }

    /// Product without rounding.
    pub fn mul_exact(&self, other: &FixedReal) -> Self {
        FixedReal::from_raw(&self.value * &other.value, self.frac_bits + other.frac_bits)
    }

    pub fn mul(&self, other: &FixedReal, p: u32) -> Self {
        self.mul_exact(other).with_precision(p)
    }

    pub fn div(&self, other: &FixedReal, p: u32) -> Result<Self, FixedError> {
        if other.is_zero() {
            return Err(FixedError::DivisionByZero);
        }
        // (vx / 2^fx) / (vy / 2^fy) * 2^p = vx * 2^(fy + p - fx) / vy
        let e = other.frac_bits as i64 + p as i64 - self.frac_bits as i64;
        let q = if e >= 0 {
            (&self.value << (e as usize)) / &other.value
        } else {
            &self.value / (&other.value << ((-e) as usize))
        };
        Ok(FixedReal::from_raw(q, p))
    }

    pub fn mul_int(&self, k: &BigInt) -> Self {
        FixedReal::from_raw(&self.value * k, self.frac_bits)
    }

    /// Division by an integer, truncated at the current precision.
    pub fn div_int(&self, k: &BigInt) -> Result<Self, FixedError> {
        if k.is_zero() {
            return Err(FixedError::DivisionByZero);
        }
        Ok(FixedReal::from_raw(&self.value / k, self.frac_bits))
    }

    /// Largest integer not above the value.
    pub fn floor(&self) -> BigInt {
        self.value.div_floor(&(BigInt::one() << (self.frac_bits as usize)))
    }

    /// `x - floor(x)`, in `[0, 1)`.
    pub fn fract(&self) -> Self {
        let unit = BigInt::one() << (self.frac_bits as usize);
        FixedReal::from_raw(self.value.mod_floor(&unit), self.frac_bits)
    }

    /// Smallest `e` with `|x| < 2^e`.
    pub fn magnitude_bits(&self) -> i64 {
        self.value.bits() as i64 - self.frac_bits as i64
    }

    /// Whether `|x| <= 2^exp`.
    pub fn abs_le_pow2(&self, exp: i64) -> bool {
        let shift = self.frac_bits as i64 + exp;
        if shift < 0 {
            // 2^exp is below one ulp; only zero qualifies
            return self.is_zero();
        }
        self.value.magnitude() <= &(BigUint::one() << (shift as usize))
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.value.bits() as i64;
        let drop = (bits - 60).max(0);
        let top = shift_trunc(&self.value, -drop).to_f64().unwrap_or(0.0);
        top * 2f64.powi((drop - self.frac_bits as i64).clamp(-2000, 2000) as i32)
    }

    /// Decimal expansion truncated toward zero after `digits` places.
    pub fn to_decimal_string(&self, digits: usize) -> String {
        let scaled =
            (self.value.magnitude() * num_traits::pow(BigUint::from(10u32), digits)) >> (self.frac_bits as usize);
        let mut s = scaled.to_str_radix(10);
        if s.len() <= digits {
            s = format!("{}{}", "0".repeat(digits + 1 - s.len()), s);
        }
        let (int_part, frac_part) = s.split_at(s.len() - digits);
        let sign = if self.is_negative() && !scaled.is_zero() { "-" } else { "" };
        if digits == 0 {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{frac_part}")
        }
    }

    /// Hexadecimal mantissa with its binary exponent, e.g. `0x1b3p-140`.
    pub fn to_hex_string(&self) -> String {
        let sign = if self.is_negative() { "-" } else { "" };
        format!("{sign}0x{}p-{}", self.value.magnitude().to_str_radix(16), self.frac_bits)
    }
}

/// Field operation with an absolute error of at most `2^(-p)`.
pub fn arith(x: &FixedReal, y: &FixedReal, op: ArithOp, p: u32) -> Result<FixedReal, FixedError> {
    Ok(match op {
        ArithOp::Add => x.add(y, p),
        ArithOp::Sub => x.sub(y, p),
        ArithOp::Mul => x.mul(y, p),
        ArithOp::Div => x.div(y, p)?,
    })
}

impl PartialOrd for FixedReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for FixedReal {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl std::ops::Neg for FixedReal {
    type Output = FixedReal;
    fn neg(self) -> FixedReal {
        FixedReal::from_raw(-self.value, self.frac_bits)
    }
}

impl std::ops::Neg for &FixedReal {
    type Output = FixedReal;
    fn neg(self) -> FixedReal {
        FixedReal::from_raw(-&self.value, self.frac_bits)
    }
}

impl fmt::Debug for FixedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FixedReal({})", self.to_decimal_string(decimal_digits(self.frac_bits)))
    }
}

impl fmt::Display for FixedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = f.precision().unwrap_or(decimal_digits(self.frac_bits));
        f.write_str(&self.to_decimal_string(digits))
    }
}

/// `floor(p * log10(2))`: decimal places certified by `p` bits.
pub fn decimal_digits(p: u32) -> usize {
    (p as u64 * 30103 / 100000) as usize
}

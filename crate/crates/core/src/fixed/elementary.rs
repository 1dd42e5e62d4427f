//! Square root, arctangent, logarithm and π on [`FixedReal`].
//!
//! Each function evaluates at `p + GUARD_BITS` internally and returns a value
//! with `p + 1` fractional bits whose distance from the exact result is at
//! most `2^(-p)`.

use std::sync::Mutex;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::{FixedError, FixedReal, GUARD_BITS};

/// `floor(sqrt(x) * 2^q)` with `q = max(p + 1, ceil(f / 2))`, so the result is exact
/// up to a single truncation.
pub fn sqrt(x: &FixedReal, p: u32) -> Result<FixedReal, FixedError> {
    if x.is_negative() {
        return Err(FixedError::NegativeSqrt);
    }
    let f = x.frac_bits();
    let q = (p + 1).max(f.div_ceil(2));
    let radicand = x.raw() << ((2 * q - f) as usize);
    Ok(FixedReal::from_raw(radicand.sqrt(), q))
}

/// Fixed-point `atan` of `|x| <= 1` at working precision `w`, error a few ulps.
fn arctan_small(x: &FixedReal, w: u32) -> FixedReal {
    let quarter = FixedReal::from_raw(BigInt::one(), 2);
    let one = FixedReal::one(w);
    let mut a = x.with_precision(w);
    let mut halvings = 0i64;
    // atan(x) = 2 atan(x / (1 + sqrt(1 + x^2)))
    while a.abs() >= quarter {
        let root = sqrt(&one.add_exact(&a.mul(&a, w)), w).expect("1 + x^2 > 0");
        a = a.div(&one.add_exact(&root.with_precision(w)), w).expect("denominator >= 2");
        halvings += 1;
    }
    let x2 = a.mul(&a, w);
    let mut term = a.clone();
    let mut sum = a.clone();
    let mut k = 1u64;
    // remaining tail is below |term|, alternating and decreasing
    while !term.is_zero() {
        term = term.mul(&x2, w);
        let t = term.div_int(&BigInt::from(2 * k + 1)).expect("odd divisor");
        sum = if k % 2 == 1 { sum.sub_exact(&t) } else { sum.add_exact(&t) };
        k += 1;
    }
    sum.mul_pow2(halvings)
}

/// Arctangent with absolute error at most `2^(-p)`.
pub fn arctan(x: &FixedReal, p: u32) -> FixedReal {
    if x.is_zero() {
        return FixedReal::zero(p + 1);
    }
    let w = p + GUARD_BITS;
    let a = x.abs();
    let one = FixedReal::one(w);
    let r = if a > one {
        // atan x = pi/2 - atan(1/x) for x > 0
        let recip = one.div(&a, w).expect("a > 1");
        pi_working(w).mul_pow2(-1).sub(&arctan_small(&recip, w), w)
    } else {
        arctan_small(&a, w)
    };
    let r = r.with_precision(p + 1);
    if x.is_negative() {
        -r
    } else {
        r
    }
}

/// `sum_{n>=0} z^(2n+1) / (2n+1)` for `|z| <= 1/3` at working precision `w`.
fn atanh_series(z: &FixedReal, w: u32) -> FixedReal {
    let z = z.with_precision(w);
    let z2 = z.mul(&z, w);
    let mut term = z.clone();
    let mut sum = z;
    let mut k = 1u64;
    while !term.is_zero() {
        term = term.mul(&z2, w);
        sum = sum.add_exact(&term.div_int(&BigInt::from(2 * k + 1)).expect("odd divisor"));
        k += 1;
    }
    sum
}

/// Natural logarithm with absolute error at most `2^(-p)`.
pub fn log(x: &FixedReal, p: u32) -> Result<FixedReal, FixedError> {
    if x.sign() <= 0 {
        return Err(FixedError::NonPositiveLog);
    }
    // x = 2^e * y with y in [1, 2)
    let e = x.magnitude_bits() - 1;
    let e_bits = 64 - e.unsigned_abs().leading_zeros();
    let w = p + GUARD_BITS + e_bits;
    let y = x.mul_pow2(-e).with_precision(w);
    let one = FixedReal::one(w);
    let z = y.sub_exact(&one).div(&y.add_exact(&one), w)?;
    let ln_y = atanh_series(&z, w).mul_pow2(1);
    let mut result = ln_y;
    if e != 0 {
        let third = FixedReal::one(w).div(&FixedReal::from_int(3, w), w)?;
        let ln2 = atanh_series(&third, w).mul_pow2(1);
        result = result.add_exact(&ln2.mul_int(&BigInt::from(e)));
    }
    Ok(result.with_precision(p + 1))
}

/// `atan(1/n)` for an integer `n >= 2`, directly as a series on `2^w / n^(2k+1)`.
fn arctan_recip(n: u32, w: u32) -> BigInt {
    let n = BigInt::from(n);
    let n2 = &n * &n;
    let mut term = (BigInt::one() << (w as usize)) / &n;
    let mut sum = BigInt::zero();
    let mut k = 0u64;
    while !term.is_zero() {
        let t = &term / BigInt::from(2 * k + 1);
        if k.is_multiple_of(2) {
            sum += t;
        } else {
            sum -= t;
        }
        term /= &n2;
        k += 1;
    }
    sum
}

static PI_CACHE: Mutex<Option<FixedReal>> = Mutex::new(None);

/// π truncated to `w` fractional bits, error at most `2^(1-w)`.
pub(crate) fn pi_working(w: u32) -> FixedReal {
    {
        let cache = PI_CACHE.lock().expect("pi cache poisoned");
        if let Some(cached) = cache.as_ref() {
            if cached.frac_bits() >= w + 32 {
                return cached.with_precision(w);
            }
        }
    }
    // Machin: pi = 16 atan(1/5) - 4 atan(1/239), accumulated error well under 2^32 ulps
    let wi = w + 64;
    let v = arctan_recip(5, wi) * 16 - arctan_recip(239, wi) * 4;
    let full = FixedReal::from_raw(v, wi);
    let mut cache = PI_CACHE.lock().expect("pi cache poisoned");
    if cache.as_ref().is_none_or(|c| c.frac_bits() < wi) {
        *cache = Some(full.clone());
    }
    full.with_precision(w)
}

/// π with absolute error at most `2^(-p)`.
pub fn pi(p: u32) -> FixedReal {
    pi_working(p + GUARD_BITS).with_precision(p + 1)
}

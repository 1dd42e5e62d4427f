//! Radix-`b` digit extraction for integer-base formulas.
//!
//! Digits `d+1 … d+m` of `C = (N / b^e) Σ_k b^-k Σ_j a_j / (k l + j)` are read off
//! the fractional part of `b^(d-e) N P`. Terms with `k <= d - e` contribute
//! `(N a_j b^(d-e-k) mod (k l + j)) / (k l + j)`, computed by modular
//! exponentiation; the rest are summed directly in fixed point.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use super::{BbpError, BbpFormula};
use crate::fixed::FixedReal;

/// Largest supported digit position.
pub const MAX_POSITION: u64 = 10_000_000;
/// Largest number of digits per request.
pub const MAX_COUNT: usize = 256;
/// Guard bits of the first attempt; the retry doubles them.
pub const DIGIT_GUARD_BITS: u32 = 64;
/// Distance to a digit boundary, in units of the last digit, that counts as risky.
pub const BOUNDARY_MARGIN_LOG2: u32 = 48;

/// Integer data of an eligible formula: `C = (N / b^e) P(1, b, l, A)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitPlan {
    pub base: u64,
    /// `N a_j`.
    pub coefficients: Vec<BigInt>,
    /// Number of radix digits absorbed by the prefactor denominator.
    pub shift: u32,
}

/// Outcome of one extraction attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub digits: Vec<u64>,
    /// Set when the uncertainty interval may straddle a digit boundary.
    pub boundary_risk: bool,
}

impl DigitPlan {
    pub fn new(f: &BbpFormula) -> Result<Self, BbpError> {
        let reject = |reason: &str| BbpError::NotEligible { name: f.name.clone(), reason: reason.into() };
        if f.s() != 1 {
            return Err(reject("degree is not 1"));
        }
        let base = f
            .base()
            .as_integer()
            .and_then(|b| b.to_u64())
            .filter(|&b| (2..=u32::MAX as u64).contains(&b))
            .ok_or_else(|| reject("base is not an integer in [2, 2^32)"))?;
        let ints = f.integer_coefficients().ok_or_else(|| reject("coefficients are not integers"))?;
        let pref = f.prefactor().as_rational().ok_or_else(|| reject("prefactor is irrational"))?;
        let b = BigInt::from(base);
        let mut power = BigInt::one();
        let mut shift = 0u32;
        while !(&power % pref.denom()).is_zero() {
            if shift == 64 {
                return Err(reject("prefactor denominator does not divide a power of the base"));
            }
            power *= &b;
            shift += 1;
        }
        let n = pref.numer() * (power / pref.denom());
        Ok(DigitPlan { base, coefficients: ints.iter().map(|a| a * &n).collect(), shift })
    }

    fn digit_bits(&self, m: usize) -> u32 {
        ((m as f64) * (self.base as f64).log2()).ceil() as u32
    }

    /// One attempt at `guard` bits below the requested digits.
    pub fn extract(&self, d: u64, m: usize, guard: u32) -> Extraction {
        let g = self.digit_bits(m) + guard;
        let l = self.coefficients.len() as u64;
        let modulus = BigInt::one() << g as usize;
        let exp = d as i64 - self.shift as i64;
        let b = self.base;

        // head: k in [0, exp], exact modular fractions, order-independent
        let head: BigInt = if exp >= 0 {
            (0..=exp as u64)
                .into_par_iter()
                .map(|k| {
                    let mut part = BigInt::zero();
                    for (j, a) in self.coefficients.iter().enumerate() {
                        let den = k * l + j as u64 + 1;
                        let a_mod = a.mod_floor(&BigInt::from(den)).to_u64().expect("below modulus");
                        if a_mod == 0 {
                            continue;
                        }
                        let r = mod_pow(b, exp as u64 - k, den);
                        let t = ((r as u128 * a_mod as u128) % den as u128) as u64;
                        part += (BigInt::from(t) << g as usize) / den;
                    }
                    part.mod_floor(&modulus)
                })
                .reduce(BigInt::zero, |x, y| (x + y).mod_floor(&modulus))
        } else {
            BigInt::zero()
        };

        // tail: k > exp, |term| <= |a| b^(exp-k); stop once the remainder is below one ulp
        let a_bits = self.coefficients.iter().map(|a| a.bits()).max().unwrap_or(0) as f64;
        let lb = (b as f64).log2();
        let k0 = (exp + 1).max(0) as u64;
        let span = ((g as f64 + a_bits + l as f64 + 2.0) / lb).ceil() as u64 + 2;
        let mut tail = BigInt::zero();
        let mut scale = BigInt::from(b).pow((k0 as i64 - exp) as u32);
        let mut tail_terms = 0u64;
        for k in k0..k0 + span {
            for (j, a) in self.coefficients.iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                let den = BigInt::from(k * l + j as u64 + 1) * &scale;
                tail += (a << g as usize) / den;
                tail_terms += 1;
            }
            scale *= b;
        }

        let frac = (head + tail).mod_floor(&modulus);
        // each truncated term is off by under one ulp; the dropped tail by under one more
        let head_terms = if exp >= 0 { (exp as u64 + 1) * l } else { 0 };
        let err_ulps = BigInt::from(head_terms + tail_terms + 2);

        let bm = BigInt::from(b).pow(m as u32);
        let scaled = &frac * &bm;
        let value = &scaled >> g as usize;
        let rem = &scaled - (&value << g as usize);
        let slack = std::cmp::max(err_ulps * &bm, &modulus >> BOUNDARY_MARGIN_LOG2 as usize);
        let boundary_risk = rem < slack || &modulus - &rem < slack;

        Extraction { digits: radix_digits(&value, b, m), boundary_risk }
    }
}

fn mod_pow(base: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let m128 = m as u128;
    let mut b = base as u128 % m128;
    let mut acc = 1u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % m128;
        }
        b = b * b % m128;
        e >>= 1;
    }
    acc as u64
}

/// The `m` low-order base-`b` digits of `v`, most significant first.
fn radix_digits(v: &BigInt, b: u64, m: usize) -> Vec<u64> {
    let mut out = vec![0u64; m];
    let bb = BigInt::from(b);
    let mut v = v.clone();
    for slot in out.iter_mut().rev() {
        let (q, r) = v.div_mod_floor(&bb);
        *slot = r.to_u64().expect("digit below base");
        v = q;
    }
    out
}

/// Digits `d+1 … d+m` after the radix point of the formula's value in its base.
/// Retries once with doubled guard bits when the result sits near a digit boundary.
pub fn bbp_digits(f: &BbpFormula, d: u64, m: usize) -> Result<Vec<u64>, BbpError> {
    if d > MAX_POSITION {
        return Err(BbpError::OutOfBounds(format!("position {d} exceeds {MAX_POSITION}")));
    }
    if m == 0 || m > MAX_COUNT {
        return Err(BbpError::OutOfBounds(format!("digit count must be in 1..={MAX_COUNT}")));
    }
    let plan = DigitPlan::new(f)?;
    let first = plan.extract(d, m, DIGIT_GUARD_BITS);
    if !first.boundary_risk {
        return Ok(first.digits);
    }
    let second = plan.extract(d, m, 2 * DIGIT_GUARD_BITS);
    if second.boundary_risk {
        Err(BbpError::BoundaryRisk { position: d })
    } else {
        Ok(second.digits)
    }
}

/// Digits `d+1 … d+m` of `frac(value)` in radix `b`, read from a full-precision value.
pub fn digits_from_value(value: &FixedReal, b: u64, d: u64, m: usize) -> Vec<u64> {
    let scaled = value.raw() * BigInt::from(b).pow((d + m as u64) as u32);
    let whole = scaled.div_floor(&(BigInt::one() << value.frac_bits() as usize));
    let window = whole.mod_floor(&BigInt::from(b).pow(m as u32));
    radix_digits(&window, b, m)
}

/// Precision sufficient to read digits `d+1 … d+m` from a full evaluation.
pub fn oracle_precision(b: u64, d: u64, m: usize) -> u32 {
    ((d + m as u64 + 8) as f64 * (b as f64).log2()).ceil() as u32 + 64
}

/// Renders digits as text: single characters up to base 36, otherwise
/// zero-padded decimal groups separated by `:`.
pub fn render_digits(digits: &[u64], b: u64) -> String {
    if b <= 36 {
        digits.iter().map(|&v| std::char::from_digit(v as u32, b as u32).expect("digit below base")).collect()
    } else {
        let width = (b - 1).to_string().len();
        digits.iter().map(|v| format!("{v:0width$}")).collect::<Vec<_>>().join(":")
    }
}

//! Golden-ratio base: canonical `{0,1}` digit strings without adjacent ones.
//!
//! Digits are produced greedily from an exact `Q(φ)` remainder, so every
//! decision is exact for the value handed in. A [`FixedReal`] input only
//! approximates the real number it stands for; digits decided within the
//! input's own resolution are flagged uncertain.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::fixed::FixedReal;
use crate::golden::{phi_pow, QPhi};

/// Input bits required beyond `n · log2 φ`.
pub const PRECISION_MARGIN: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PhinaryError {
    #[error("negative values have no golden-base expansion here")]
    Negative,
    #[error("input carries {have} fractional bits, {need} are required for {digits} digits")]
    InsufficientPrecision { have: u32, need: u32, digits: usize },
    #[error("malformed digit string: {0}")]
    Malformed(String),
    #[error("adjacent ones at digit {0}")]
    AdjacentOnes(usize),
}

/// `int_digits` run from `φ^m` down to `φ^0`; `frac_digits` from `φ^-1` down.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GoldenDigits {
    pub int_digits: Vec<u8>,
    pub frac_digits: Vec<u8>,
    /// Set when some emitted digit depends on bits below the input's precision.
    pub uncertain: bool,
}

/// Fractional bits needed for `n` digits.
pub fn required_precision(n_frac: usize) -> u32 {
    (n_frac as f64 * 1.618_033_988_749_895f64.log2()).ceil() as u32 + PRECISION_MARGIN
}

/// Greedy expansion of `x >= 0` to `n_frac` fractional digits.
pub fn to_golden_base(x: &FixedReal, n_frac: usize) -> Result<GoldenDigits, PhinaryError> {
    if x.is_negative() {
        return Err(PhinaryError::Negative);
    }
    let need = required_precision(n_frac);
    if x.frac_bits() < need {
        return Err(PhinaryError::InsufficientPrecision { have: x.frac_bits(), need, digits: n_frac });
    }
    let den = BigInt::one() << x.frac_bits() as usize;
    let value = QPhi::from_rational(&BigRational::new(x.raw().clone(), den.clone()));
    let ulp = QPhi::from_rational(&BigRational::new(BigInt::one(), den));
    Ok(greedy(value, n_frac, Some(&ulp)))
}

/// Greedy expansion of an exact non-negative value; never uncertain.
pub fn to_golden_base_exact(x: &QPhi, n_frac: usize) -> Result<GoldenDigits, PhinaryError> {
    if x.signum() < 0 {
        return Err(PhinaryError::Negative);
    }
    Ok(greedy(x.clone(), n_frac, None))
}

fn greedy(mut rem: QPhi, n_frac: usize, resolution: Option<&QPhi>) -> GoldenDigits {
    let mut top = 0i64;
    while phi_pow(top + 1) <= rem {
        top += 1;
    }
    let mut out = GoldenDigits::default();
    // invariant: rem < φ^(m+1) on entry to position m
    let mut m = top;
    while m >= -(n_frac as i64) {
        let place = phi_pow(m);
        let gap = &rem - &place;
        if let Some(res) = resolution {
            if gap.abs() <= *res {
                out.uncertain = true;
            }
        }
        let digit = u8::from(gap.signum() >= 0);
        if digit == 1 {
            rem = gap;
        }
        if m >= 0 {
            out.int_digits.push(digit);
        } else {
            out.frac_digits.push(digit);
        }
        m -= 1;
    }
    out
}

fn check_canonical(bits: impl Iterator<Item = u8>) -> Result<(), PhinaryError> {
    let mut prev = 0;
    for (i, b) in bits.enumerate() {
        if b > 1 {
            return Err(PhinaryError::Malformed(format!("digit {b} at {i}")));
        }
        if b == 1 && prev == 1 {
            return Err(PhinaryError::AdjacentOnes(i));
        }
        prev = b;
    }
    Ok(())
}

/// Exact value `Σ d_i φ^i`; rejects adjacent ones.
pub fn from_golden_base(d: &GoldenDigits) -> Result<QPhi, PhinaryError> {
    check_canonical(d.int_digits.iter().chain(&d.frac_digits).copied())?;
    let top = d.int_digits.len() as i64 - 1;
    let mut acc = QPhi::zero();
    for (i, &b) in d.int_digits.iter().chain(&d.frac_digits).enumerate() {
        if b == 1 {
            acc = &acc + &phi_pow(top - i as i64);
        }
    }
    Ok(acc)
}

impl GoldenDigits {
    pub fn contains_adjacent_ones(&self) -> bool {
        check_canonical(self.int_digits.iter().chain(&self.frac_digits).copied()).is_err()
    }

    /// Text form; `group` inserts a space every that many fractional digits.
    pub fn render(&self, group: Option<usize>) -> String {
        let first_one = self.int_digits.iter().position(|&b| b == 1);
        let int: String = match first_one {
            Some(i) => self.int_digits[i..].iter().map(|b| char::from(b'0' + b)).collect(),
            None => "0".into(),
        };
        let last_one = self.frac_digits.iter().rposition(|&b| b == 1).map_or(0, |i| i + 1);
        let mut frac = String::new();
        for (i, b) in self.frac_digits[..last_one].iter().enumerate() {
            if let Some(g) = group.filter(|&g| g > 0) {
                if i > 0 && i % g == 0 {
                    frac.push(' ');
                }
            }
            frac.push(char::from(b'0' + b));
        }
        format!("{int}.{frac}")
    }
}

impl fmt::Display for GoldenDigits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(None))
    }
}

impl FromStr for GoldenDigits {
    type Err = PhinaryError;

    /// Accepts `"10.01"`, `"1."`, `"101"` and ignores spaces and underscores.
    fn from_str(s: &str) -> Result<Self, PhinaryError> {
        let cleaned: String = s.chars().filter(|c| !matches!(c, ' ' | '_')).collect();
        let (int, frac) = cleaned.split_once('.').unwrap_or((&cleaned, ""));
        let bits = |part: &str| -> Result<Vec<u8>, PhinaryError> {
            part.chars()
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    _ => Err(PhinaryError::Malformed(format!("unexpected character `{c}`"))),
                })
                .collect()
        };
        let mut int_digits = bits(int)?;
        if int_digits.is_empty() {
            int_digits.push(0);
        }
        let d = GoldenDigits { int_digits, frac_digits: bits(frac)?, uncertain: false };
        check_canonical(d.int_digits.iter().chain(&d.frac_digits).copied())?;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixed;
    use proptest::prelude::*;

    fn exact(v: i64, n: usize) -> GoldenDigits {
        to_golden_base_exact(&QPhi::from_int(v), n).unwrap()
    }

    #[test]
    fn small_integers() {
        assert_eq!(exact(1, 8).to_string(), "1.");
        assert_eq!(exact(2, 8).to_string(), "10.01");
        assert_eq!(exact(3, 8).to_string(), "100.01");
        assert_eq!(exact(4, 8).to_string(), "101.01");
        assert_eq!(exact(0, 8).to_string(), "0.");
        let phi = to_golden_base_exact(&QPhi::phi(), 4).unwrap();
        assert_eq!(phi.to_string(), "10.");
    }

    #[test]
    fn decoding() {
        let two: GoldenDigits = "10.01".parse().unwrap();
        assert_eq!(from_golden_base(&two).unwrap(), QPhi::from_int(2));
        assert_eq!(from_golden_base(&"1.".parse().unwrap()).unwrap(), QPhi::one());
        assert_eq!("1_0.0 1".parse::<GoldenDigits>().unwrap(), two);
        assert_eq!("110".parse::<GoldenDigits>(), Err(PhinaryError::AdjacentOnes(1)));
        assert_eq!("1.011".parse::<GoldenDigits>(), Err(PhinaryError::AdjacentOnes(3)));
        assert!(matches!("1.2".parse::<GoldenDigits>(), Err(PhinaryError::Malformed(_))));
        let d = GoldenDigits { int_digits: vec![1, 1], frac_digits: vec![], uncertain: false };
        assert_eq!(from_golden_base(&d), Err(PhinaryError::AdjacentOnes(1)));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(to_golden_base(&FixedReal::from_int(-1, 128), 4), Err(PhinaryError::Negative));
        assert!(matches!(
            to_golden_base(&FixedReal::from_int(1, 70), 40),
            Err(PhinaryError::InsufficientPrecision { .. })
        ));
    }

    #[test]
    fn grouping() {
        let pi = to_golden_base(&fixed::pi(256), 24).unwrap();
        let plain = pi.render(None);
        let grouped = pi.render(Some(8));
        assert_eq!(grouped.replace(' ', ""), plain);
        assert_eq!(grouped.split(' ').count(), 3);
    }

    #[test]
    fn pi_round_trip() {
        let x = fixed::pi(256);
        let d = to_golden_base(&x, 40).unwrap();
        assert!(!d.contains_adjacent_ones() && !d.uncertain);
        let back = from_golden_base(&d).unwrap().embed(200);
        let bound = phi_pow(-39).embed(200);
        assert!(x.sub(&back, 200).abs() < bound);
        assert!(d.to_string().starts_with("100.0100101"));
    }

    #[test]
    fn exact_dyadic_input_at_a_boundary_is_uncertain() {
        // 2 is a digit boundary; its dyadic image sits exactly on it
        let d = to_golden_base(&FixedReal::from_int(2, 128), 8).unwrap();
        assert!(d.uncertain);
        assert!(!to_golden_base(&fixed::pi(256), 40).unwrap().uncertain);
    }

    #[test]
    fn greedy_is_lexicographically_maximal() {
        let mut seed = 0x2545_f491_4f6c_dd1du64;
        for _ in 0..200 {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            let x = QPhi::from_rational(&BigRational::new(BigInt::from(seed >> 11), BigInt::one() << 53usize));
            let greedy = to_golden_base_exact(&x, 8).unwrap().frac_digits;
            let best = (0u32..256)
                .map(|m| (0..8).map(|i| ((m >> (7 - i)) & 1) as u8).collect::<Vec<u8>>())
                .filter(|bits| {
                    let v = bits
                        .iter()
                        .enumerate()
                        .filter(|(_, &b)| b == 1)
                        .fold(QPhi::zero(), |acc, (i, _)| &acc + &phi_pow(-(i as i64) - 1));
                    v <= x
                })
                .max()
                .unwrap();
            assert_eq!(greedy, best);
        }
    }

    proptest! {
        #[test]
        fn round_trip_within_last_place(raw in 0u64..(10u64 << 40), n in 1usize..60) {
            let p = required_precision(n);
            let x = FixedReal::from_raw(BigInt::from(raw), 40).with_precision(p);
            let d = to_golden_base(&x, n).unwrap();
            prop_assert!(!d.contains_adjacent_ones());
            let back = from_golden_base(&d).unwrap();
            let err = &QPhi::from_rational(&BigRational::new(BigInt::from(raw), BigInt::one() << 40usize)) - &back;
            prop_assert!(err.signum() >= 0);
            prop_assert!(err < phi_pow(-(n as i64)));
            let reparsed: GoldenDigits = d.to_string().parse().unwrap();
            prop_assert_eq!(from_golden_base(&reparsed).unwrap(), back);
        }
    }
}

//! Exact real scalars of the form `q · √r` with `q ∈ Q(φ)`.
//!
//! Covers every base, coefficient and prefactor that occurs in the formula
//! catalog: rationals, elements of `Q(φ)` (which already contains `√5`), and
//! their products with `√2` or `√3`. Radicands containing a factor 5 are folded
//! into the `Q(φ)` part through `√5 = 2φ − 1`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::fixed::FixedReal;
use crate::golden::{GoldenError, QPhi};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of {0} is outside Q(phi, sqrt 2, sqrt 3) products")]
    UnsupportedRadical(u64),
    #[error("mixed radicals sqrt {0} and sqrt {1} cannot be combined exactly")]
    MixedRadicals(u32, u32),
}

impl From<GoldenError> for ScalarError {
    fn from(_: GoldenError) -> Self {
        ScalarError::DivisionByZero
    }
}

/// `coeff · √radicand`, `radicand ∈ {1, 2, 3}`; zero is always stored with radicand 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RealScalar {
    coeff: QPhi,
    radicand: u32,
}

/// Kind tag of a scalar, for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    Rational,
    Golden,
    Surd,
}

impl RealScalar {
    fn make(coeff: QPhi, radicand: u32) -> Self {
        if coeff.is_zero() {
            RealScalar { coeff, radicand: 1 }
        } else {
            RealScalar { coeff, radicand }
        }
    }

    pub fn from_int(v: impl Into<BigInt>) -> Self {
        RealScalar::golden(QPhi::from_int(v))
    }

    pub fn rational(q: &BigRational) -> Self {
        RealScalar::golden(QPhi::from_rational(q))
    }

    pub fn golden(q: QPhi) -> Self {
        RealScalar::make(q, 1)
    }

    pub fn zero() -> Self {
        RealScalar::from_int(0)
    }

    pub fn one() -> Self {
        RealScalar::from_int(1)
    }

    /// `√n` for a positive integer whose square-free part is 1, 2, 3, 5, 10 or 15.
    pub fn sqrt(n: u64) -> Result<Self, ScalarError> {
        if n == 0 {
            return Ok(RealScalar::zero());
        }
        let (square, free) = split_square(n);
        let (golden, radicand) = match free {
            1 => (QPhi::one(), 1),
            2 => (QPhi::one(), 2),
            3 => (QPhi::one(), 3),
            5 => (QPhi::sqrt5(), 1),
            10 => (QPhi::sqrt5(), 2),
            15 => (QPhi::sqrt5(), 3),
            _ => return Err(ScalarError::UnsupportedRadical(n)),
        };
        Ok(RealScalar::make(&golden * &QPhi::from_int(square), radicand))
    }

    pub fn coeff(&self) -> &QPhi {
        &self.coeff
    }

    pub fn radicand(&self) -> u32 {
        self.radicand
    }

    pub fn kind(&self) -> ScalarKind {
        if self.radicand != 1 {
            ScalarKind::Surd
        } else if self.coeff.is_rational() {
            ScalarKind::Rational
        } else {
            ScalarKind::Golden
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    pub fn as_qphi(&self) -> Option<&QPhi> {
        (self.radicand == 1).then_some(&self.coeff)
    }

    pub fn as_rational(&self) -> Option<BigRational> {
        if self.radicand == 1 {
            self.coeff.to_rational()
        } else {
            None
        }
    }

    pub fn as_integer(&self) -> Option<BigInt> {
        if self.radicand == 1 {
            self.coeff.to_integer()
        } else {
            None
        }
    }

    pub fn signum(&self) -> i8 {
        self.coeff.signum()
    }

    pub fn abs(&self) -> Self {
        RealScalar::make(self.coeff.abs(), self.radicand)
    }

    pub fn neg(&self) -> Self {
        RealScalar::make(-&self.coeff, self.radicand)
    }

    pub fn add(&self, other: &RealScalar) -> Result<Self, ScalarError> {
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.clone());
        }
        if self.radicand != other.radicand {
            return Err(ScalarError::MixedRadicals(self.radicand, other.radicand));
        }
        Ok(RealScalar::make(&self.coeff + &other.coeff, self.radicand))
    }

    pub fn sub(&self, other: &RealScalar) -> Result<Self, ScalarError> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &RealScalar) -> Result<Self, ScalarError> {
        let coeff = &self.coeff * &other.coeff;
        match (self.radicand, other.radicand) {
            (1, r) | (r, 1) => Ok(RealScalar::make(coeff, r)),
            (r, s) if r == s => Ok(RealScalar::make(&coeff * &QPhi::from_int(r), 1)),
            _ if coeff.is_zero() => Ok(RealScalar::zero()),
            (r, s) => Err(ScalarError::MixedRadicals(r, s)),
        }
    }

    /// `(q√r)^-1 = q^-1 √r / r`.
    pub fn inv(&self) -> Result<Self, ScalarError> {
        let inv = self.coeff.inv()?;
        let scaled = inv.checked_div(&QPhi::from_int(self.radicand)).expect("radicand is positive");
        Ok(RealScalar::make(scaled, self.radicand))
    }

    pub fn div(&self, other: &RealScalar) -> Result<Self, ScalarError> {
        self.mul(&other.inv()?)
    }

    pub fn pow(&self, e: i64) -> Result<Self, ScalarError> {
        let mut base = if e < 0 { self.inv()? } else { self.clone() };
        let mut e = e.unsigned_abs();
        let mut acc = RealScalar::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Whether `|x| > 1`, decided exactly through `x² > 1`.
    pub fn exceeds_one_in_magnitude(&self) -> bool {
        let sq = self.mul(self).expect("same radicand");
        let sq = sq.as_qphi().expect("square is in Q(phi)");
        sq > &QPhi::one()
    }

    /// Real embedding with absolute error at most `2^(-p)`.
    pub fn embed(&self, p: u32) -> FixedReal {
        if self.radicand == 1 {
            return self.coeff.embed(p);
        }
        // q√r = ((2a + b)√r + b√(5r)) / (2 den)
        let q = p + 3;
        let r = BigInt::from(self.radicand);
        let a = &self.coeff.numerator().a;
        let b = &self.coeff.numerator().b;
        let root_term = |c: &BigInt, rad: &BigInt| -> BigInt {
            let mag = ((c * c * rad) << (2 * q as usize)).sqrt();
            if c.is_negative() {
                -mag
            } else {
                mag
            }
        };
        let total = root_term(&(a * 2 + b), &r) + root_term(b, &(&r * 5));
        FixedReal::from_raw(total / (self.coeff.denominator() * 2), q)
    }
}

/// `n = s² · f` with `f` square-free.
fn split_square(mut n: u64) -> (u64, u64) {
    let mut square = 1;
    let mut d = 2;
    while d * d <= n {
        while n.is_multiple_of(d * d) {
            n /= d * d;
            square *= d;
        }
        d += 1;
    }
    (square, n)
}

impl From<QPhi> for RealScalar {
    fn from(q: QPhi) -> Self {
        RealScalar::golden(q)
    }
}

impl From<i64> for RealScalar {
    fn from(v: i64) -> Self {
        RealScalar::from_int(v)
    }
}

impl fmt::Display for RealScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radicand == 1 {
            write!(f, "{}", self.coeff)
        } else if self.coeff == QPhi::one() {
            write!(f, "√{}", self.radicand)
        } else {
            let c = self.coeff.to_string();
            if c.contains(' ') && !c.starts_with('(') {
                write!(f, "({c})·√{}", self.radicand)
            } else {
                write!(f, "{c}·√{}", self.radicand)
            }
        }
    }
}

impl Zero for RealScalar {
    fn zero() -> Self {
        RealScalar::zero()
    }
    fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }
}

impl std::ops::Add for RealScalar {
    type Output = RealScalar;
    /// Panics on mixed radicals; use [`RealScalar::add`] for the checked form.
    fn add(self, o: RealScalar) -> RealScalar {
        RealScalar::add(&self, &o).expect("matching radicals")
    }
}

//! Exact arithmetic in `Z[φ]` and `Q(φ)`, Fibonacci and Lucas numbers.
//!
//! Elements are written `a + bφ` with `φ² = 1 + φ`. `√5 = 2φ − 1` lives in the
//! same field, so every argument that shows up in the golden-ratio arctangent
//! identities is an exact [`QPhi`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::fixed::FixedReal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GoldenError {
    #[error("division by zero in Q(phi)")]
    DivisionByZero,
    /// `1 ∓ xy = 0`: the combined angle is ±π/2 and has no finite tangent.
    #[error("combined arctangent argument is infinite ({0:?} of reciprocal pair)")]
    InfiniteArgument(CombineMode),
}

/// `a + bφ` with integer coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ZPhi {
    pub a: BigInt,
    pub b: BigInt,
}

impl ZPhi {
    pub fn new(a: impl Into<BigInt>, b: impl Into<BigInt>) -> Self {
        ZPhi { a: a.into(), b: b.into() }
    }

    pub fn zero() -> Self {
        ZPhi::new(0, 0)
    }

    pub fn one() -> Self {
        ZPhi::new(1, 0)
    }

    pub fn phi() -> Self {
        ZPhi::new(0, 1)
    }

    /// `√5 = 2φ − 1`.
    pub fn sqrt5() -> Self {
        ZPhi::new(-1, 2)
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    /// Field norm `N(a + bφ) = a² + ab − b²`.
    pub fn norm(&self) -> BigInt {
        &self.a * &self.a + &self.a * &self.b - &self.b * &self.b
    }

    /// Galois conjugate `a + b(1 − φ) = (a + b) − bφ`.
    pub fn conjugate(&self) -> Self {
        ZPhi { a: &self.a + &self.b, b: -&self.b }
    }

    /// Sign of the real embedding `a + b(1 + √5)/2`, decided exactly.
    pub fn signum(&self) -> i8 {
        // 2(a + bφ) = (2a + b) + b√5
        sign_of_surd(&(&self.a * 2 + &self.b), &self.b, 5)
    }
}

/// Sign of `x + y√r` for a non-square `r > 0`.
pub(crate) fn sign_of_surd(x: &BigInt, y: &BigInt, r: u32) -> i8 {
    let sx = x.signum();
    let sy = y.signum();
    if sy.is_zero() {
        return sign_i8(&sx);
    }
    if sx.is_zero() || sx == sy {
        return sign_i8(&sy);
    }
    match (x * x).cmp(&(y * y * r)) {
        Ordering::Greater => sign_i8(&sx),
        _ => sign_i8(&sy),
    }
}

fn sign_i8(v: &BigInt) -> i8 {
    if v.is_positive() {
        1
    } else if v.is_negative() {
        -1
    } else {
        0
    }
}

/// `(a₁ + b₁φ)(a₂ + b₂φ)` reduced with `φ² = 1 + φ`.
pub fn zphi_mul(x: &ZPhi, y: &ZPhi) -> ZPhi {
    let bb = &x.b * &y.b;
    ZPhi { a: &x.a * &y.a + &bb, b: &x.a * &y.b + &y.a * &x.b + bb }
}

impl Add for &ZPhi {
    type Output = ZPhi;
    fn add(self, o: &ZPhi) -> ZPhi {
        ZPhi { a: &self.a + &o.a, b: &self.b + &o.b }
    }
}

impl Sub for &ZPhi {
    type Output = ZPhi;
    fn sub(self, o: &ZPhi) -> ZPhi {
        ZPhi { a: &self.a - &o.a, b: &self.b - &o.b }
    }
}

impl Mul for &ZPhi {
    type Output = ZPhi;
    fn mul(self, o: &ZPhi) -> ZPhi {
        zphi_mul(self, o)
    }
}

impl Neg for &ZPhi {
    type Output = ZPhi;
    fn neg(self) -> ZPhi {
        ZPhi { a: -&self.a, b: -&self.b }
    }
}

impl fmt::Display for ZPhi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b_abs = self.b.abs();
        let b_term = if b_abs.is_one() { "φ".to_string() } else { format!("{b_abs}φ") };
        match (self.a.is_zero(), self.b.is_zero()) {
            (_, true) => write!(f, "{}", self.a),
            (true, false) if self.b.is_negative() => write!(f, "-{b_term}"),
            (true, false) => write!(f, "{b_term}"),
            (false, false) => {
                let op = if self.b.is_negative() { '-' } else { '+' };
                write!(f, "{} {op} {b_term}", self.a)
            }
        }
    }
}

/// `(a + bφ) / den` in lowest terms with `den > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QPhi {
    num: ZPhi,
    den: BigInt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QPhiOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl QPhi {
    pub fn new(num: ZPhi, den: impl Into<BigInt>) -> Result<Self, GoldenError> {
        let den = den.into();
        if den.is_zero() {
            return Err(GoldenError::DivisionByZero);
        }
        Ok(QPhi::normalized(num, den))
    }

    fn normalized(num: ZPhi, den: BigInt) -> Self {
        let (mut num, mut den) = (num, den);
        if den.is_negative() {
            num = -&num;
            den = -den;
        }
        let g = num.a.gcd(&num.b).gcd(&den);
        if !g.is_one() && !g.is_zero() {
            num = ZPhi { a: &num.a / &g, b: &num.b / &g };
            den /= &g;
        }
        if num.is_zero() {
            den = BigInt::one();
        }
        QPhi { num, den }
    }

    pub fn from_zphi(num: ZPhi) -> Self {
        QPhi { num, den: BigInt::one() }
    }

    pub fn from_int(v: impl Into<BigInt>) -> Self {
        QPhi::from_zphi(ZPhi::new(v, 0))
    }

    pub fn from_rational(q: &BigRational) -> Self {
        QPhi::normalized(ZPhi::new(q.numer().clone(), 0), q.denom().clone())
    }

    pub fn zero() -> Self {
        QPhi::from_int(0)
    }

    pub fn one() -> Self {
        QPhi::from_int(1)
    }

    pub fn phi() -> Self {
        QPhi::from_zphi(ZPhi::phi())
    }

    pub fn sqrt5() -> Self {
        QPhi::from_zphi(ZPhi::sqrt5())
    }

    pub fn numerator(&self) -> &ZPhi {
        &self.num
    }

    pub fn denominator(&self) -> &BigInt {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// Whether the φ coefficient vanishes.
    pub fn is_rational(&self) -> bool {
        self.num.b.is_zero()
    }

    pub fn to_rational(&self) -> Option<BigRational> {
        self.is_rational().then(|| BigRational::new(self.num.a.clone(), self.den.clone()))
    }

    pub fn to_integer(&self) -> Option<BigInt> {
        (self.is_rational() && self.den.is_one()).then(|| self.num.a.clone())
    }

    pub fn signum(&self) -> i8 {
        self.num.signum()
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn inv(&self) -> Result<Self, GoldenError> {
        if self.is_zero() {
            return Err(GoldenError::DivisionByZero);
        }
        // (a + bφ)^-1 = (a + b − bφ) / N(a + bφ)
        let n = self.num.norm();
        let conj = self.num.conjugate();
        Ok(QPhi::normalized(ZPhi { a: conj.a * &self.den, b: conj.b * &self.den }, n))
    }

    pub fn checked_div(&self, other: &QPhi) -> Result<Self, GoldenError> {
        Ok(self * &other.inv()?)
    }

    /// Integer power; negative exponents invert first.
    pub fn pow(&self, e: i64) -> Result<Self, GoldenError> {
        let mut base = if e < 0 { self.inv()? } else { self.clone() };
        let mut e = e.unsigned_abs();
        let mut acc = QPhi::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(acc)
    }

    /// Real embedding with absolute error at most `2^(-p)` (returned with `p + 2` bits).
    pub fn embed(&self, p: u32) -> FixedReal {
        let q = p + 2;
        // (a + bφ)/den = ((2a + b) + b√5) / (2 den)
        let x = &self.num.a * 2 + &self.num.b;
        let scaled_x = x << (q as usize);
        let b = &self.num.b;
        let root = ((b * b * 5u32) << (2 * q as usize)).sqrt();
        let scaled_y = if b.is_negative() { -root } else { root };
        let total = scaled_x + scaled_y;
        FixedReal::from_raw(total / (&self.den * 2), q)
    }
}

impl Add for &QPhi {
    type Output = QPhi;
    fn add(self, o: &QPhi) -> QPhi {
        let num = &ZPhi { a: &self.num.a * &o.den, b: &self.num.b * &o.den }
            + &ZPhi { a: &o.num.a * &self.den, b: &o.num.b * &self.den };
        QPhi::normalized(num, &self.den * &o.den)
    }
}

impl Sub for &QPhi {
    type Output = QPhi;
    fn sub(self, o: &QPhi) -> QPhi {
        self + &(-o)
    }
}

impl Mul for &QPhi {
    type Output = QPhi;
    fn mul(self, o: &QPhi) -> QPhi {
        QPhi::normalized(zphi_mul(&self.num, &o.num), &self.den * &o.den)
    }
}

impl Neg for &QPhi {
    type Output = QPhi;
    fn neg(self) -> QPhi {
        QPhi { num: -&self.num, den: self.den.clone() }
    }
}

impl Neg for QPhi {
    type Output = QPhi;
    fn neg(self) -> QPhi {
        -&self
    }
}

impl PartialOrd for QPhi {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QPhi {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum().cmp(&0)
    }
}

impl fmt::Display for QPhi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else if self.num.a.is_zero() || self.num.b.is_zero() {
            write!(f, "{}/{}", self.num, self.den)
        } else {
            write!(f, "({})/{}", self.num, self.den)
        }
    }
}

/// Exact field operation; division by zero is reported as a degenerate argument.
pub fn qphi_arith(x: &QPhi, y: &QPhi, op: QPhiOp) -> Result<QPhi, GoldenError> {
    Ok(match op {
        QPhiOp::Add => x + y,
        QPhiOp::Sub => x - y,
        QPhiOp::Mul => x * y,
        QPhiOp::Div => x.checked_div(y)?,
    })
}

/// Consecutive Fibonacci values `(F_n, F_{n+1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibPair {
    pub f_n: BigInt,
    pub f_n1: BigInt,
}

/// Fast doubling for `n >= 0`: `F_2k = F_k (2F_{k+1} − F_k)`, `F_{2k+1} = F_k² + F_{k+1}²`.
fn fib_pair_unsigned(n: u64) -> (BigInt, BigInt) {
    let mut f = BigInt::zero();
    let mut g = BigInt::one();
    for bit in (0..64 - n.leading_zeros()).rev() {
        let d = &f * (&g * 2 - &f);
        let e = &f * &f + &g * &g;
        if (n >> bit) & 1 == 1 {
            g = &d + &e;
            f = e;
        } else {
            f = d;
            g = e;
        }
    }
    (f, g)
}

/// `F_{-m} = (−1)^(m+1) F_m`.
fn negate_index(m: u64, v: BigInt) -> BigInt {
    if m.is_multiple_of(2) {
        -v
    } else {
        v
    }
}

/// `F_n` for any integer `n`, in `O(log |n|)` big-integer multiplications.
pub fn fib(n: i64) -> BigInt {
    let m = n.unsigned_abs();
    let (f, _) = fib_pair_unsigned(m);
    if n < 0 {
        negate_index(m, f)
    } else {
        f
    }
}

pub fn fib_pair(n: i64) -> FibPair {
    if n >= 0 {
        let (f_n, f_n1) = fib_pair_unsigned(n as u64);
        FibPair { f_n, f_n1 }
    } else {
        FibPair { f_n: fib(n), f_n1: fib(n + 1) }
    }
}

/// `L_n = F_{n−1} + F_{n+1}` for any integer `n`.
pub fn lucas(n: i64) -> BigInt {
    let FibPair { f_n, f_n1 } = fib_pair(n);
    // F_{n-1} = F_{n+1} - F_n
    &f_n1 * 2 - f_n
}

/// `φⁿ` exactly: `F_n φ + F_{n−1}` for `n >= 0`, `(−1)ⁿ(F_{n+1} − F_n φ)` for `φ^(−n)`.
pub fn phi_pow(n: i64) -> QPhi {
    let m = n.unsigned_abs() as i64;
    let FibPair { f_n, f_n1 } = fib_pair(m);
    if n >= 0 {
        let f_prev = &f_n1 - &f_n;
        QPhi::from_zphi(ZPhi { a: f_prev, b: f_n })
    } else {
        let z = ZPhi { a: f_n1, b: -f_n };
        QPhi::from_zphi(if m % 2 == 0 { z } else { -&z })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineMode {
    /// `atan x + atan y = atan((x + y)/(1 − xy))` (mod π)
    Sum,
    /// `atan x − atan y = atan((x − y)/(1 + xy))` (mod π)
    Diff,
}

/// Argument of the combined arctangent. Branch multiples of π are the caller's concern.
pub fn arctan_arg_combine(x: &QPhi, y: &QPhi, mode: CombineMode) -> Result<QPhi, GoldenError> {
    let xy = x * y;
    let one = QPhi::one();
    let (num, den) = match mode {
        CombineMode::Sum => (x + y, &one - &xy),
        CombineMode::Diff => (x - y, &one + &xy),
    };
    if den.is_zero() {
        return Err(GoldenError::InfiniteArgument(mode));
    }
    Ok(num.checked_div(&den).expect("non-zero denominator"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(a: i64, b: i64) -> ZPhi {
        ZPhi::new(a, b)
    }

    fn q(a: i64, b: i64, d: i64) -> QPhi {
        QPhi::new(z(a, b), d).unwrap()
    }

    /// Plain recurrence from (0, 1), extended downward with F_{n-2} = F_n − F_{n-1}.
    fn fib_by_recurrence(n: i64) -> BigInt {
        let (mut a, mut b) = (BigInt::zero(), BigInt::one());
        if n >= 0 {
            for _ in 0..n {
                let c = &a + &b;
                a = b;
                b = c;
            }
            a
        } else {
            // (a, b) = (F_0, F_1); step down to (F_{-1}, F_0)...
            for _ in 0..(-n) {
                let prev = &b - &a;
                b = a;
                a = prev;
            }
            a
        }
    }

    #[test]
    fn fib_examples() {
        assert_eq!(fib(0), BigInt::zero());
        assert_eq!(fib(10), fib_by_recurrence(10));
        assert_eq!(fib(10), BigInt::from(55));
        assert_eq!(fib(-3), fib_by_recurrence(-3));
        assert_eq!(fib(-3), BigInt::from(2));
        assert_eq!(fib(-4), BigInt::from(-3));
    }

    #[test]
    fn lucas_examples() {
        assert_eq!(lucas(0), BigInt::from(2));
        assert_eq!(lucas(1), BigInt::from(1));
        assert_eq!(lucas(10), fib_by_recurrence(9) + fib_by_recurrence(11));
        assert_eq!(lucas(10), BigInt::from(123));
        assert_eq!(lucas(-2), BigInt::from(3));
        assert_eq!(lucas(-3), BigInt::from(-4));
    }

    #[test]
    fn zphi_mul_examples() {
        assert_eq!(zphi_mul(&z(0, 1), &z(0, 1)), z(1, 1));
        let x = z(-7, 12);
        assert_eq!(zphi_mul(&ZPhi::one(), &x), x);
        assert_eq!(zphi_mul(&z(-1, 2), &z(-1, 2)), z(5, 0));
    }

    #[test]
    fn phi_pow_examples() {
        assert_eq!(phi_pow(0), QPhi::one());
        // F_5 = 5, F_4 = 3
        assert_eq!(phi_pow(5), q(3, 5, 1));
        assert_eq!(phi_pow(-2), q(2, -1, 1));
        assert_eq!(phi_pow(-1), q(-1, 1, 1));
    }

    #[test]
    fn phi_pow_agrees_with_extended_fibonacci_form() {
        for n in -40..=40 {
            let expect = QPhi::from_zphi(ZPhi { a: fib(n - 1), b: fib(n) });
            assert_eq!(phi_pow(n), expect, "n = {n}");
        }
    }

    #[test]
    fn qphi_arith_examples() {
        let x = q(3, 5, 1);
        assert_eq!(qphi_arith(&x, &x, QPhiOp::Div).unwrap(), QPhi::one());
        let s5 = QPhi::sqrt5();
        assert_eq!(qphi_arith(&s5, &s5, QPhiOp::Mul).unwrap(), QPhi::from_int(5));
        assert_eq!(qphi_arith(&QPhi::one(), &QPhi::phi(), QPhiOp::Div).unwrap(), q(-1, 1, 1));
        assert_eq!(qphi_arith(&x, &QPhi::zero(), QPhiOp::Div), Err(GoldenError::DivisionByZero));
        assert_eq!(qphi_arith(&x, &x, QPhiOp::Sub).unwrap(), QPhi::zero());
        assert_eq!(qphi_arith(&x, &x, QPhiOp::Add).unwrap(), q(6, 10, 1));
    }

    #[test]
    fn normalization_is_canonical() {
        assert_eq!(q(2, 4, 6), q(1, 2, 3));
        assert_eq!(q(2, 4, -6), q(-1, -2, 3));
        assert_eq!(q(0, 0, -9), QPhi::zero());
        assert_eq!(q(1, 2, -3).denominator(), &BigInt::from(3));
        assert!(QPhi::new(z(1, 1), 0).is_err());
    }

    #[test]
    fn arctan_arg_combine_examples() {
        let inv_phi = phi_pow(-1);
        assert_eq!(arctan_arg_combine(&inv_phi, &inv_phi, CombineMode::Sum).unwrap(), QPhi::from_int(2));
        let x = q(4, -7, 3);
        assert_eq!(arctan_arg_combine(&x, &QPhi::zero(), CombineMode::Sum).unwrap(), x);
        assert_eq!(arctan_arg_combine(&inv_phi, &phi_pow(-3), CombineMode::Sum).unwrap(), QPhi::one());
        // atan(φ) + atan(1/φ) = π/2
        assert_eq!(
            arctan_arg_combine(&QPhi::phi(), &inv_phi, CombineMode::Sum),
            Err(GoldenError::InfiniteArgument(CombineMode::Sum))
        );
        assert_eq!(
            arctan_arg_combine(&QPhi::one(), &QPhi::from_int(-1), CombineMode::Diff),
            Err(GoldenError::InfiniteArgument(CombineMode::Diff))
        );
    }

    #[test]
    fn exact_sign_and_order() {
        assert_eq!(QPhi::sqrt5().signum(), 1);
        assert_eq!(q(2, -1, 1).signum(), 1); // 1/φ²
        assert_eq!(q(-2, 1, 1).signum(), -1);
        assert_eq!(q(-1, 1, 1).signum(), 1); // 1/φ
        assert_eq!(q(1, -1, 1).signum(), -1);
        assert!(phi_pow(3) > phi_pow(2));
        assert!(phi_pow(-3) < phi_pow(-2));
        assert!(QPhi::from_int(2) < QPhi::sqrt5());
        assert!(QPhi::from_int(3) > QPhi::sqrt5());
    }

    #[test]
    fn embedding_matches_golden_ratio() {
        let v = QPhi::phi().embed(60).to_f64();
        assert!((v - 1.618_033_988_749_895).abs() < 1e-15);
        let v = q(7, -3, 4).embed(60).to_f64();
        assert!((v - (7.0 - 3.0 * 1.618_033_988_749_895) / 4.0).abs() < 1e-15);
        assert_eq!(QPhi::from_int(-3).embed(10), FixedReal::from_int(-3, 12));
    }

    #[test]
    fn display_forms() {
        assert_eq!(q(3, 5, 1).to_string(), "3 + 5φ");
        assert_eq!(q(2, -1, 1).to_string(), "2 - φ");
        assert_eq!(q(0, -1, 2).to_string(), "-φ/2");
        assert_eq!(q(1, 1, 2).to_string(), "(1 + φ)/2");
        assert_eq!(q(5, 0, 1).to_string(), "5");
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn zphi() -> impl Strategy<Value = ZPhi> {
            (-10_000i64..10_000, -10_000i64..10_000).prop_map(|(a, b)| z(a, b))
        }

        fn qphi() -> impl Strategy<Value = QPhi> {
            (-500i64..500, -500i64..500, 1i64..60).prop_map(|(a, b, d)| q(a, b, d))
        }

        proptest! {
            #[test]
            fn ring_axioms(x in qphi(), y in qphi(), w in qphi()) {
                prop_assert_eq!(&x + &y, &y + &x);
                prop_assert_eq!(&x * &y, &y * &x);
                prop_assert_eq!(&(&x * &y) * &w, &x * &(&y * &w));
                prop_assert_eq!(&x * &(&y + &w), &(&x * &y) + &(&x * &w));
                prop_assert_eq!(&(&x - &y) + &y, x.clone());
                if !x.is_zero() {
                    prop_assert_eq!(&x * &x.inv().unwrap(), QPhi::one());
                }
            }

            #[test]
            fn norm_is_multiplicative(x in zphi(), y in zphi()) {
                prop_assert_eq!(zphi_mul(&x, &y).norm(), x.norm() * y.norm());
            }

            #[test]
            fn phi_power_homomorphism(m in -300i64..300, n in -300i64..300) {
                prop_assert_eq!(phi_pow(m + n), &phi_pow(m) * &phi_pow(n));
                prop_assert_eq!(phi_pow(n), &phi_pow(n - 1) + &phi_pow(n - 2));
            }

            #[test]
            fn fast_doubling_matches_recurrence(n in -1000i64..=1000) {
                prop_assert_eq!(fib(n), fib_by_recurrence(n));
                prop_assert_eq!(lucas(n), fib_by_recurrence(n - 1) + fib_by_recurrence(n + 1));
            }

            #[test]
            fn order_agrees_with_embedding(x in qphi(), y in qphi()) {
                let (ex, ey) = (x.embed(80), y.embed(80));
                if ex.sub(&ey, 80).abs_le_pow2(-70) {
                    return Ok(());
                }
                prop_assert_eq!(x.cmp(&y), ex.cmp(&ey));
            }

            #[test]
            fn combined_argument_obeys_the_addition_law(x in qphi(), y in qphi()) {
                prop_assume!(&x * &y < QPhi::one());
                let c = arctan_arg_combine(&x, &y, CombineMode::Sum).unwrap();
                let p = 100;
                let at = |v: &QPhi| crate::fixed::arctan(&v.embed(p + 4), p + 2);
                let lhs = at(&x).add_exact(&at(&y));
                prop_assert!(lhs.sub(&at(&c), p).abs_le_pow2(-(p as i64) + 3));
            }
        }
    }
}

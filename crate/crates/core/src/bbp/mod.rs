//! Polylogarithm-constant series `P(s, b, l, A) = Σ_k b^-k Σ_j a_j / (k l + j)^s`.
//!
//! A [`BbpFormula`] carries the series data, a prefactor and the expression it
//! claims to equal. Bases may be integers, rationals, or elements of `Q(φ)`
//! (including negative ones); coefficients may additionally carry `√2`/`√3`.

pub mod construct;
pub mod digits;

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::fixed::{shift_trunc, FixedReal};
use crate::scalar::{RealScalar, ScalarError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BbpError {
    #[error("base {0} does not exceed 1 in magnitude")]
    BaseTooSmall(String),
    #[error("coefficient vector is empty")]
    EmptyCoefficients,
    #[error("degree must be positive")]
    ZeroDegree,
    #[error("formulas differ in (s, base, length): {0}")]
    Mismatched(String),
    #[error("no terms to combine")]
    NothingToCombine,
    #[error("formula `{name}` is not digit-extraction eligible: {reason} (requires an integer base >= 2, s = 1, integer coefficients and a prefactor whose denominator divides a power of the base)")]
    NotEligible { name: String, reason: String },
    #[error("digit boundary risk at position {position} persists after retry")]
    BoundaryRisk { position: u64 },
    #[error("request out of bounds: {0}")]
    OutOfBounds(String),
    #[error("base {0} is not an integer power of base {1}")]
    NoPowerRelation(String, String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BbpFormula {
    pub name: String,
    s: u32,
    base: RealScalar,
    coefficients: Vec<RealScalar>,
    prefactor: RealScalar,
    pub lhs: Expr,
}

/// Which of the three general arctangent series to instantiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArctanKind {
    /// `atan(1/u)`, base `u^4`, length 4.
    RecipU,
    /// `atan(1/(2u - 1))`, base `16u^8`, length 8.
    Recip2uMinus1,
    /// `atan(1/(2u + 1))`, base `16u^8`, length 8.
    Recip2uPlus1,
}

impl BbpFormula {
    pub fn new(
        name: impl Into<String>,
        s: u32,
        base: RealScalar,
        coefficients: Vec<RealScalar>,
        prefactor: RealScalar,
        lhs: Expr,
    ) -> Result<Self, BbpError> {
        if s == 0 {
            return Err(BbpError::ZeroDegree);
        }
        if coefficients.is_empty() {
            return Err(BbpError::EmptyCoefficients);
        }
        if !base.exceeds_one_in_magnitude() {
            return Err(BbpError::BaseTooSmall(base.to_string()));
        }
        Ok(BbpFormula { name: name.into(), s, base, coefficients, prefactor, lhs })
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn base(&self) -> &RealScalar {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[RealScalar] {
        &self.coefficients
    }

    pub fn prefactor(&self) -> &RealScalar {
        &self.prefactor
    }

    /// Coefficients as integers, when they all are.
    pub fn integer_coefficients(&self) -> Option<Vec<BigInt>> {
        self.coefficients.iter().map(|a| a.as_integer()).collect()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_lhs(mut self, lhs: Expr) -> Self {
        self.lhs = lhs;
        self
    }

    fn log2_abs(x: &RealScalar) -> f64 {
        let v = x.embed(64).to_f64().abs();
        if v == 0.0 {
            f64::NEG_INFINITY
        } else {
            v.log2()
        }
    }

    /// `log2` of the tail bound `|prefactor| Σ|a_j| |b|^-K / (1 - 1/|b|)`.
    pub fn tail_bound_log2(&self, k_terms: u64) -> f64 {
        let lb = Self::log2_abs(&self.base) * (1.0 - 1e-12);
        let abs_sum: f64 = self.coefficients.iter().map(|a| a.embed(64).to_f64().abs()).sum();
        let geometric = -(1.0 - (-lb).exp2()).log2();
        Self::log2_abs(&self.prefactor) + abs_sum.log2() + geometric - k_terms as f64 * lb + 1e-9
    }

    /// Smallest term count whose tail is at most `2^(-p-2)`.
    pub fn terms_for(&self, p: u32) -> u64 {
        let lb = Self::log2_abs(&self.base) * (1.0 - 1e-12);
        let excess = self.tail_bound_log2(0) + p as f64 + 2.0;
        if excess <= 0.0 {
            1
        } else {
            (excess / lb).ceil() as u64 + 1
        }
    }

    /// Value with absolute error at most `2^(-p)`.
    pub fn eval(&self, p: u32) -> FixedReal {
        self.eval_terms(self.terms_for(p), p)
    }

    /// Prefactor times the partial sum over `k < k_terms`, with rounding error at
    /// most `2^(-p-2)` (the truncated tail is not included).
    pub fn eval_terms(&self, k_terms: u64, p: u32) -> FixedReal {
        let bits = |v: u64| 64 - v.leading_zeros();
        let mag = |x: &RealScalar| Self::log2_abs(x).max(0.0).ceil() as u32;
        let a_max = self.coefficients.iter().map(mag).max().unwrap_or(0);
        let guard = 2 * bits(k_terms.max(1)) + bits(self.len() as u64) + a_max + mag(&self.prefactor) + 12;
        let w = p + 2 + guard;

        let int_coeffs = self.integer_coefficients();
        let emb_coeffs: Vec<BigInt> =
            self.coefficients.iter().map(|a| a.embed(w).with_precision(w).raw().clone()).collect();
        let int_base = self.base.as_integer();
        let inv_base = self.base.inv().expect("|base| > 1").embed(w).with_precision(w).raw().clone();
        let l = self.len() as u64;

        let mut pow = BigInt::one() << w as usize;
        let mut acc = BigInt::zero();
        for k in 0..k_terms {
            for j in 0..l {
                let den = BigInt::from(k * l + j + 1).pow(self.s);
                let num = match &int_coeffs {
                    Some(ints) if ints[j as usize].is_zero() => continue,
                    Some(ints) => &pow * &ints[j as usize],
                    None => shift_trunc(&(&pow * &emb_coeffs[j as usize]), -(w as i64)),
                };
                acc += num / den;
            }
            pow = match &int_base {
                Some(b) => pow / b,
                None => shift_trunc(&(&pow * &inv_base), -(w as i64)),
            };
        }
        let pref = self.prefactor.embed(w).with_precision(w);
        let total = shift_trunc(&(acc * pref.raw()), -(w as i64));
        FixedReal::from_raw(total, w).with_precision(p + 2)
    }

    /// Equivalent series in base `b^r` and length `l r`: slot `t l + j` holds
    /// `a_j b^(r-1-t)` and the prefactor absorbs `b^-(r-1)`.
    pub fn rebase(&self, r: u32) -> Result<Self, BbpError> {
        if r == 0 {
            return Err(BbpError::OutOfBounds("rebase factor must be positive".into()));
        }
        let r = r as i64;
        let mut coefficients = Vec::with_capacity(self.len() * r as usize);
        for t in 0..r {
            let scale = self.base.pow(r - 1 - t)?;
            for a in &self.coefficients {
                coefficients.push(a.mul(&scale)?);
            }
        }
        Ok(BbpFormula {
            name: self.name.clone(),
            s: self.s,
            base: self.base.pow(r)?,
            coefficients,
            prefactor: self.prefactor.mul(&self.base.pow(1 - r)?)?,
            lhs: self.lhs.clone(),
        })
    }

    /// Equivalent series of length `l m` in the same base: slot `m j` holds
    /// `m^s a_j`, every other slot is zero.
    pub fn lengthen(&self, m: u32) -> Result<Self, BbpError> {
        if m == 0 {
            return Err(BbpError::OutOfBounds("length factor must be positive".into()));
        }
        let factor = RealScalar::from_int(BigInt::from(m).pow(self.s));
        let mut coefficients = vec![RealScalar::zero(); self.len() * m as usize];
        for (j, a) in self.coefficients.iter().enumerate() {
            coefficients[(j + 1) * m as usize - 1] = a.mul(&factor)?;
        }
        Ok(BbpFormula { coefficients, ..self.clone() })
    }

    /// Multiplies the whole formula, including its claimed value, by `c`.
    pub fn scale(&self, c: &RealScalar) -> Result<Self, BbpError> {
        Ok(BbpFormula { prefactor: self.prefactor.mul(c)?, lhs: scaled_expr(c, self.lhs.clone()), ..self.clone() })
    }

    /// Digit-extraction eligibility, derived from the data.
    pub fn is_digit_eligible(&self) -> bool {
        digits::DigitPlan::new(self).is_ok()
    }
}

fn scaled_expr(c: &RealScalar, e: Expr) -> Expr {
    if *c == RealScalar::one() {
        e
    } else {
        Expr::mul(Expr::from_scalar(c), e)
    }
}

/// `gcd` of numerators over `lcm` of denominators; one for an all-zero list.
pub fn rational_content(values: &[BigRational]) -> BigRational {
    let mut g = BigInt::zero();
    let mut l = BigInt::one();
    for v in values {
        g = g.gcd(v.numer());
        l = l.lcm(v.denom());
    }
    if g.is_zero() {
        BigRational::one()
    } else {
        BigRational::new(g, l)
    }
}

/// `Σ c_i f_i` for formulas sharing `(s, base, l)`. When every combined slot is
/// rational the prefactor becomes their content and the vector is primitive.
pub fn linear_combine(terms: &[(RealScalar, BbpFormula)]) -> Result<BbpFormula, BbpError> {
    let (_, first) = terms.first().ok_or(BbpError::NothingToCombine)?;
    for (_, f) in terms {
        if f.s != first.s || f.base != first.base || f.len() != first.len() {
            return Err(BbpError::Mismatched(format!(
                "({}, {}, {}) vs ({}, {}, {})",
                first.s,
                first.base,
                first.len(),
                f.s,
                f.base,
                f.len()
            )));
        }
    }
    let mut combined = vec![RealScalar::zero(); first.len()];
    let mut lhs: Option<Expr> = None;
    for (c, f) in terms {
        let weight = c.mul(&f.prefactor)?;
        for (slot, a) in combined.iter_mut().zip(&f.coefficients) {
            *slot = slot.add(&a.mul(&weight)?)?;
        }
        let term = scaled_expr(c, f.lhs.clone());
        lhs = Some(match lhs {
            None => term,
            Some(acc) => Expr::add(acc, term),
        });
    }
    let rationals: Option<Vec<BigRational>> = combined.iter().map(|a| a.as_rational()).collect();
    let (prefactor, coefficients) = match rationals {
        Some(qs) => {
            let content = rational_content(&qs);
            let coeffs = qs.iter().map(|q| RealScalar::rational(&(q / &content))).collect();
            (RealScalar::rational(&content), coeffs)
        }
        None => {
            let common = terms
                .iter()
                .map(|(c, f)| c.mul(&f.prefactor))
                .find(|w| w.as_ref().map_or(true, |w| !w.is_zero()))
                .unwrap_or_else(|| Ok(RealScalar::one()))?;
            let coeffs = combined.iter().map(|a| a.div(&common)).collect::<Result<_, _>>()?;
            (common, coeffs)
        }
    };
    let names: Vec<&str> = terms.iter().map(|(_, f)| f.name.as_str()).collect();
    Ok(BbpFormula {
        name: names.join("+"),
        s: first.s,
        base: first.base.clone(),
        coefficients,
        prefactor,
        lhs: lhs.expect("at least one term"),
    })
}

/// Instantiates one of the three general arctangent series at `u`.
pub fn general_arctan_formula(kind: ArctanKind, u: &RealScalar) -> Result<BbpFormula, BbpError> {
    let pw = |e: i64| u.pow(e);
    let int = |v: i64| RealScalar::from_int(v);
    let times = |c: i64, e: i64| -> Result<RealScalar, ScalarError> { int(c).mul(&u.pow(e)?) };
    if u.is_zero() {
        return Err(BbpError::BaseTooSmall("0".into()));
    }
    let (base, coefficients, prefactor, arg) = match kind {
        ArctanKind::RecipU => (pw(4)?, vec![pw(2)?, int(0), int(-1), int(0)], pw(-3)?, u.clone()),
        ArctanKind::Recip2uMinus1 | ArctanKind::Recip2uPlus1 => {
            let sg = if kind == ArctanKind::Recip2uMinus1 { 1 } else { -1 };
            (
                times(16, 8)?,
                vec![
                    times(8, 6)?,
                    times(8 * sg, 5)?,
                    times(4, 4)?,
                    int(0),
                    times(-2, 2)?,
                    times(-2 * sg, 1)?,
                    int(-1),
                    int(0),
                ],
                times(16, 7)?.inv()?,
                times(2, 1)?.sub(&int(sg))?,
            )
        }
    };
    if arg.is_zero() {
        return Err(BbpError::Scalar(ScalarError::DivisionByZero));
    }
    let lhs = Expr::atan(Expr::from_scalar(&arg.inv()?));
    let name = match kind {
        ArctanKind::RecipU => format!("arctan-recip-u({u})"),
        ArctanKind::Recip2uMinus1 => format!("arctan-recip-2u-minus-1({u})"),
        ArctanKind::Recip2uPlus1 => format!("arctan-recip-2u-plus-1({u})"),
    };
    BbpFormula::new(name, 1, base, coefficients, prefactor, lhs)
}

impl fmt::Display for BbpFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coeffs: Vec<String> = self.coefficients.iter().map(|a| a.to_string()).collect();
        write!(
            f,
            "{} = ({}) * P({}, {}, {}, ({}))",
            self.lhs,
            self.prefactor,
            self.s,
            self.base,
            self.len(),
            coeffs.join(", ")
        )
    }
}

/// Absolute value check helper used by callers comparing against oracles.
pub fn within(a: &FixedReal, b: &FixedReal, exp: i64) -> bool {
    a.sub_exact(b).abs().abs_le_pow2(exp)
}

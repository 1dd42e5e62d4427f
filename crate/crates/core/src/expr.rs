//! Expression trees for identity sides, formula targets and coefficient entries.
//!
//! Text syntax: integers, `pi`, `phi`, variables, `+ - * / ^`, implicit
//! multiplication (`2k`, `16phi^8`), and the functions `atan`, `log`,
//! `sqrt`, `F` (Fibonacci), `L` (Lucas) and `sum(var, lo, hi, body)` where
//! `hi` may be `inf`.
//!
//! Evaluation is either exact (into [`RealScalar`]) or numeric with a certified
//! absolute error of at most `2^(-p)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::fixed::{self, FixedReal};
use crate::golden::{fib, lucas, QPhi};
use crate::scalar::{RealScalar, ScalarError};

/// Bindings of integer parameters.
pub type Env = BTreeMap<String, i64>;

/// Largest Fibonacci/Lucas index evaluated inside expressions.
pub const MAX_INDEX: i64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression has no exact value: {0}")]
    NotExact(String),
    #[error("expected an integer for {0}")]
    NonInteger(&'static str),
    #[error("infinite sum cannot be evaluated directly")]
    InfiniteSum,
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl From<ScalarError> for ExprError {
    fn from(e: ScalarError) -> Self {
        match e {
            ScalarError::DivisionByZero => ExprError::DivisionByZero,
            ScalarError::MixedRadicals(..) => ExprError::NotExact(e.to_string()),
            ScalarError::UnsupportedRadical(_) => ExprError::Unsupported(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Num(BigInt),
    Var(String),
    Pi,
    Phi,
    Sqrt(Box<Expr>),
    Atan(Box<Expr>),
    Log(Box<Expr>),
    Fib(Box<Expr>),
    Lucas(Box<Expr>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    /// `hi = None` is an infinite upper bound.
    Sum {
        var: String,
        lo: Box<Expr>,
        hi: Option<Box<Expr>>,
        body: Box<Expr>,
    },
}

/// Rational coefficients over non-rational atoms, keyed by canonical text;
/// the key `"1"` holds the rational constant.
pub type LinearForm = BTreeMap<String, BigRational>;

fn bx(e: Expr) -> Box<Expr> {
    Box::new(e)
}

// tree builders, not operator overloads
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let tokens = lex(src)?;
        let mut p = Parser { tokens, pos: 0, len: src.len() };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn int(v: impl Into<BigInt>) -> Expr {
        Expr::Num(v.into())
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::Div(bx(Expr::int(n)), bx(Expr::int(d)))
    }

    pub fn atan(e: Expr) -> Expr {
        Expr::Atan(bx(e))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(bx(a), bx(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(bx(a), bx(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(bx(a), bx(b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(bx(a), bx(b))
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(bx(a))
    }

    /// Exact expression for a scalar, in the form `(a + b*phi)/d * sqrt(r)`.
    pub fn from_scalar(x: &RealScalar) -> Expr {
        let q = x.coeff();
        let (a, b) = (&q.numerator().a, &q.numerator().b);
        let signed_int = |v: &BigInt| {
            if v.is_negative() {
                Expr::neg(Expr::Num(-v))
            } else {
                Expr::Num(v.clone())
            }
        };
        let phi_term = |v: &BigInt| {
            if v.abs().is_one() {
                Expr::Phi
            } else {
                Expr::mul(Expr::Num(v.abs()), Expr::Phi)
            }
        };
        let num = if b.is_zero() {
            signed_int(a)
        } else if a.is_zero() {
            if b.is_negative() {
                Expr::neg(phi_term(b))
            } else {
                phi_term(b)
            }
        } else if b.is_negative() {
            Expr::sub(signed_int(a), phi_term(b))
        } else {
            Expr::add(signed_int(a), phi_term(b))
        };
        let den = q.denominator();
        let mut e = if den.is_one() { num } else { Expr::div(num, Expr::Num(den.clone())) };
        if x.radicand() != 1 {
            e = Expr::mul(e, Expr::Sqrt(bx(Expr::int(x.radicand()))));
        }
        e
    }

    pub fn contains_infinite_sum(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if let Expr::Sum { hi: None, .. } = e {
                found = true;
            }
        });
        found
    }

    /// Variables not bound by an enclosing sum.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a str>, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(v) if !bound.contains(&v.as_str()) => {
                out.insert(v.clone());
            }
            Expr::Num(_) | Expr::Var(_) | Expr::Pi | Expr::Phi => {}
            Expr::Sqrt(c) | Expr::Atan(c) | Expr::Log(c) | Expr::Fib(c) | Expr::Lucas(c) | Expr::Neg(c) => {
                c.collect_free(bound, out)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Expr::Sum { var, lo, hi, body } => {
                lo.collect_free(bound, out);
                if let Some(h) = hi {
                    h.collect_free(bound, out);
                }
                bound.push(var);
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Pi | Expr::Phi => {}
            Expr::Sqrt(c) | Expr::Atan(c) | Expr::Log(c) | Expr::Fib(c) | Expr::Lucas(c) | Expr::Neg(c) => c.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Sum { lo, hi, body, .. } => {
                lo.visit(f);
                if let Some(h) = hi {
                    h.visit(f);
                }
                body.visit(f);
            }
        }
    }

    /// Replaces the first infinite sum by its partial sum of `n_terms` terms.
    /// Returns the new tree and the last included index.
    pub fn truncate_infinite(&self, env: &Env, n_terms: u64) -> Result<Option<(Expr, i64)>, ExprError> {
        let mut last = None;
        let e = self.truncate_rec(env, n_terms, &mut last)?;
        Ok(last.map(|m| (e, m)))
    }

    fn truncate_rec(&self, env: &Env, n: u64, last: &mut Option<i64>) -> Result<Expr, ExprError> {
        let map1 = |c: &Expr, last: &mut Option<i64>| c.truncate_rec(env, n, last).map(bx);
        Ok(match self {
            Expr::Sum { var, lo, hi: None, body } if last.is_none() => {
                let lo_v = lo.eval_index(env, "sum bound")?;
                let m = lo_v + n as i64 - 1;
                *last = Some(m);
                Expr::Sum { var: var.clone(), lo: lo.clone(), hi: Some(bx(Expr::int(m))), body: body.clone() }
            }
            Expr::Sqrt(c) => Expr::Sqrt(map1(c, last)?),
            Expr::Atan(c) => Expr::Atan(map1(c, last)?),
            Expr::Log(c) => Expr::Log(map1(c, last)?),
            Expr::Neg(c) => Expr::Neg(map1(c, last)?),
            Expr::Add(a, b) => Expr::Add(map1(a, last)?, map1(b, last)?),
            Expr::Sub(a, b) => Expr::Sub(map1(a, last)?, map1(b, last)?),
            Expr::Mul(a, b) => Expr::Mul(map1(a, last)?, map1(b, last)?),
            Expr::Div(a, b) => Expr::Div(map1(a, last)?, map1(b, last)?),
            other => other.clone(),
        })
    }

    fn eval_index(&self, env: &Env, what: &'static str) -> Result<i64, ExprError> {
        let v = self.eval_exact(env)?;
        v.as_integer().and_then(|i| i.to_i64()).ok_or(ExprError::NonInteger(what))
    }

    /// Exact value, or [`ExprError::NotExact`] when the tree involves `pi`,
    /// `atan`, `log` or incompatible radicals.
    pub fn eval_exact(&self, env: &Env) -> Result<RealScalar, ExprError> {
        match self {
            Expr::Num(v) => Ok(RealScalar::from_int(v.clone())),
            Expr::Var(name) => {
                env.get(name).map(|v| RealScalar::from_int(*v)).ok_or_else(|| ExprError::UnboundVariable(name.clone()))
            }
            Expr::Phi => Ok(RealScalar::golden(QPhi::phi())),
            Expr::Pi => Err(ExprError::NotExact("pi".into())),
            Expr::Atan(_) => Err(ExprError::NotExact("atan".into())),
            Expr::Log(_) => Err(ExprError::NotExact("log".into())),
            Expr::Sqrt(c) => {
                let v = c.eval_exact(env)?;
                let q = v.as_rational().ok_or_else(|| ExprError::Unsupported(format!("sqrt of irrational {v}")))?;
                if q.is_negative() {
                    return Err(ExprError::Domain(format!("sqrt of negative {q}")));
                }
                // sqrt(n/d) = sqrt(n d)/d
                let nd = (q.numer() * q.denom())
                    .to_u64()
                    .ok_or_else(|| ExprError::Unsupported("sqrt argument too large".into()))?;
                let root = RealScalar::sqrt(nd)?;
                Ok(root.div(&RealScalar::from_int(q.denom().clone()))?)
            }
            Expr::Fib(c) | Expr::Lucas(c) => {
                let n = c.eval_index(env, "Fibonacci/Lucas index")?;
                if n.abs() > MAX_INDEX {
                    return Err(ExprError::Unsupported(format!("index {n} exceeds {MAX_INDEX}")));
                }
                let v = if matches!(self, Expr::Fib(_)) { fib(n) } else { lucas(n) };
                Ok(RealScalar::from_int(v))
            }
            Expr::Neg(c) => Ok(c.eval_exact(env)?.neg()),
            Expr::Add(a, b) => Ok(a.eval_exact(env)?.add(&b.eval_exact(env)?)?),
            Expr::Sub(a, b) => Ok(a.eval_exact(env)?.sub(&b.eval_exact(env)?)?),
            Expr::Mul(a, b) => Ok(a.eval_exact(env)?.mul(&b.eval_exact(env)?)?),
            Expr::Div(a, b) => {
                let d = b.eval_exact(env)?;
                if d.is_zero() {
                    return Err(ExprError::DivisionByZero);
                }
                Ok(a.eval_exact(env)?.div(&d)?)
            }
            Expr::Pow(a, e) => {
                let n = e.eval_index(env, "exponent")?;
                let base = a.eval_exact(env)?;
                if base.is_zero() && n < 0 {
                    return Err(ExprError::DivisionByZero);
                }
                Ok(base.pow(n)?)
            }
            Expr::Sum { var, lo, hi, body } => {
                let hi = hi.as_ref().ok_or(ExprError::InfiniteSum)?;
                let (lo, hi) = (lo.eval_index(env, "sum bound")?, hi.eval_index(env, "sum bound")?);
                let mut env = env.clone();
                let mut acc = RealScalar::zero();
                for k in lo..=hi {
                    env.insert(var.clone(), k);
                    acc = acc.add(&body.eval_exact(&env)?)?;
                }
                Ok(acc)
            }
        }
    }

    fn exact_or_pass(&self, env: &Env) -> Result<Option<RealScalar>, ExprError> {
        match self.eval_exact(env) {
            Ok(v) => Ok(Some(v)),
            Err(ExprError::NotExact(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Numeric value with absolute error at most `2^(-p)`.
    pub fn eval_numeric(&self, env: &Env, p: u32) -> Result<FixedReal, ExprError> {
        if let Some(v) = self.exact_or_pass(env)? {
            return Ok(v.embed(p));
        }
        match self {
            Expr::Pi => Ok(fixed::pi(p)),
            Expr::Atan(c) => Ok(fixed::arctan(&c.eval_numeric(env, p + 1)?, p + 1)),
            Expr::Log(c) => {
                let lb = c.lower_bound_exp(env)?;
                let x = c.eval_numeric(env, p + 2 + (-lb).max(0) as u32)?;
                fixed::log(&x, p + 1).map_err(|e| ExprError::Domain(e.to_string()))
            }
            Expr::Neg(c) => Ok(-c.eval_numeric(env, p)?),
            Expr::Add(a, b) => Ok(a.eval_numeric(env, p + 1)?.add_exact(&b.eval_numeric(env, p + 1)?)),
            Expr::Sub(a, b) => Ok(a.eval_numeric(env, p + 1)?.sub_exact(&b.eval_numeric(env, p + 1)?)),
            Expr::Mul(a, b) => {
                let ma = a.magnitude_exp(env)?.max(0) as u32;
                let mb = b.magnitude_exp(env)?.max(0) as u32;
                let x = a.eval_numeric(env, p + 3 + mb)?;
                let y = b.eval_numeric(env, p + 3 + ma)?;
                Ok(x.mul(&y, p + 2))
            }
            Expr::Div(a, b) => {
                if let Some(d) = b.exact_or_pass(env)? {
                    if d.is_zero() {
                        return Err(ExprError::DivisionByZero);
                    }
                    let inv = Expr::from_scalar(&d.inv()?);
                    return Expr::Mul(a.clone(), bx(inv)).eval_numeric(env, p);
                }
                // |b| >= 2^lb, |a| < 2^ma
                let lb = b.lower_bound_exp(env)?;
                let ma = a.magnitude_exp(env)?.max(0);
                let qa = (p as i64 + 3 - lb).max(1) as u32;
                let qb = (p as i64 + 4 + ma - 2 * lb).max(1) as u32;
                let x = a.eval_numeric(env, qa)?;
                let y = b.eval_numeric(env, qb)?;
                x.div(&y, p + 3).map_err(|_| ExprError::DivisionByZero)
            }
            Expr::Pow(a, e) => {
                let n = e.eval_index(env, "exponent")?;
                if n == 0 {
                    return Ok(FixedReal::one(p));
                }
                if n.abs() > 64 {
                    return Err(ExprError::Unsupported("power of an inexact base above 64".into()));
                }
                let mut prod = (**a).clone();
                for _ in 1..n.abs() {
                    prod = Expr::mul(prod, (**a).clone());
                }
                if n < 0 {
                    prod = Expr::div(Expr::int(1), prod);
                }
                prod.eval_numeric(env, p)
            }
            Expr::Sum { var, lo, hi, body } => {
                let hi = hi.as_ref().ok_or(ExprError::InfiniteSum)?;
                let (lo, hi) = (lo.eval_index(env, "sum bound")?, hi.eval_index(env, "sum bound")?);
                if hi < lo {
                    return Ok(FixedReal::zero(p));
                }
                let n = (hi - lo + 1) as u64;
                let q = p + 1 + (64 - (n - 1).leading_zeros());
                let mut env = env.clone();
                let mut acc = FixedReal::zero(q);
                for k in lo..=hi {
                    env.insert(var.clone(), k);
                    acc = acc.add_exact(&body.eval_numeric(&env, q)?);
                }
                Ok(acc)
            }
            Expr::Sqrt(c) => Err(ExprError::Unsupported(format!("sqrt of inexact value {c}"))),
            Expr::Num(_) | Expr::Var(_) | Expr::Phi | Expr::Fib(_) | Expr::Lucas(_) => {
                unreachable!("always exact or an error")
            }
        }
    }

    /// Some `m` with `|value| < 2^m`.
    pub fn magnitude_exp(&self, env: &Env) -> Result<i64, ExprError> {
        match self {
            Expr::Atan(_) => return Ok(1),
            Expr::Pi => return Ok(2),
            _ => {}
        }
        let v = self.eval_numeric(env, 8)?;
        let bound = v.abs().add_exact(&FixedReal::from_raw(BigInt::one(), 8));
        Ok(bound.magnitude_bits())
    }

    /// Some `e` with `value >= 2^e > 0`; errors if the value is not positive
    /// enough to be separated from zero below `2^-4096`.
    fn lower_bound_exp(&self, env: &Env) -> Result<i64, ExprError> {
        let mut q = 32u32;
        loop {
            let v = self.eval_numeric(env, q)?;
            let low = v.sub_exact(&FixedReal::from_raw(BigInt::one(), q));
            if low.sign() > 0 {
                return Ok(low.magnitude_bits() - 1);
            }
            if v.sign() < 0 && !v.abs_le_pow2(-(q as i64) + 1) {
                return Err(ExprError::Domain(format!("{self} is negative")));
            }
            if q >= 4096 {
                return Err(ExprError::Domain(format!("{self} is not separated from zero")));
            }
            q *= 2;
        }
    }

    /// Decomposes into `Σ c_i · atan(x_i)` with exact `c_i` and `x_i`.
    pub fn atan_terms(&self, env: &Env) -> Result<Vec<(RealScalar, RealScalar)>, ExprError> {
        let not_linear = || ExprError::Unsupported(format!("{self} is not a combination of arctangents"));
        let scale = |terms: Vec<(RealScalar, RealScalar)>, c: &RealScalar| {
            terms
                .into_iter()
                .map(|(k, x)| Ok((k.mul(c).map_err(|_| not_linear())?, x)))
                .collect::<Result<Vec<_>, ExprError>>()
        };
        match self {
            Expr::Atan(c) => Ok(vec![(RealScalar::one(), c.eval_exact(env)?)]),
            Expr::Neg(c) => scale(c.atan_terms(env)?, &RealScalar::from_int(-1)),
            Expr::Add(a, b) => {
                let mut t = a.atan_terms(env)?;
                t.extend(b.atan_terms(env)?);
                Ok(t)
            }
            Expr::Sub(a, b) => {
                let mut t = a.atan_terms(env)?;
                t.extend(scale(b.atan_terms(env)?, &RealScalar::from_int(-1))?);
                Ok(t)
            }
            Expr::Mul(a, b) => {
                if let Some(c) = a.exact_or_pass(env)? {
                    scale(b.atan_terms(env)?, &c)
                } else if let Some(c) = b.exact_or_pass(env)? {
                    scale(a.atan_terms(env)?, &c)
                } else {
                    Err(not_linear())
                }
            }
            Expr::Div(a, b) => {
                let c = b.exact_or_pass(env)?.ok_or_else(not_linear)?;
                if c.is_zero() {
                    return Err(ExprError::DivisionByZero);
                }
                scale(a.atan_terms(env)?, &c.inv()?)
            }
            Expr::Sum { var, lo, hi: Some(hi), body } => {
                let (lo, hi) = (lo.eval_index(env, "sum bound")?, hi.eval_index(env, "sum bound")?);
                let mut env = env.clone();
                let mut t = Vec::new();
                for k in lo..=hi {
                    env.insert(var.clone(), k);
                    t.extend(body.atan_terms(&env)?);
                }
                Ok(t)
            }
            _ => Err(not_linear()),
        }
    }

    /// Symbolic linear decomposition with rational coefficients; subtrees that
    /// are not rational constants or linear combinations become atoms.
    pub fn linear_form(&self) -> LinearForm {
        let mut out = LinearForm::new();
        self.linear_into(&BigRational::one(), &mut out);
        out.retain(|_, v| !v.is_zero());
        out
    }

    fn as_rational_constant(&self) -> Option<BigRational> {
        self.eval_exact(&Env::new()).ok()?.as_rational()
    }

    fn linear_into(&self, c: &BigRational, out: &mut LinearForm) {
        if let Some(q) = self.as_rational_constant() {
            *out.entry("1".into()).or_insert_with(BigRational::zero) += c * q;
            return;
        }
        match self {
            Expr::Neg(a) => a.linear_into(&-c, out),
            Expr::Add(a, b) => {
                a.linear_into(c, out);
                b.linear_into(c, out);
            }
            Expr::Sub(a, b) => {
                a.linear_into(c, out);
                b.linear_into(&-c, out);
            }
            Expr::Mul(a, b) => match (a.as_rational_constant(), b.as_rational_constant()) {
                (Some(q), _) => b.linear_into(&(c * q), out),
                (_, Some(q)) => a.linear_into(&(c * q), out),
                _ => self.atom_into(c, out),
            },
            Expr::Div(a, b) => match b.as_rational_constant() {
                Some(q) if !q.is_zero() => a.linear_into(&(c / q), out),
                _ => self.atom_into(c, out),
            },
            _ => self.atom_into(c, out),
        }
    }

    fn atom_into(&self, c: &BigRational, out: &mut LinearForm) {
        *out.entry(self.to_string()).or_insert_with(BigRational::zero) += c;
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if v.is_negative() => 0,
            _ => 5,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.fmt_at(f, 0)?;
            return write!(f, ")");
        }
        let bin = |f: &mut fmt::Formatter<'_>, a: &Expr, op: &str, b: &Expr, la: u8, lb: u8| {
            a.fmt_at(f, la)?;
            write!(f, "{op}")?;
            b.fmt_at(f, lb)
        };
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Phi => write!(f, "phi"),
            Expr::Sqrt(c) => write!(f, "sqrt({c})"),
            Expr::Atan(c) => write!(f, "atan({c})"),
            Expr::Log(c) => write!(f, "log({c})"),
            Expr::Fib(c) => write!(f, "F({c})"),
            Expr::Lucas(c) => write!(f, "L({c})"),
            Expr::Neg(c) => {
                write!(f, "-")?;
                c.fmt_at(f, 3)
            }
            Expr::Add(a, b) => bin(f, a, " + ", b, 1, 2),
            Expr::Sub(a, b) => bin(f, a, " - ", b, 1, 2),
            Expr::Mul(a, b) => bin(f, a, "*", b, 2, 3),
            Expr::Div(a, b) => bin(f, a, "/", b, 2, 3),
            Expr::Pow(a, b) => bin(f, a, "^", b, 5, 3),
            Expr::Sum { var, lo, hi, body } => {
                write!(f, "sum({var}, {lo}, ")?;
                match hi {
                    Some(h) => write!(f, "{h}")?,
                    None => write!(f, "inf")?,
                }
                write!(f, ", {body})")
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

impl std::str::FromStr for Expr {
    type Err = ExprError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(v) => Ok(Expr::int(v)),
            Raw::Text(s) => Expr::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ExprError> {
    let mut out = Vec::new();
    let mut it = src.char_indices().peekable();
    while let Some(&(i, ch)) = it.peek() {
        if ch.is_whitespace() {
            it.next();
        } else if ch.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&(_, c)) = it.peek() {
                if !c.is_ascii_digit() {
                    break;
                }
                s.push(c);
                it.next();
            }
            out.push((i, Tok::Num(s.parse().expect("digits"))));
        } else if ch.is_ascii_alphabetic() || ch == '_' {
            let mut s = String::new();
            while let Some(&(_, c)) = it.peek() {
                if !(c.is_ascii_alphanumeric() || c == '_') {
                    break;
                }
                s.push(c);
                it.next();
            }
            out.push((i, Tok::Ident(s)));
        } else {
            it.next();
            let t = match ch {
                'φ' => Tok::Ident("phi".into()),
                'π' => Tok::Ident("pi".into()),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                '·' | '×' => Tok::Op('*'),
                '−' => Tok::Op('-'),
                '+' | '-' | '*' | '/' | '^' => Tok::Op(ch),
                _ => return Err(ExprError::Parse { pos: i, msg: format!("unexpected character `{ch}`") }),
            };
            out.push((i, t));
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn error(&self, msg: &str) -> ExprError {
        let pos = self.tokens.get(self.pos).map_or(self.len, |(p, _)| *p);
        ExprError::Parse { pos, msg: msg.into() }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), ExprError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(&Tok::Op('+')) {
                lhs = Expr::add(lhs, self.term()?);
            } else if self.eat(&Tok::Op('-')) {
                lhs = Expr::sub(lhs, self.term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(&Tok::Op('*')) {
                lhs = Expr::mul(lhs, self.unary()?);
            } else if self.eat(&Tok::Op('/')) {
                lhs = Expr::div(lhs, self.unary()?);
            } else if matches!(self.peek(), Some(Tok::Num(_) | Tok::Ident(_) | Tok::LParen)) {
                lhs = Expr::mul(lhs, self.power()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(&Tok::Op('-')) {
            Ok(Expr::neg(self.unary()?))
        } else if self.eat(&Tok::Op('+')) {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.eat(&Tok::Op('^')) {
            Ok(Expr::Pow(bx(base), bx(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn call1(&mut self) -> Result<Box<Expr>, ExprError> {
        self.expect(&Tok::LParen, "`(`")?;
        let e = self.expr()?;
        self.expect(&Tok::RParen, "`)`")?;
        Ok(bx(e))
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let Some((_, tok)) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error("unexpected end of input"));
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "pi" => Ok(Expr::Pi),
                "phi" => Ok(Expr::Phi),
                "atan" | "arctan" => Ok(Expr::Atan(self.call1()?)),
                "log" | "ln" => Ok(Expr::Log(self.call1()?)),
                "sqrt" => Ok(Expr::Sqrt(self.call1()?)),
                "F" | "fib" => Ok(Expr::Fib(self.call1()?)),
                "L" | "lucas" => Ok(Expr::Lucas(self.call1()?)),
                "sum" => self.sum(),
                "inf" => Err(self.error("`inf` is only allowed as a sum bound")),
                _ => Ok(Expr::Var(name)),
            },
            _ => {
                self.pos -= 1;
                Err(self.error("expected a value"))
            }
        }
    }

    fn sum(&mut self) -> Result<Expr, ExprError> {
        self.expect(&Tok::LParen, "`(`")?;
        let var = match self.tokens.get(self.pos) {
            Some((_, Tok::Ident(v))) => v.clone(),
            _ => return Err(self.error("expected summation variable")),
        };
        self.pos += 1;
        self.expect(&Tok::Comma, "`,`")?;
        let lo = self.expr()?;
        self.expect(&Tok::Comma, "`,`")?;
        let hi = if self.peek() == Some(&Tok::Ident("inf".into())) {
            self.pos += 1;
            None
        } else {
            Some(bx(self.expr()?))
        };
        self.expect(&Tok::Comma, "`,`")?;
        let body = self.expr()?;
        self.expect(&Tok::RParen, "`)`")?;
        Ok(Expr::Sum { var, lo: bx(lo), hi, body: bx(body) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::golden::phi_pow;
    use proptest::prelude::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn env(pairs: &[(&str, i64)]) -> Env {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn parses_implicit_products_and_powers() {
        assert_eq!(p("2k"), Expr::mul(Expr::int(2), Expr::Var("k".into())));
        assert_eq!(p("16phi^8"), Expr::mul(Expr::int(16), Expr::Pow(bx(Expr::Phi), bx(Expr::int(8)))));
        assert_eq!(p("phi^-2"), Expr::Pow(bx(Expr::Phi), bx(Expr::neg(Expr::int(2)))));
        assert_eq!(p("2^3^2").eval_exact(&Env::new()).unwrap(), RealScalar::from_int(512));
        assert_eq!(p("-2^2").eval_exact(&Env::new()).unwrap(), RealScalar::from_int(-4));
        assert!(Expr::parse("atan(").is_err());
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("inf").is_err());
        assert!(Expr::parse("2 $ 3").is_err());
    }

    #[test]
    fn exact_values() {
        let e = env(&[("k", 5)]);
        let v = p("2/L(2k-1)").eval_exact(&e).unwrap();
        assert_eq!(v.as_rational().unwrap(), BigRational::new(2.into(), 76.into()));
        assert_eq!(p("1/phi^3").eval_exact(&e).unwrap(), RealScalar::golden(phi_pow(-3)));
        assert_eq!(p("sqrt(5)").eval_exact(&e).unwrap(), RealScalar::golden(QPhi::sqrt5()));
        let s = p("sqrt(3/5)").eval_exact(&e).unwrap();
        assert!((s.embed(60).to_f64() - (0.6f64).sqrt()).abs() < 1e-15);
        assert_eq!(p("1/F(0)").eval_exact(&e), Err(ExprError::DivisionByZero));
        assert!(matches!(p("atan(1)").eval_exact(&e), Err(ExprError::NotExact(_))));
        assert_eq!(p("n").eval_exact(&e), Err(ExprError::UnboundVariable("n".into())));
        assert_eq!(p("sum(j, 1, 4, j^2)").eval_exact(&e).unwrap(), RealScalar::from_int(30));
        assert_eq!(p("sum(j, 1, 0, j)").eval_exact(&e).unwrap(), RealScalar::zero());
    }

    #[test]
    fn numeric_values_meet_precision() {
        let e = Env::new();
        let four_atan = p("4atan(1)").eval_numeric(&e, 100).unwrap();
        assert!(four_atan.sub_exact(&fixed::pi(120)).abs_le_pow2(-99));
        let mixed = p("sqrt(2) + sqrt(3)").eval_numeric(&e, 60).unwrap();
        assert!((mixed.to_f64() - (2f64.sqrt() + 3f64.sqrt())).abs() < 1e-15);
        let lg = p("log(phi)").eval_numeric(&e, 128).unwrap();
        assert!(lg.to_decimal_string(22).starts_with("0.4812118250596034474977"));
        let q = p("atan(1)/pi").eval_numeric(&e, 80).unwrap();
        assert!(q.sub_exact(&FixedReal::from_raw(BigInt::one(), 2)).abs_le_pow2(-79));
        let s = p("sum(k, 1, 3, atan(1/L(2k)))").eval_numeric(&e, 80).unwrap();
        let expect = (1f64 / 3.0).atan() + (1f64 / 7.0).atan() + (1f64 / 18.0).atan();
        assert!((s.to_f64() - expect).abs() < 1e-15);
        assert_eq!(p("sum(k,1,inf,k)").eval_numeric(&e, 8), Err(ExprError::InfiniteSum));
        assert!(matches!(p("log(1 - 1)").eval_numeric(&e, 8), Err(ExprError::Domain(_))));
        assert!((p("pi^2").eval_numeric(&e, 64).unwrap().to_f64() - 9.869604401089358).abs() < 1e-14);
    }

    #[test]
    fn atan_decomposition() {
        let terms = p("2atan(1) - 1/2*atan(2/L(2k-1))").atan_terms(&env(&[("k", 2)])).unwrap();
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[0], (RealScalar::from_int(2), RealScalar::one()));
        assert_eq!(terms[1].1.as_rational().unwrap(), BigRational::new(1.into(), 2.into()));
        assert!(p("atan(1)^2").atan_terms(&Env::new()).is_err());
    }

    #[test]
    fn linear_forms_combine() {
        let a = p("atan(2/L(2n-1)) - atan(1/F(2n)) - atan(1/L(2n))").linear_form();
        let b = p("atan(2/L(2n+1)) - (atan(1/F(2n)) - atan(1/L(2n)))").linear_form();
        let c = p("atan(2/L(2n-1)) - (2*atan(1/L(2n)) + atan(2/L(2n+1)))").linear_form();
        let mut diff = a.clone();
        for (k, v) in b {
            *diff.entry(k).or_insert_with(BigRational::zero) -= v;
        }
        diff.retain(|_, v| !v.is_zero());
        assert_eq!(diff, c);
    }

    #[test]
    fn truncation_of_infinite_sums() {
        let e = p("atan(1/F(2n)) - sum(k, n, inf, atan(1/F(2k+1)))");
        let (t, m) = e.truncate_infinite(&env(&[("n", 3)]), 10).unwrap().unwrap();
        assert_eq!(m, 12);
        assert!(!t.contains_infinite_sum());
        assert!(e.contains_infinite_sum());
    }

    #[test]
    fn scalar_round_trip() {
        let x = RealScalar::golden(phi_pow(-5)).mul(&RealScalar::sqrt(3).unwrap()).unwrap();
        let x = x.div(&RealScalar::from_int(7)).unwrap();
        assert_eq!(Expr::from_scalar(&x).eval_exact(&Env::new()).unwrap(), x);
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf =
            prop_oneof![(0u32..50).prop_map(Expr::int), Just(Expr::Phi), Just(Expr::Pi), Just(Expr::Var("k".into())),];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|e| Expr::Atan(bx(e))),
                inner.clone().prop_map(Expr::neg),
                inner.clone().prop_map(|e| Expr::Fib(bx(e))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::div(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Pow(bx(a), bx(b))),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Sum {
                    var: "j".into(),
                    lo: bx(a),
                    hi: None,
                    body: bx(b)
                }),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_round_trips_through_parser(e in arb_expr()) {
            let text = e.to_string();
            prop_assert_eq!(Expr::parse(&text).unwrap(), e);
        }

        #[test]
        fn numeric_agrees_with_exact(a in -40i64..40, b in -40i64..40, d in 1i64..30, n in -6i64..6) {
            let e = p(&format!("({a} + {b}*phi)/{d} * phi^({n})"));
            let x = e.eval_exact(&Env::new()).unwrap().embed(90);
            let via_terms = p(&format!("({a} + {b}*phi)/{d}")).eval_numeric(&Env::new(), 90).unwrap()
                .mul(&RealScalar::golden(phi_pow(n)).embed(120), 120);
            prop_assert!(x.sub_exact(&via_terms).abs_le_pow2(-80));
        }
    }
}

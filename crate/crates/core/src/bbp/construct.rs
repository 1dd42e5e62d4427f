//! Mechanical construction of formulas from arctangent identities.
//!
//! Each `atan(x)` is replaced by a general series (`x = 1` uses the
//! `1/(2u - 1)` form at `u = 1`, everything else the `1/u` form at `u = 1/x`),
//! all series are rebased to the largest base and lengthened to a common
//! length, and the results are combined.

use num_integer::Integer;

use super::{general_arctan_formula, linear_combine, ArctanKind, BbpError, BbpFormula};
use crate::expr::{Env, Expr};
use crate::scalar::RealScalar;

/// Series for `atan(x)`.
pub fn arctan_series(x: &RealScalar) -> Result<BbpFormula, BbpError> {
    if *x == RealScalar::one() {
        general_arctan_formula(ArctanKind::Recip2uMinus1, &RealScalar::one())
    } else {
        general_arctan_formula(ArctanKind::RecipU, &x.inv()?)
    }
}

/// Smallest `r >= 1` with `base^r = target`.
fn power_relation(base: &RealScalar, target: &RealScalar) -> Result<u32, BbpError> {
    let goal = target.abs();
    let mut acc = base.clone();
    for r in 1..=64u32 {
        if acc == *target {
            return Ok(r);
        }
        if acc.abs().sub(&goal).map_or(true, |d| d.signum() > 0) {
            break;
        }
        acc = acc.mul(base)?;
    }
    Err(BbpError::NoPowerRelation(target.to_string(), base.to_string()))
}

/// Formula for `Σ c_i atan(x_i)`; equal arguments are merged first.
pub fn from_arctan_terms(name: &str, terms: &[(RealScalar, RealScalar)], lhs: Expr) -> Result<BbpFormula, BbpError> {
    let mut merged: Vec<(RealScalar, RealScalar)> = Vec::new();
    for (c, x) in terms {
        match merged.iter_mut().find(|(_, y)| y == x) {
            Some((acc, _)) => *acc = acc.add(c)?,
            None => merged.push((c.clone(), x.clone())),
        }
    }
    merged.retain(|(c, _)| !c.is_zero());
    let series =
        merged.iter().map(|(c, x)| Ok((c.clone(), arctan_series(x)?))).collect::<Result<Vec<_>, BbpError>>()?;
    let target = series
        .iter()
        .map(|(_, f)| f.base().clone())
        .max_by(|a, b| a.abs().embed(64).cmp(&b.abs().embed(64)))
        .ok_or(BbpError::NothingToCombine)?;
    let rebased = series
        .into_iter()
        .map(|(c, f)| Ok((c, f.rebase(power_relation(f.base(), &target)?)?)))
        .collect::<Result<Vec<_>, BbpError>>()?;
    let common = rebased.iter().fold(1usize, |acc, (_, f)| acc.lcm(&f.len()));
    let aligned = rebased
        .into_iter()
        .map(|(c, f)| Ok((c, f.lengthen((common / f.len()) as u32)?)))
        .collect::<Result<Vec<_>, BbpError>>()?;
    Ok(linear_combine(&aligned)?.with_name(name).with_lhs(lhs))
}

/// Formula for `scale · lhs` built from an identity `lhs = rhs` whose right side
/// is a combination of arctangents.
pub fn from_identity(
    name: &str,
    lhs: &Expr,
    rhs: &Expr,
    env: &Env,
    scale: &RealScalar,
) -> Result<BbpFormula, BbpError> {
    let terms =
        rhs.atan_terms(env)?.into_iter().map(|(c, x)| Ok((c.mul(scale)?, x))).collect::<Result<Vec<_>, BbpError>>()?;
    let target =
        if *scale == RealScalar::one() { lhs.clone() } else { Expr::mul(Expr::from_scalar(scale), lhs.clone()) };
    from_arctan_terms(name, &terms, target)
}

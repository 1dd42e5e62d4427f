//! Verification of catalog identities.
//!
//! Three independent checks: numeric residual of `lhs - rhs`, exact
//! argument algebra of proof steps in `Q(φ)`, and truncated infinite sums
//! against their analytic tail bound. [`verify_all`] sweeps every record over
//! its parameter domain in parallel.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{Catalog, IdentityKind, IdentityRecord, Source};
use crate::expr::{Env, ExprError};
use crate::fixed::{self, FixedReal};
use crate::golden::{arctan_arg_combine, CombineMode, QPhi};

/// Extra bits carried when evaluating both sides.
pub const GUARD: u32 = 16;
/// Precision of the branch check on proof steps.
pub const BRANCH_CHECK_BITS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("unknown identity `{0}`")]
    UnknownId(String),
    #[error("`{id}`: {name} = {value} is outside the domain ({domain})")]
    OutsideDomain { id: String, name: String, value: i64, domain: String },
    #[error("`{id}`: missing value for parameter `{name}`")]
    MissingParam { id: String, name: String },
    #[error("`{id}` has no parameter `{name}`")]
    UnknownParam { id: String, name: String },
    #[error("`{id}`: degenerate expression ({reason})")]
    Degenerate { id: String, reason: String },
    #[error("`{0}` has no argument steps")]
    NoSteps(String),
    #[error("`{0}` is not an infinite sum")]
    NotInfinite(String),
    #[error("`{id}`: {source}")]
    Expr { id: String, source: ExprError },
}

fn expr_err(rec: &IdentityRecord) -> impl Fn(ExprError) -> VerifyError + '_ {
    move |e| match e {
        ExprError::DivisionByZero => VerifyError::Degenerate { id: rec.id.clone(), reason: e.to_string() },
        source => VerifyError::Expr { id: rec.id.clone(), source },
    }
}

/// Checks that `env` binds exactly the record's parameters, all in domain.
pub fn check_domain(rec: &IdentityRecord, env: &Env) -> Result<(), VerifyError> {
    for name in env.keys() {
        if rec.param(name).is_none() {
            return Err(VerifyError::UnknownParam { id: rec.id.clone(), name: name.clone() });
        }
    }
    for d in &rec.params {
        let v =
            *env.get(&d.name).ok_or_else(|| VerifyError::MissingParam { id: rec.id.clone(), name: d.name.clone() })?;
        if !d.contains(v) {
            return Err(VerifyError::OutsideDomain {
                id: rec.id.clone(),
                name: d.name.clone(),
                value: v,
                domain: d.to_string(),
            });
        }
    }
    Ok(())
}

/// `|lhs - rhs|` with an error of at most `2^-(p + GUARD - 1)`, without a domain check.
pub fn residual(rec: &IdentityRecord, env: &Env, p: u32) -> Result<FixedReal, VerifyError> {
    let q = p + GUARD;
    let l = rec.lhs.eval_numeric(env, q).map_err(expr_err(rec))?;
    let r = rec.rhs.eval_numeric(env, q).map_err(expr_err(rec))?;
    Ok(l.sub_exact(&r).abs())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumericCheck {
    pub residual: FixedReal,
    pub pass: bool,
}

/// Passes iff the residual is at most `2^-p`.
pub fn verify_numeric(rec: &IdentityRecord, env: &Env, p: u32) -> Result<NumericCheck, VerifyError> {
    check_domain(rec, env)?;
    let residual = residual(rec, env, p)?;
    let pass = residual.abs_le_pow2(-(p as i64));
    Ok(NumericCheck { residual, pass })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub computed: QPhi,
    pub expected: QPhi,
    /// Component-wise equality in `Q(φ)`.
    pub exact: bool,
    /// The stored multiple of π matches numerically.
    pub branch: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepReport {
    pub steps: Vec<StepOutcome>,
    pub pass: bool,
}

/// Recomputes every proof step's combined argument exactly and checks its branch.
pub fn verify_exact_args(rec: &IdentityRecord, env: &Env) -> Result<StepReport, VerifyError> {
    check_domain(rec, env)?;
    if rec.steps.is_empty() {
        return Err(VerifyError::NoSteps(rec.id.clone()));
    }
    let wrap = expr_err(rec);
    let golden = |e: &crate::expr::Expr| -> Result<QPhi, VerifyError> {
        let v = e.eval_exact(env).map_err(&wrap)?;
        v.as_qphi().cloned().ok_or_else(|| wrap(ExprError::NotExact(format!("{e} is not in Q(phi)"))))
    };
    let mut steps = Vec::with_capacity(rec.steps.len());
    for s in &rec.steps {
        let (x, y, expected) = (golden(&s.x)?, golden(&s.y)?, golden(&s.expected)?);
        let computed = arctan_arg_combine(&x, &y, s.mode)
            .map_err(|e| VerifyError::Degenerate { id: rec.id.clone(), reason: e.to_string() })?;
        let branch = s
            .branch
            .eval_exact(env)
            .map_err(&wrap)?
            .as_rational()
            .ok_or_else(|| wrap(ExprError::NotExact("branch multiple must be rational".into())))?;
        let q = BRANCH_CHECK_BITS + 8;
        let at = |v: &QPhi| fixed::arctan(&v.embed(q + 2), q);
        let combined = match s.mode {
            CombineMode::Sum => at(&x).add(&at(&y), q),
            CombineMode::Diff => at(&x).sub(&at(&y), q),
        };
        let pi_part = fixed::pi(q).mul_int(branch.numer()).div_int(branch.denom()).expect("nonzero denominator");
        let gap = combined.sub(&at(&expected), q).sub(&pi_part, q);
        steps.push(StepOutcome {
            exact: computed == expected,
            computed,
            expected,
            branch: gap.abs_le_pow2(-(BRANCH_CHECK_BITS as i64 - 4)),
        });
    }
    let pass = steps.iter().all(|s| s.exact && s.branch);
    Ok(StepReport { steps, pass })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfiniteCheck {
    /// `|lhs - partial|`.
    pub residual: FixedReal,
    pub tail: FixedReal,
    /// Last index included in the partial sum.
    pub last_index: i64,
    pub pass: bool,
}

/// Truncates the unbounded sum to `n_terms` terms; passes iff the residual is
/// at most the tail bound plus `2^-p`.
pub fn verify_infinite(rec: &IdentityRecord, env: &Env, n_terms: u64, p: u32) -> Result<InfiniteCheck, VerifyError> {
    check_domain(rec, env)?;
    let (residual, tail, last_index) = partial_residual(rec, env, n_terms, p)?;
    let excess = residual.sub(&tail, p + GUARD);
    let pass = excess.sign() <= 0 || excess.abs_le_pow2(-(p as i64));
    Ok(InfiniteCheck { residual, tail, last_index, pass })
}

fn partial_residual(
    rec: &IdentityRecord,
    env: &Env,
    n_terms: u64,
    p: u32,
) -> Result<(FixedReal, FixedReal, i64), VerifyError> {
    let (Some(tail_expr), IdentityKind::InfiniteSum) = (&rec.tail, rec.kind) else {
        return Err(VerifyError::NotInfinite(rec.id.clone()));
    };
    let wrap = expr_err(rec);
    let cut = |e: &crate::expr::Expr| e.truncate_infinite(env, n_terms.max(1)).map_err(&wrap);
    let (lhs, rhs) = (cut(&rec.lhs)?, cut(&rec.rhs)?);
    let last =
        lhs.as_ref().or(rhs.as_ref()).map(|(_, m)| *m).ok_or_else(|| VerifyError::NotInfinite(rec.id.clone()))?;
    let lhs = lhs.map_or_else(|| rec.lhs.clone(), |(e, _)| e);
    let rhs = rhs.map_or_else(|| rec.rhs.clone(), |(e, _)| e);
    let q = p + GUARD;
    let residual = lhs.eval_numeric(env, q).map_err(&wrap)?.sub(&rhs.eval_numeric(env, q).map_err(&wrap)?, q).abs();
    let mut tail_env = env.clone();
    tail_env.insert("M".into(), last);
    let tail = tail_expr.eval_numeric(&tail_env, q).map_err(&wrap)?;
    Ok((residual, tail, last))
}

/// Geometric mean of successive residual ratios for partial sums of
/// `lo..=hi` terms.
pub fn decay_ratio(rec: &IdentityRecord, env: &Env, lo: u64, hi: u64, p: u32) -> Result<f64, VerifyError> {
    check_domain(rec, env)?;
    assert!(hi > lo, "need at least two truncation points");
    let r_lo = partial_residual(rec, env, lo, p)?.0.to_f64();
    let r_hi = partial_residual(rec, env, hi, p)?.0.to_f64();
    Ok(((r_hi.log2() - r_lo.log2()) / (hi - lo) as f64).exp2())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepConfig {
    /// Largest `|param|` visited.
    pub bound: i64,
    pub precision: u32,
    /// Terms kept from each infinite sum.
    pub n_terms: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { bound: 50, precision: 128, n_terms: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Numeric,
    Exact,
    Infinite,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Numeric => "numeric",
            Mode::Exact => "exact",
            Mode::Infinite => "infinite",
        })
    }
}

/// One verification result; failures and errors are rows, never panics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Row {
    pub id: String,
    pub params: Env,
    pub mode: Mode,
    /// Hexadecimal residual; absent for exact checks.
    pub residual: Option<String>,
    /// Tail bound for infinite sums.
    pub tail: Option<String>,
    pub pass: bool,
    pub source: Source,
    pub note: Option<String>,
    #[serde(skip)]
    pub residual_value: Option<FixedReal>,
}

impl Row {
    fn new(rec: &IdentityRecord, env: &Env, mode: Mode) -> Row {
        Row {
            id: rec.id.clone(),
            params: env.clone(),
            mode,
            residual: None,
            tail: None,
            pass: false,
            source: rec.source,
            note: None,
            residual_value: None,
        }
    }

    pub fn params_text(&self) -> String {
        if self.params.is_empty() {
            "-".into()
        } else {
            self.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
        }
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<26} {:<8} {:<8} {:<4} {}",
            self.id,
            self.params_text(),
            self.mode.to_string(),
            if self.pass { "PASS" } else { "FAIL" },
            self.residual.as_deref().unwrap_or("exact"),
        )?;
        if let Some(t) = &self.tail {
            write!(f, " tail<={t}")?;
        }
        if self.source == Source::ExternalCited {
            write!(f, " [external-cited]")?;
        }
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

/// Runs one check; errors become failing rows.
pub fn check(rec: &IdentityRecord, env: &Env, mode: Mode, cfg: &SweepConfig) -> Row {
    let mut row = Row::new(rec, env, mode);
    let p = cfg.precision;
    let outcome = match mode {
        Mode::Numeric => verify_numeric(rec, env, p).map(|c| {
            row.residual = Some(c.residual.to_hex_string());
            row.residual_value = Some(c.residual);
            c.pass
        }),
        Mode::Exact => verify_exact_args(rec, env).map(|r| {
            let bad: Vec<String> = r
                .steps
                .iter()
                .enumerate()
                .filter(|(_, s)| !(s.exact && s.branch))
                .map(|(i, s)| format!("step {i}: got {} want {}", s.computed, s.expected))
                .collect();
            if !bad.is_empty() {
                row.note = Some(bad.join("; "));
            }
            r.pass
        }),
        Mode::Infinite => verify_infinite(rec, env, cfg.n_terms, p).map(|c| {
            row.residual = Some(c.residual.to_hex_string());
            row.tail = Some(c.tail.to_hex_string());
            row.residual_value = Some(c.residual);
            c.pass
        }),
    };
    match outcome {
        Ok(pass) => row.pass = pass,
        Err(e) => row.note = Some(e.to_string()),
    }
    row
}

/// Every (assignment, mode) pair the sweep visits for a record.
pub fn plan(rec: &IdentityRecord, bound: i64) -> Vec<(Env, Mode)> {
    let mut out = Vec::new();
    for env in rec.assignments(bound) {
        if rec.kind == IdentityKind::InfiniteSum {
            out.push((env, Mode::Infinite));
            continue;
        }
        if !rec.steps.is_empty() {
            out.push((env.clone(), Mode::Exact));
        }
        out.push((env, Mode::Numeric));
    }
    out
}

pub fn verify_record(rec: &IdentityRecord, cfg: &SweepConfig) -> Report {
    let rows = plan(rec, cfg.bound).par_iter().map(|(env, mode)| check(rec, env, *mode, cfg)).collect();
    Report { rows }
}

pub fn verify_all(cat: &Catalog, cfg: &SweepConfig) -> Report {
    let tasks: Vec<(&IdentityRecord, Env, Mode)> = cat
        .identities
        .iter()
        .flat_map(|rec| plan(rec, cfg.bound).into_iter().map(move |(env, mode)| (rec, env, mode)))
        .collect();
    let rows = tasks.par_iter().map(|(rec, env, mode)| check(rec, env, *mode, cfg)).collect();
    Report { rows }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordSummary {
    pub id: String,
    pub source: Source,
    pub checks: usize,
    pub failures: usize,
    pub max_residual: Option<String>,
    pub pass: bool,
}

impl fmt::Display for RecordSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<26} {:<4} checks={:<4} failures={:<3} max_residual={}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.checks,
            self.failures,
            self.max_residual.as_deref().unwrap_or("-"),
        )?;
        if self.source == Source::ExternalCited {
            write!(f, " [external-cited]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Report {
    pub rows: Vec<Row>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(|r| !r.pass)
    }

    /// Per-record totals in first-appearance order.
    pub fn summaries(&self) -> Vec<RecordSummary> {
        let mut out: Vec<(RecordSummary, Option<FixedReal>)> = Vec::new();
        for row in &self.rows {
            let idx = match out.iter().position(|(s, _)| s.id == row.id) {
                Some(i) => i,
                None => {
                    out.push((
                        RecordSummary {
                            id: row.id.clone(),
                            source: row.source,
                            checks: 0,
                            failures: 0,
                            max_residual: None,
                            pass: true,
                        },
                        None,
                    ));
                    out.len() - 1
                }
            };
            let (s, max) = &mut out[idx];
            s.checks += 1;
            if !row.pass {
                s.failures += 1;
                s.pass = false;
            }
            if let Some(v) = &row.residual_value {
                if max.as_ref().is_none_or(|m| v > m) {
                    *max = Some(v.clone());
                }
            }
        }
        out.into_iter()
            .map(|(mut s, max)| {
                s.max_residual = max.map(|m| m.to_hex_string());
                s
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str) -> &'static IdentityRecord {
        Catalog::builtin().identity(id).unwrap()
    }

    fn env(pairs: &[(&str, i64)]) -> Env {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn closed_identity_residual() {
        let c = verify_numeric(rec("nhfkxe6"), &Env::new(), 128).unwrap();
        assert!(c.pass);
        let c = verify_numeric(rec("svdrzxs"), &env(&[("k", 1)]), 128).unwrap();
        assert!(c.pass);
        let c = verify_numeric(rec("x2ffu2e"), &env(&[("n", 3)]), 192).unwrap();
        assert!(c.pass && c.residual.abs_le_pow2(-192));
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(
            verify_numeric(rec("qmp0021"), &env(&[("k", 0)]), 64),
            Err(VerifyError::OutsideDomain { .. })
        ));
        assert!(matches!(verify_numeric(rec("svdrzxs"), &Env::new(), 64), Err(VerifyError::MissingParam { .. })));
        assert!(matches!(verify_numeric(rec("nhfkxe6"), &env(&[("k", 1)]), 64), Err(VerifyError::UnknownParam { .. })));
        // the excluded point really is degenerate
        assert!(matches!(residual(rec("x2ffu2e"), &env(&[("n", 1)]), 64), Err(VerifyError::Degenerate { .. })));
    }

    #[test]
    fn negative_index_counterexample_outside_declared_domain() {
        // the reciprocal Fibonacci/Lucas forms of atan(phi^(2k±1)) are off by pi/2 for k < 0
        for id in ["fsdxekk", "w7urgvy"] {
            let r = residual(rec(id), &env(&[("k", -1)]), 64).unwrap();
            assert!(!r.abs_le_pow2(-4), "{id}");
        }
    }

    #[test]
    fn exact_steps() {
        let r = verify_exact_args(rec("svdrzxs"), &env(&[("k", 5)])).unwrap();
        assert!(r.pass);
        assert_eq!(r.steps[0].computed, QPhi::from_rational(&num_rational::BigRational::new(2.into(), 76.into())));
        let r = verify_exact_args(rec("fgingzp"), &env(&[("k", 2)])).unwrap();
        assert_eq!(r.steps[0].computed, QPhi::from_rational(&num_rational::BigRational::new(1.into(), 7.into())));
        assert!(verify_exact_args(rec("q77es1t"), &env(&[("p", 4)])).unwrap().pass);
        let r = verify_exact_args(rec("ehmv8kg"), &env(&[("k", 3)])).unwrap();
        assert!(r.pass && r.steps.iter().all(|s| s.branch));
    }

    #[test]
    fn wrong_branch_is_detected() {
        let mut bad = rec("ehmv8kg").clone();
        bad.steps[1].branch = crate::expr::Expr::int(0);
        let r = verify_exact_args(&bad, &env(&[("k", 3)])).unwrap();
        assert!(r.steps[1].exact && !r.steps[1].branch && !r.pass);
    }

    #[test]
    fn wrong_expected_value_is_detected() {
        let mut bad = rec("fgingzp").clone();
        bad.steps[0].expected = crate::expr::Expr::parse("1/F(2k)").unwrap();
        assert!(!verify_exact_args(&bad, &env(&[("k", 2)])).unwrap().pass);
    }

    #[test]
    fn infinite_sums() {
        let c = verify_infinite(rec("golzqcc"), &Env::new(), 60, 64).unwrap();
        assert!(c.pass && c.last_index == 60);
        assert!(verify_infinite(rec("q0o0cvy"), &Env::new(), 60, 64).unwrap().pass);
        assert!(verify_infinite(rec("cq625h1"), &env(&[("n", 3)]), 20, 64).unwrap().pass);
        let ratio = decay_ratio(rec("golzqcc"), &Env::new(), 10, 40, 128).unwrap();
        assert!((ratio - 0.381_966).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn one_term_remainder_is_the_telescoped_tail() {
        let c = verify_infinite(rec("atan-inv-phi2-series"), &Env::new(), 1, 64).unwrap();
        let q = 80;
        let expect = fixed::arctan(&crate::golden::phi_pow(-4).embed(q), q);
        assert!(c.residual.sub(&expect, q).abs_le_pow2(-60));
    }

    #[test]
    fn sweep_rows_and_summaries() {
        let cfg = SweepConfig { bound: 3, precision: 64, n_terms: 16 };
        let report = verify_record(rec("myyri84"), &cfg);
        assert_eq!(report.rows.len(), 12);
        assert!(report.all_pass());
        let s = report.summaries();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].checks, 12);
        assert!(s[0].max_residual.is_some());
        assert!(report.rows[0].to_string().contains("PASS"));
    }
}

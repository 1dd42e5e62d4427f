//! Command handlers. Each writes its report to the given sink and returns the
//! exit status class; usage-level problems are returned as errors.

use std::fmt::Display;
use std::io::Write;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use phibbp::bbp::digits::{bbp_digits, render_digits};
use phibbp::bbp::{BbpError, BbpFormula};
use phibbp::catalog::verify::{check, check_domain, verify_all, verify_record, Mode, Report, SweepConfig, VerifyError};
use phibbp::catalog::{Catalog, IdentityKind, IdentityRecord};
use phibbp::expr::{Env, Expr};
use phibbp::fixed::decimal_digits;
use phibbp::golden::{fib, lucas};
use phibbp::phinary::{required_precision, to_golden_base, to_golden_base_exact, GoldenDigits};

use crate::args::{OutputMode, VerifyArgs, MAX_FIB_INDEX};

/// How a successful run ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerifyFailed,
    Boundary,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::VerifyFailed => 2,
            Status::Boundary => 3,
        }
    }
}

/// Run settings shared by every command.
#[derive(Debug, Clone, Copy)]
pub struct CliConfig {
    pub precision_bits: u32,
    pub output_mode: OutputMode,
}

pub struct Sink<'a> {
    mode: OutputMode,
    out: &'a mut dyn Write,
}

impl<'a> Sink<'a> {
    pub fn new(mode: OutputMode, out: &'a mut dyn Write) -> Self {
        Sink { mode, out }
    }

    /// Writes `plain` or `structured` depending on the output mode.
    fn emit(&mut self, plain: impl Display, structured: impl FnOnce() -> Value) -> Result<()> {
        match self.mode {
            OutputMode::Plain => writeln!(self.out, "{plain}")?,
            OutputMode::Structured => writeln!(self.out, "{}", structured())?,
        }
        Ok(())
    }

    fn plain(&mut self, line: impl Display) -> Result<()> {
        if self.mode == OutputMode::Plain {
            writeln!(self.out, "{line}")?;
        }
        Ok(())
    }
}

fn formula(cat: &Catalog, name: &str) -> Result<BbpFormula> {
    let rec = cat
        .formula(name)
        .ok_or_else(|| anyhow!("unknown formula `{name}`; known formulas: {}", cat.formula_names().join(", ")))?;
    Ok(rec.to_formula()?)
}

pub fn eval(cat: &Catalog, cfg: &CliConfig, name: &str, sink: &mut Sink) -> Result<Status> {
    let f = formula(cat, name)?;
    let p = cfg.precision_bits;
    let places = decimal_digits(p);
    let value = f.eval(p).to_decimal_string(places);
    sink.emit(
        format!("{name} = {value}\n  |error| <= 2^-{p} before truncation to {places} places"),
        || json!({ "name": name, "precision": p, "value": value, "places": places, "error_bound_log2": -(p as i64) }),
    )?;
    Ok(Status::Ok)
}

pub fn digits(cat: &Catalog, name: &str, pos: u64, count: usize, sink: &mut Sink) -> Result<Status> {
    let f = formula(cat, name)?;
    match bbp_digits(&f, pos, count) {
        Ok(ds) => {
            let base: u64 = f.base().as_integer().and_then(|b| b.try_into().ok()).expect("eligible base");
            let text = render_digits(&ds, base);
            sink.emit(
                format!("{name} base {base}, digits {}..{}: {text}", pos + 1, pos + count as u64),
                || json!({ "name": name, "base": base, "position": pos, "count": count, "digits": ds, "text": text }),
            )?;
            Ok(Status::Ok)
        }
        Err(e @ BbpError::BoundaryRisk { .. }) => {
            eprintln!("error: {e}");
            Ok(Status::Boundary)
        }
        Err(e) => Err(e.into()),
    }
}

fn bindings(args: &VerifyArgs) -> Env {
    let mut env: Env = args.set.iter().cloned().collect();
    if let Some(k) = args.k {
        env.insert("k".into(), k);
    }
    if let Some(n) = args.n {
        env.insert("n".into(), n);
    }
    env
}

fn modes(rec: &IdentityRecord) -> Vec<Mode> {
    match (rec.kind, rec.steps.is_empty()) {
        (IdentityKind::InfiniteSum, _) => vec![Mode::Infinite],
        (_, false) => vec![Mode::Exact, Mode::Numeric],
        (_, true) => vec![Mode::Numeric],
    }
}

pub fn verify(cat: &Catalog, cfg: &CliConfig, args: &VerifyArgs, sink: &mut Sink) -> Result<Status> {
    let sweep = SweepConfig { bound: args.bound, precision: cfg.precision_bits, n_terms: args.terms };
    let env = bindings(args);
    let (report, detailed) = match &args.id {
        None if !args.all => bail!("give an identity id or --all"),
        None => {
            if !env.is_empty() {
                bail!("parameter values need an identity id");
            }
            (verify_all(cat, &sweep), args.rows)
        }
        Some(id) => {
            let rec = cat.identity(id).ok_or_else(|| {
                let ids: Vec<&str> = cat.identities.iter().map(|r| r.id.as_str()).collect();
                anyhow!("unknown identity `{id}`; known identities: {}", ids.join(", "))
            })?;
            if env.is_empty() {
                (verify_record(rec, &sweep), true)
            } else {
                match check_domain(rec, &env) {
                    Ok(()) => {}
                    Err(e @ VerifyError::OutsideDomain { .. }) => {
                        sink.emit(
                            format!("skipped: {e}"),
                            || json!({ "id": id, "params": env, "skipped": e.to_string() }),
                        )?;
                        return Ok(Status::Ok);
                    }
                    Err(e) => return Err(e.into()),
                }
                let rows = modes(rec).into_iter().map(|m| check(rec, &env, m, &sweep)).collect();
                (Report { rows }, true)
            }
        }
    };
    write_report(&report, detailed, sink)?;
    Ok(if report.all_pass() { Status::Ok } else { Status::VerifyFailed })
}

fn write_report(report: &Report, detailed: bool, sink: &mut Sink) -> Result<()> {
    let failures = report.failures().count();
    // structured output always carries every row
    if detailed || sink.mode == OutputMode::Structured {
        for row in &report.rows {
            sink.emit(row, || serde_json::to_value(row).expect("row serialises"))?;
        }
    } else {
        for s in report.summaries() {
            sink.plain(&s)?;
        }
        for row in report.failures() {
            sink.plain(format!("FAIL {row}"))?;
        }
    }
    let verdict = if failures == 0 { "PASS" } else { "FAIL" };
    let records = report.summaries().len();
    sink.emit(
        format!("{} checks over {records} records, {failures} failures: {verdict}", report.rows.len()),
        || json!({ "checks": report.rows.len(), "records": records, "failures": failures, "pass": failures == 0 }),
    )
}

pub fn phinary(
    cat: &Catalog,
    cfg: &CliConfig,
    value: &str,
    n_frac: usize,
    group: Option<usize>,
    sink: &mut Sink,
) -> Result<Status> {
    let p = cfg.precision_bits.max(required_precision(n_frac));
    let digits: GoldenDigits = if let Some(rec) = cat.formula(value) {
        to_golden_base(&rec.to_formula()?.eval(p), n_frac)?
    } else {
        let expr = Expr::parse(value).map_err(|e| {
            anyhow!(
                "`{value}` is neither a formula nor an expression ({e}); known formulas: {}",
                cat.formula_names().join(", ")
            )
        })?;
        let env = Env::new();
        match expr.eval_exact(&env).ok().and_then(|v| v.as_qphi().cloned()) {
            Some(q) => to_golden_base_exact(&q, n_frac)?,
            None => {
                to_golden_base(&expr.eval_numeric(&env, p).with_context(|| format!("evaluating `{value}`"))?, n_frac)?
            }
        }
    };
    let text = digits.render(group);
    sink.emit(&text, || json!({ "input": value, "digits": n_frac, "value": text, "uncertain": digits.uncertain }))?;
    if digits.uncertain {
        eprintln!("error: a digit decision lies within the input resolution at {p} bits");
        return Ok(Status::Boundary);
    }
    Ok(Status::Ok)
}

pub fn fibonacci(n: i64, lucas_numbers: bool, sink: &mut Sink) -> Result<Status> {
    if n.unsigned_abs() > MAX_FIB_INDEX as u64 {
        bail!("index {n} outside the supported range |n| <= {MAX_FIB_INDEX}");
    }
    let (label, value) = if lucas_numbers { ("lucas", lucas(n)) } else { ("fib", fib(n)) };
    let text = value.to_string();
    sink.emit(&text, || json!({ "sequence": label, "n": n, "value": text }))?;
    Ok(Status::Ok)
}

pub fn catalog(cat: &Catalog, sink: &mut Sink) -> Result<Status> {
    sink.plain("identities:")?;
    for rec in &cat.identities {
        let domain: Vec<String> = rec.params.iter().map(|d| d.to_string()).collect();
        let domain = if domain.is_empty() { "-".to_string() } else { domain.join("; ") };
        sink.emit(
            format!(
                "  {:<26} {:<13} {:<15} {:<36} {}",
                rec.id,
                kind_name(rec.kind),
                rec.source.to_string(),
                domain,
                rec.summary
            ),
            || {
                json!({
                    "type": "identity", "id": rec.id, "kind": kind_name(rec.kind), "source": rec.source,
                    "domain": domain, "summary": rec.summary, "lhs": rec.lhs.to_string(), "rhs": rec.rhs.to_string(),
                })
            },
        )?;
    }
    sink.plain("formulas:")?;
    for rec in &cat.formulas {
        let f = rec.to_formula()?;
        let eligible = f.is_digit_eligible();
        sink.emit(
            format!(
                "  {:<30} base {:<12} length {:<3} {:<8} {}",
                rec.name,
                f.base().to_string(),
                f.len(),
                if eligible { "digits" } else { "" },
                rec.lhs
            ),
            || {
                json!({
                    "type": "formula", "name": rec.name, "lhs": rec.lhs.to_string(), "base": f.base().to_string(),
                    "s": f.s(), "length": f.len(), "digit_eligible": eligible,
                })
            },
        )?;
    }
    Ok(Status::Ok)
}

fn kind_name(k: IdentityKind) -> &'static str {
    match k {
        IdentityKind::Closed => "closed",
        IdentityKind::FiniteSum => "finite-sum",
        IdentityKind::InfiniteSum => "infinite-sum",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(mode: OutputMode, f: impl FnOnce(&mut Sink) -> Result<Status>) -> (Result<Status>, String) {
        let mut buf = Vec::new();
        let status = f(&mut Sink::new(mode, &mut buf));
        (status, String::from_utf8(buf).unwrap())
    }

    fn cfg(p: u32) -> CliConfig {
        CliConfig { precision_bits: p, output_mode: OutputMode::Plain }
    }

    fn verify_args(id: &str) -> VerifyArgs {
        VerifyArgs { id: Some(id.into()), all: false, bound: 5, terms: 64, k: None, n: None, set: vec![], rows: false }
    }

    #[test]
    fn eval_truncates_to_certified_places() {
        let (s, out) = run(OutputMode::Plain, |sink| eval(Catalog::builtin(), &cfg(128), "pi-phinary", sink));
        assert_eq!(s.unwrap(), Status::Ok);
        let value = out.lines().next().unwrap().trim_start_matches("pi-phinary = ");
        assert_eq!(value, "3.14159265358979323846264338327950288419");
        assert!(out.contains("2^-128"));
    }

    #[test]
    fn unknown_names_list_alternatives() {
        let err = eval(Catalog::builtin(), &cfg(64), "nonsense", &mut Sink::new(OutputMode::Plain, &mut Vec::new()))
            .unwrap_err()
            .to_string();
        assert!(err.contains("arctan-phi") && err.contains("pi-phinary"));
    }

    #[test]
    fn single_point_verification() {
        let mut args = verify_args("svdrzxs");
        args.k = Some(7);
        let (s, out) = run(OutputMode::Plain, |sink| verify(Catalog::builtin(), &cfg(128), &args, sink));
        assert_eq!(s.unwrap(), Status::Ok);
        assert_eq!(out.lines().filter(|l| l.contains("PASS")).count(), 3);
    }

    #[test]
    fn excluded_value_is_a_notice() {
        let mut args = verify_args("qmp0021");
        args.k = Some(0);
        let (s, out) = run(OutputMode::Plain, |sink| verify(Catalog::builtin(), &cfg(128), &args, sink));
        assert_eq!(s.unwrap(), Status::Ok);
        assert!(out.starts_with("skipped:"));
        args.set = vec![("zz".into(), 1)];
        args.k = Some(1);
        assert!(
            verify(Catalog::builtin(), &cfg(128), &args, &mut Sink::new(OutputMode::Plain, &mut Vec::new())).is_err()
        );
    }

    #[test]
    fn failing_identity_sets_status() {
        let mut cat = Catalog::builtin().clone();
        let rec = cat.identities.iter_mut().find(|r| r.id == "nhfkxe6").unwrap();
        rec.rhs = Expr::parse("atan(1)").unwrap();
        let (s, out) = run(OutputMode::Plain, |sink| verify(&cat, &cfg(64), &verify_args("nhfkxe6"), sink));
        assert_eq!(s.unwrap(), Status::VerifyFailed);
        assert!(out.trim_end().ends_with("FAIL"));
    }

    #[test]
    fn phinary_of_expressions() {
        let p = |v: &str| run(OutputMode::Plain, |sink| phinary(Catalog::builtin(), &cfg(128), v, 8, None, sink));
        assert_eq!(p("2").1.trim(), "10.01");
        assert_eq!(p("1").1.trim(), "1.");
        assert_eq!(p("phi^2").1.trim(), "100.");
        assert!(p("-1").0.is_err());
        assert!(p("no-such-thing").0.is_err());
    }

    #[test]
    fn fibonacci_range() {
        let (_, out) = run(OutputMode::Plain, |sink| fibonacci(-3, false, sink));
        assert_eq!(out.trim(), "2");
        assert!(fibonacci(MAX_FIB_INDEX + 1, false, &mut Sink::new(OutputMode::Plain, &mut Vec::new())).is_err());
    }

    #[test]
    fn structured_lines_are_json() {
        let (_, out) = run(OutputMode::Structured, |sink| catalog(Catalog::builtin(), sink));
        let records: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(records.len(), Catalog::builtin().identities.len() + Catalog::builtin().formulas.len());
    }
}

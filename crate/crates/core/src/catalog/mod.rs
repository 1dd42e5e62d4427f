//! Registry of arctangent identities and series formulas.
//!
//! Both tables are TOML documents; the built-in copies are compiled in and
//! either may be replaced by a file at run time. Loading validates every
//! record: ids are unique, expressions only use declared parameters, formula
//! data evaluates exactly and construction references resolve.

pub mod verify;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bbp::construct::from_identity;
use crate::bbp::{BbpError, BbpFormula};
use crate::expr::{Env, Expr, ExprError, LinearForm};
use crate::golden::CombineMode;
use crate::scalar::RealScalar;

pub const BUILTIN_IDENTITIES: &str = include_str!("../../data/identities.toml");
pub const BUILTIN_FORMULAS: &str = include_str!("../../data/formulas.toml");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("malformed catalog data: {0}")]
    Toml(String),
    #[error("duplicate entry `{0}`")]
    Duplicate(String),
    #[error("`{id}`: {msg}")]
    Invalid { id: String, msg: String },
    #[error("`{id}`: {source}")]
    Formula { id: String, source: BbpError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityKind {
    Closed,
    FiniteSum,
    InfiniteSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Original,
    ExternalCited,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Original => "original",
            Source::ExternalCited => "external-cited",
        })
    }
}

/// Integer parameter domain: an optional interval minus a finite set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamDomain {
    pub name: String,
    #[serde(default)]
    pub min: Option<i64>,
    #[serde(default)]
    pub max: Option<i64>,
    #[serde(default)]
    pub exclude: Vec<i64>,
}

impl ParamDomain {
    pub fn contains(&self, v: i64) -> bool {
        self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m) && !self.exclude.contains(&v)
    }

    /// Members with `|v| <= bound`, ascending.
    pub fn values_within(&self, bound: i64) -> Vec<i64> {
        (-bound..=bound).filter(|&v| self.contains(v)).collect()
    }
}

impl fmt::Display for ParamDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.min, self.max) {
            (Some(lo), Some(hi)) => write!(f, "{lo} <= {} <= {hi}", self.name)?,
            (Some(lo), None) => write!(f, "{} >= {lo}", self.name)?,
            (None, Some(hi)) => write!(f, "{} <= {hi}", self.name)?,
            (None, None) => write!(f, "{} any integer", self.name)?,
        }
        if !self.exclude.is_empty() {
            let ex: Vec<String> = self.exclude.iter().map(|v| v.to_string()).collect();
            write!(f, ", {} not in {{{}}}", self.name, ex.join(", "))?;
        }
        Ok(())
    }
}

/// One argument-combination step of a proof:
/// `atan(x) ± atan(y) = atan(expected) + branch·π`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArgStep {
    pub x: Expr,
    pub y: Expr,
    pub mode: CombineMode,
    pub expected: Expr,
    #[serde(default = "zero_expr")]
    pub branch: Expr,
}

fn zero_expr() -> Expr {
    Expr::int(0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityRecord {
    pub id: String,
    pub summary: String,
    pub kind: IdentityKind,
    pub source: Source,
    #[serde(default)]
    pub params: Vec<ParamDomain>,
    pub lhs: Expr,
    pub rhs: Expr,
    #[serde(default)]
    pub steps: Vec<ArgStep>,
    /// Upper bound on the discarded tail in terms of the last included index `M`.
    #[serde(default)]
    pub tail: Option<Expr>,
}

impl IdentityRecord {
    pub fn param(&self, name: &str) -> Option<&ParamDomain> {
        self.params.iter().find(|d| d.name == name)
    }

    /// Every in-domain assignment with all `|param| <= bound`.
    pub fn assignments(&self, bound: i64) -> Vec<Env> {
        let mut out = vec![Env::new()];
        for d in &self.params {
            out = out
                .into_iter()
                .flat_map(|env| {
                    d.values_within(bound).into_iter().map(move |v| {
                        let mut e = env.clone();
                        e.insert(d.name.clone(), v);
                        e
                    })
                })
                .collect();
        }
        out
    }

    /// `lhs - rhs` as a linear form over arctangent atoms.
    pub fn difference_form(&self) -> LinearForm {
        Expr::sub(self.lhs.clone(), self.rhs.clone()).linear_form()
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let invalid = |msg: String| CatalogError::Invalid { id: self.id.clone(), msg };
        let declared: BTreeSet<&str> = self.params.iter().map(|d| d.name.as_str()).collect();
        if declared.len() != self.params.len() {
            return Err(invalid("parameter declared twice".into()));
        }
        let mut exprs = vec![&self.lhs, &self.rhs];
        for s in &self.steps {
            exprs.extend([&s.x, &s.y, &s.expected, &s.branch]);
        }
        for e in exprs {
            for v in e.free_vars() {
                if !declared.contains(v.as_str()) {
                    return Err(invalid(format!("undeclared parameter `{v}` in {e}")));
                }
            }
        }
        let infinite = self.lhs.contains_infinite_sum() || self.rhs.contains_infinite_sum();
        match (self.kind, infinite, &self.tail) {
            (IdentityKind::InfiniteSum, true, Some(t)) => {
                for v in t.free_vars() {
                    if v != "M" && !declared.contains(v.as_str()) {
                        return Err(invalid(format!("undeclared variable `{v}` in tail bound")));
                    }
                }
                Ok(())
            }
            (IdentityKind::InfiniteSum, _, _) => {
                Err(invalid("infinite sum needs one unbounded sum and a tail bound".into()))
            }
            (_, true, _) => Err(invalid("unbounded sum in a record not marked infinite-sum".into())),
            (_, false, Some(_)) => Err(invalid("tail bound on a finite record".into())),
            _ => Ok(()),
        }
    }
}

/// Series formula as written in the data file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaRecord {
    pub name: String,
    pub lhs: Expr,
    pub s: u32,
    pub base: Expr,
    pub prefactor: Expr,
    pub coefficients: Vec<Expr>,
    /// Identity whose right side constructs this formula.
    #[serde(default)]
    pub identity: Option<String>,
    #[serde(default)]
    pub scale: Option<Expr>,
}

impl FormulaRecord {
    pub fn to_formula(&self) -> Result<BbpFormula, CatalogError> {
        let wrap = |e: ExprError| CatalogError::Formula { id: self.name.clone(), source: e.into() };
        let env = Env::new();
        let coefficients =
            self.coefficients.iter().map(|c| c.eval_exact(&env)).collect::<Result<Vec<_>, _>>().map_err(wrap)?;
        BbpFormula::new(
            self.name.clone(),
            self.s,
            self.base.eval_exact(&env).map_err(wrap)?,
            coefficients,
            self.prefactor.eval_exact(&env).map_err(wrap)?,
            self.lhs.clone(),
        )
        .map_err(|e| CatalogError::Formula { id: self.name.clone(), source: e })
    }

    pub fn scale_value(&self) -> Result<RealScalar, CatalogError> {
        match &self.scale {
            None => Ok(RealScalar::one()),
            Some(e) => e
                .eval_exact(&Env::new())
                .map_err(|err| CatalogError::Formula { id: self.name.clone(), source: err.into() }),
        }
    }
}

#[derive(Debug, Deserialize)]
struct IdentityFile {
    #[serde(default)]
    identity: Vec<IdentityRecord>,
}

#[derive(Debug, Deserialize)]
struct FormulaFile {
    #[serde(default)]
    formula: Vec<FormulaRecord>,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub identities: Vec<IdentityRecord>,
    pub formulas: Vec<FormulaRecord>,
}

impl Catalog {
    pub fn from_toml(identities: &str, formulas: &str) -> Result<Catalog, CatalogError> {
        let ids: IdentityFile = toml::from_str(identities).map_err(|e| CatalogError::Toml(e.to_string()))?;
        let fs: FormulaFile = toml::from_str(formulas).map_err(|e| CatalogError::Toml(e.to_string()))?;
        let cat = Catalog { identities: ids.identity, formulas: fs.formula };
        cat.validate()?;
        Ok(cat)
    }

    /// Built-in tables with optional file overrides.
    pub fn load(identities: Option<&Path>, formulas: Option<&Path>) -> Result<Catalog, CatalogError> {
        let read = |p: Option<&Path>, builtin: &str| -> Result<String, CatalogError> {
            match p {
                None => Ok(builtin.to_owned()),
                Some(p) => std::fs::read_to_string(p)
                    .map_err(|e| CatalogError::Io { path: p.display().to_string(), msg: e.to_string() }),
            }
        };
        Catalog::from_toml(&read(identities, BUILTIN_IDENTITIES)?, &read(formulas, BUILTIN_FORMULAS)?)
    }

    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| {
            Catalog::from_toml(BUILTIN_IDENTITIES, BUILTIN_FORMULAS).expect("built-in catalog is valid")
        })
    }

    pub fn identity(&self, id: &str) -> Option<&IdentityRecord> {
        self.identities.iter().find(|r| r.id == id)
    }

    pub fn formula(&self, name: &str) -> Option<&FormulaRecord> {
        self.formulas.iter().find(|r| r.name == name)
    }

    pub fn formula_names(&self) -> Vec<&str> {
        self.formulas.iter().map(|f| f.name.as_str()).collect()
    }

    /// Builds a formula from its referenced identity; `None` when it has none.
    pub fn construct(&self, name: &str) -> Option<Result<BbpFormula, CatalogError>> {
        let rec = self.formula(name)?;
        let id = rec.identity.as_ref()?;
        Some((|| {
            let ident = self.identity(id).ok_or_else(|| CatalogError::Invalid {
                id: rec.name.clone(),
                msg: format!("unknown identity `{id}`"),
            })?;
            from_identity(&rec.name, &ident.lhs, &ident.rhs, &Env::new(), &rec.scale_value()?)
                .map(|f| f.with_lhs(rec.lhs.clone()))
                .map_err(|e| CatalogError::Formula { id: rec.name.clone(), source: e })
        })())
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let mut seen = BTreeSet::new();
        for r in &self.identities {
            if !seen.insert(r.id.as_str()) {
                return Err(CatalogError::Duplicate(r.id.clone()));
            }
            r.validate()?;
        }
        let mut seen = BTreeSet::new();
        for f in &self.formulas {
            if !seen.insert(f.name.as_str()) {
                return Err(CatalogError::Duplicate(f.name.clone()));
            }
            f.to_formula()?;
            f.scale_value()?;
            if let Some(id) = &f.identity {
                if self.identity(id).is_none() {
                    return Err(CatalogError::Invalid { id: f.name.clone(), msg: format!("unknown identity `{id}`") });
                }
            }
        }
        Ok(())
    }
}

/// The built-in identity records.
pub fn catalog_list() -> Vec<IdentityRecord> {
    Catalog::builtin().identities.clone()
}

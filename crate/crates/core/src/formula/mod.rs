//! Additive-predictor formulas: terms, parsing, and design construction.

mod design;
mod parse;
mod spline;

pub use design::{
    build_design, build_design_with_ranges, evaluate_predictor, variable_ranges, DeepInput,
    DesignBlock, VarRanges,
};
pub use parse::parse_formula;
pub use spline::{bspline_basis, difference_penalty, equispaced_breakpoints};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DEFAULT_N_BASIS: usize = 10;
pub const DEFAULT_DEGREE: usize = 3;
pub const DEFAULT_PENALTY_ORDER: usize = 2;
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Penalized B-spline smooth of a single variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Smooth {
    pub var: String,
    pub n_basis: usize,
    pub degree: usize,
    pub penalty_order: usize,
    pub lambda: f64,
}

impl Smooth {
    pub fn new(var: impl Into<String>, n_basis: usize, lambda: f64) -> Smooth {
        Smooth {
            var: var.into(),
            n_basis,
            degree: DEFAULT_DEGREE,
            penalty_order: DEFAULT_PENALTY_ORDER,
            lambda,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.degree < 1 {
            return Err(Error::Formula(format!("s({}): degree must be >= 1", self.var)));
        }
        if self.n_basis < self.degree + 2 {
            return Err(Error::Formula(format!(
                "s({}): k={} must be at least degree+2={}",
                self.var,
                self.n_basis,
                self.degree + 2
            )));
        }
        if !matches!(self.penalty_order, 1 | 2) {
            return Err(Error::Formula(format!(
                "s({}): penalty order must be 1 or 2",
                self.var
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Formula(format!(
                "s({}): lambda must be finite and >= 0",
                self.var
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Intercept,
    Linear(String),
    Smooth(Smooth),
    L1Linear { var: String, lambda: f64 },
    Deep { net: String, vars: Vec<String> },
}

impl Term {
    pub fn is_deep(&self) -> bool {
        matches!(self, Term::Deep { .. })
    }

    /// Data columns the term reads.
    pub fn variables(&self) -> Vec<&str> {
        match self {
            Term::Intercept => Vec::new(),
            Term::Linear(v) | Term::L1Linear { var: v, .. } => vec![v.as_str()],
            Term::Smooth(s) => vec![s.var.as_str()],
            Term::Deep { vars, .. } => vars.iter().map(String::as_str).collect(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Intercept => f.write_str("1"),
            Term::Linear(v) => f.write_str(v),
            Term::Smooth(s) => write!(f, "s({},k={},lambda={})", s.var, s.n_basis, s.lambda),
            Term::L1Linear { var, lambda } => write!(f, "lasso({var},lambda={lambda})"),
            Term::Deep { net, vars } => write!(f, "{net}({})", vars.join(",")),
        }
    }
}

/// An ordered sum of terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    terms: Vec<Term>,
}

impl Formula {
    pub fn new(terms: Vec<Term>) -> Result<Formula> {
        let f = Formula { terms };
        f.validate()?;
        Ok(f)
    }

    pub fn intercept_only() -> Formula {
        Formula { terms: vec![Term::Intercept] }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn has_intercept(&self) -> bool {
        self.terms.contains(&Term::Intercept)
    }

    /// Sum of two predictors for the same parameter. A second intercept is
    /// dropped; everything else must still validate.
    pub fn combine(&self, other: &Formula) -> Result<Formula> {
        let mut terms = self.terms.clone();
        for t in &other.terms {
            if *t == Term::Intercept && terms.contains(t) {
                continue;
            }
            terms.push(t.clone());
        }
        Formula::new(terms)
    }

    fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Formula("formula has no terms".into()));
        }
        let intercepts = self.terms.iter().filter(|t| **t == Term::Intercept).count();
        if intercepts > 1 {
            return Err(Error::Formula("more than one intercept".into()));
        }
        let mut linear = std::collections::HashSet::new();
        for t in &self.terms {
            match t {
                Term::Linear(v) => {
                    if !linear.insert(v.as_str()) {
                        return Err(Error::Formula(format!("duplicate linear term `{v}`")));
                    }
                }
                Term::Smooth(s) => s.validate()?,
                Term::L1Linear { var, lambda } => {
                    if !(*lambda >= 0.0 && lambda.is_finite()) {
                        return Err(Error::Formula(format!(
                            "lasso({var}): lambda must be finite and >= 0"
                        )));
                    }
                }
                Term::Deep { net, vars } => {
                    if vars.is_empty() {
                        return Err(Error::Formula(format!("deep term `{net}` has no inputs")));
                    }
                }
                Term::Intercept => {}
            }
        }
        Ok(())
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("~")?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Formula> {
        parse_formula(s)
    }
}

impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Formula, D::Error> {
        let text = String::deserialize(d)?;
        parse_formula(&text).map_err(serde::de::Error::custom)
    }
}

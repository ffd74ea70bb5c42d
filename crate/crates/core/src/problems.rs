//! Test functions with evaluation counters, domain guards and reference roots.
//!
//! The standard suite lives in `data/suite.toml`: one record per function
//! with its expression, admissible domain, a bisection bracket and a
//! 210-digit reference root.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{Expr, ParseError};
use crate::mpcore::{ulp_threshold, BigScalar, MpError};

const SUITE_DATA: &str = include_str!("../data/suite.toml");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("no sign change of {name} on [{lo}, {hi}]")]
    NoSignChange {
        name: String,
        lo: String,
        hi: String,
    },
    #[error("unknown problem `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Expr(#[from] ParseError),
    #[error(transparent)]
    Mp(#[from] MpError),
    #[error("malformed problem data: {0}")]
    Data(String),
    #[error("root polishing of {0} did not settle")]
    NoPolish(String),
}

/// A closure-backed function of one real variable.
pub type NativeFn = Arc<dyn Fn(&BigScalar) -> Result<BigScalar, MpError> + Send + Sync>;

#[derive(Clone)]
enum Evaluator {
    Expr(Expr),
    Native(NativeFn),
}

impl Evaluator {
    fn eval(&self, x: &BigScalar) -> Result<BigScalar, MpError> {
        match self {
            Evaluator::Expr(e) => e.eval(x),
            Evaluator::Native(f) => f(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bound {
    value: f64,
    inclusive: bool,
}

/// An interval of the real line with optional excluded points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Domain {
    lower: Option<Bound>,
    upper: Option<Bound>,
    excluded: Vec<f64>,
}

impl Domain {
    pub fn real_line() -> Domain {
        Domain::default()
    }

    pub fn contains(&self, x: &BigScalar) -> bool {
        if !x.is_finite() {
            return false;
        }
        if let Some(b) = self.lower {
            if (b.inclusive && *x < b.value) || (!b.inclusive && *x <= b.value) {
                return false;
            }
        }
        if let Some(b) = self.upper {
            if (b.inclusive && *x > b.value) || (!b.inclusive && *x >= b.value) {
                return false;
            }
        }
        !self.excluded.iter().any(|p| *x == *p)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lower.is_none() && self.upper.is_none() {
            f.write_str("R")?;
        } else {
            match self.lower {
                Some(b) => write!(f, "{}{}", if b.inclusive { '[' } else { '(' }, b.value)?,
                None => f.write_str("(-inf")?,
            }
            f.write_str(", ")?;
            match self.upper {
                Some(b) => write!(f, "{}{}", b.value, if b.inclusive { ']' } else { ')' })?,
                None => f.write_str("inf)")?,
            }
        }
        if !self.excluded.is_empty() {
            let pts: Vec<String> = self.excluded.iter().map(|p| p.to_string()).collect();
            write!(f, " \\ {{{}}}", pts.join(", "))?;
        }
        Ok(())
    }
}

impl FromStr for Domain {
    type Err = ProblemError;

    /// Accepts `R`, `(a, b)`, `[a, b]`, mixed brackets, `inf`/`-inf`, and an
    /// optional exclusion set: `[-1, 1] \ {0}`.
    fn from_str(s: &str) -> Result<Domain, ProblemError> {
        let bad = || ProblemError::Data(format!("bad domain `{s}`"));
        let (interval, excluded) = match s.split_once('\\') {
            Some((i, e)) => (i.trim(), Some(e.trim())),
            None => (s.trim(), None),
        };
        let mut domain = Domain::default();
        if interval != "R" {
            let open = interval.chars().next().ok_or_else(bad)?;
            let close = interval.chars().last().ok_or_else(bad)?;
            let inner = interval.get(1..interval.len() - 1).ok_or_else(bad)?;
            let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            if lo.is_finite() {
                domain.lower = Some(Bound {
                    value: lo,
                    inclusive: match open {
                        '[' => true,
                        '(' => false,
                        _ => return Err(bad()),
                    },
                });
            }
            if hi.is_finite() {
                domain.upper = Some(Bound {
                    value: hi,
                    inclusive: match close {
                        ']' => true,
                        ')' => false,
                        _ => return Err(bad()),
                    },
                });
            }
        }
        if let Some(set) = excluded {
            let inner = set
                .strip_prefix('{')
                .and_then(|r| r.strip_suffix('}'))
                .ok_or_else(bad)?;
            for p in inner.split(',') {
                domain.excluded.push(p.trim().parse().map_err(|_| bad())?);
            }
        }
        Ok(domain)
    }
}

/// A named scalar function under study.
#[derive(Clone)]
pub struct Problem {
    name: String,
    source: Option<String>,
    eval: Evaluator,
    derivative: Option<Evaluator>,
    domain: Domain,
    root: Option<String>,
    bracket: Option<(String, String)>,
    counter: u64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("source", &self.source)
            .field("domain", &self.domain.to_string())
            .field("counter", &self.counter)
            .finish()
    }
}

impl Problem {
    /// Builds a problem from an expression in `x`; its derivative comes for free.
    pub fn from_expr(name: &str, source: &str) -> Result<Problem, ProblemError> {
        let expr = Expr::parse(source)?;
        let derivative = expr.derivative();
        Ok(Problem {
            name: name.to_string(),
            source: Some(source.to_string()),
            eval: Evaluator::Expr(expr),
            derivative: Some(Evaluator::Expr(derivative)),
            domain: Domain::real_line(),
            root: None,
            bracket: None,
            counter: 0,
        })
    }

    pub fn from_fn<F>(name: &str, f: F) -> Problem
    where
        F: Fn(&BigScalar) -> Result<BigScalar, MpError> + Send + Sync + 'static,
    {
        Problem {
            name: name.to_string(),
            source: None,
            eval: Evaluator::Native(Arc::new(f)),
            derivative: None,
            domain: Domain::real_line(),
            root: None,
            bracket: None,
            counter: 0,
        }
    }

    pub fn with_derivative<F>(mut self, f: F) -> Problem
    where
        F: Fn(&BigScalar) -> Result<BigScalar, MpError> + Send + Sync + 'static,
    {
        self.derivative = Some(Evaluator::Native(Arc::new(f)));
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Problem {
        self.domain = domain;
        self
    }

    /// Attaches a reference root given as a decimal or `p/q` literal.
    pub fn with_root(mut self, literal: &str) -> Problem {
        self.root = Some(literal.to_string());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn root_literal(&self) -> Option<&str> {
        self.root.as_deref()
    }

    pub fn bracket(&self, digits: u32) -> Option<(BigScalar, BigScalar)> {
        let (lo, hi) = self.bracket.as_ref()?;
        Some((
            BigScalar::parse(lo, digits).ok()?,
            BigScalar::parse(hi, digits).ok()?,
        ))
    }

    /// Evaluates the function, counting the call even when it fails.
    pub fn eval(&mut self, x: &BigScalar) -> Result<BigScalar, MpError> {
        self.counter += 1;
        if !self.domain.contains(x) {
            return Err(MpError::Domain {
                function: "domain guard",
                argument: format!("{} outside {}", x.to_sci_string_with(20), self.domain),
            });
        }
        self.eval.eval(x)
    }

    /// Number of `eval` calls since construction or the last reset.
    pub fn evaluations(&self) -> u64 {
        self.counter
    }

    pub fn reset_counter(&mut self) {
        self.counter = 0;
    }

    /// The derivative as a problem of its own, when one is known.
    pub fn derivative(&self) -> Option<Problem> {
        let eval = self.derivative.clone()?;
        Some(Problem {
            name: format!("{}'", self.name),
            source: match &eval {
                Evaluator::Expr(e) => Some(e.to_string()),
                Evaluator::Native(_) => None,
            },
            eval,
            derivative: None,
            domain: self.domain.clone(),
            root: None,
            bracket: None,
            counter: 0,
        })
    }

    /// The stored reference root rounded to `digits`.
    pub fn reference_root(&self, digits: u32) -> Option<BigScalar> {
        BigScalar::parse_ratio(self.root.as_deref()?, digits).ok()
    }

    /// The reference root refined to the full `digits` of working precision.
    ///
    /// Starts from the stored literal and runs secant steps until the update
    /// falls below the resolution of the working precision. Does not count
    /// towards the evaluation counter.
    pub fn polished_root(&self, digits: u32) -> Result<BigScalar, ProblemError> {
        let start = self
            .reference_root(digits)
            .ok_or_else(|| ProblemError::Data(format!("{} has no reference root", self.name)))?;
        let mut probe = self.clone();
        polish_root(&mut probe, &start, digits)
    }
}

/// Secant refinement of an already accurate root approximation.
pub fn polish_root(
    p: &mut Problem,
    approx: &BigScalar,
    digits: u32,
) -> Result<BigScalar, ProblemError> {
    let mut x0 = approx.with_digits(digits);
    let mut f0 = p.eval(&x0)?;
    if f0.is_zero() {
        return Ok(x0);
    }
    let scale = if x0.abs() > 1.0 {
        x0.abs()
    } else {
        BigScalar::one(digits)
    };
    let mut x1 = &x0 + &(&scale * &BigScalar::pow10(-30, digits));
    let mut f1 = p.eval(&x1)?;
    for _ in 0..200 {
        if f1.is_zero() {
            return Ok(x1);
        }
        let slope = (&f1 - &f0).checked_div(&(&x1 - &x0))?;
        let step = f1.checked_div(&slope)?;
        let x2 = &x1 - &step;
        if step.abs() <= ulp_threshold(&x2) {
            return Ok(x2);
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = p.eval(&x1)?;
    }
    Err(ProblemError::NoPolish(p.name.clone()))
}

/// Bisection on a sign-changing bracket down to width `10^-digits`.
pub fn refine_root(
    p: &mut Problem,
    lo: &BigScalar,
    hi: &BigScalar,
    digits: u32,
) -> Result<BigScalar, ProblemError> {
    let work = digits + 10;
    let mut lo = lo.with_digits(work);
    let mut hi = hi.with_digits(work);
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let f_lo = p.eval(&lo)?;
    if f_lo.is_zero() {
        return Ok(lo);
    }
    let f_hi = p.eval(&hi)?;
    if f_hi.is_zero() {
        return Ok(hi);
    }
    if f_lo.is_sign_negative() == f_hi.is_sign_negative() {
        return Err(ProblemError::NoSignChange {
            name: p.name.clone(),
            lo: lo.to_sci_string_with(20),
            hi: hi.to_sci_string_with(20),
        });
    }
    let lo_negative = f_lo.is_sign_negative();
    let width = BigScalar::pow10(-i32::try_from(digits).unwrap_or(i32::MAX), work);
    let half = BigScalar::parse("0.5", work)?;
    while &hi - &lo >= width {
        let mid = &(&lo + &hi) * &half;
        let f_mid = p.eval(&mid)?;
        if f_mid.is_zero() {
            return Ok(mid);
        }
        if f_mid.is_sign_negative() == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(&(&lo + &hi) * &half)
}

/// Which form of the seventh test function to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum F7Reading {
    /// `cos(pi*x/2)`: makes `x = 1/3` an exact root.
    #[default]
    Corrected,
    /// The literal `cos(pi/2)` form, a constant factor of zero; has no real root.
    Printed,
}

/// One record of the suite data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub expr: String,
    pub domain: String,
    #[serde(default)]
    pub root: Option<String>,
    #[serde(default)]
    pub bracket: Option<[String; 2]>,
    #[serde(default)]
    pub printed_expr: Option<String>,
}

#[derive(Debug, Deserialize, Serialize)]
struct SuiteFile {
    problem: Vec<ProblemSpec>,
}

/// The raw records of the standard suite.
pub fn suite_specs() -> Vec<ProblemSpec> {
    let file: SuiteFile = toml::from_str(SUITE_DATA).expect("bundled suite data is valid TOML");
    file.problem
}

impl ProblemSpec {
    pub fn build(&self, reading: F7Reading) -> Result<Problem, ProblemError> {
        let (source, literal) = match (&self.printed_expr, reading) {
            (Some(printed), F7Reading::Printed) => (printed.as_str(), true),
            _ => (self.expr.as_str(), false),
        };
        let mut p = Problem::from_expr(&self.name, source)?.with_domain(self.domain.parse()?);
        if !literal {
            p.root = self.root.clone();
            p.bracket = self.bracket.clone().map(|[a, b]| (a, b));
        }
        Ok(p)
    }
}

/// The seven standard test functions, `f1` through `f7`.
pub fn suite() -> Vec<Problem> {
    suite_with(F7Reading::Corrected)
}

pub fn suite_with(reading: F7Reading) -> Vec<Problem> {
    suite_specs()
        .iter()
        .map(|s| s.build(reading).expect("bundled suite data is well formed"))
        .collect()
}

/// Looks a suite problem up by name (`f1` .. `f7`).
pub fn by_name(name: &str) -> Result<Problem, ProblemError> {
    by_name_with(name, F7Reading::Corrected)
}

pub fn by_name_with(name: &str, reading: F7Reading) -> Result<Problem, ProblemError> {
    suite_specs()
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| ProblemError::Unknown(name.to_string()))?
        .build(reading)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(s: &str, d: u32) -> BigScalar {
        BigScalar::parse(s, d).unwrap()
    }

    #[test]
    fn counter_law() {
        let mut p = Problem::from_expr("sq", "x^2").unwrap();
        let x = big("1.5", 60);
        for _ in 0..7 {
            p.eval(&x).unwrap();
        }
        assert_eq!(p.evaluations(), 7);
        p.reset_counter();
        assert_eq!(p.evaluations(), 0);
    }

    #[test]
    fn domain_guards() {
        let mut f4 = by_name("f4").unwrap();
        assert!(f4.eval(&big("0", 60)).is_err());
        assert!(f4.eval(&big("-1", 60)).is_err());
        assert!(f4.eval(&big("1e-400", 600)).is_ok());

        let mut f5 = by_name("f5").unwrap();
        assert!(f5.eval(&big("0", 60)).is_err());
        assert!(f5.eval(&big("1.0000001", 60)).is_err());
        assert!(f5.eval(&big("-1", 60)).is_ok());
        assert!(f5.eval(&big("-0.5", 60)).is_ok());

        let mut f7 = by_name("f7").unwrap();
        assert!(f7.eval(&big("-1.5", 60)).is_err());
        assert!(f7.eval(&big("0.5", 60)).is_ok());
        // the guard failure still counts as a call
        assert_eq!(f7.evaluations(), 2);
    }

    #[test]
    fn domain_round_trip() {
        for s in ["R", "(0, inf)", "[-1, 1] \\ {0}", "[-1, 1]", "(-inf, 2]"] {
            let d: Domain = s.parse().unwrap();
            let again: Domain = d.to_string().parse().unwrap();
            assert_eq!(d, again, "{s}");
        }
        assert_eq!(
            "(-inf, inf)".parse::<Domain>().unwrap(),
            Domain::real_line()
        );
        assert!("[1, 2".parse::<Domain>().is_err());
    }

    #[test]
    fn suite_has_seven_functions_with_expected_roots() {
        let s = suite();
        let names: Vec<&str> = s.iter().map(|p| p.name()).collect();
        assert_eq!(names, ["f1", "f2", "f3", "f4", "f5", "f6", "f7"]);
        let approx = [1.6796, 0.0, 1.19, 1.2979, -0.92577, 2.07683, 1.0 / 3.0];
        for (p, a) in s.iter().zip(approx) {
            let r = p.reference_root(50).unwrap().to_f64();
            assert!((r - a).abs() < 1e-2, "{}: {r}", p.name());
        }
        assert_eq!(s[6].root_literal(), Some("1/3"));
        assert_eq!(s[1].root_literal(), Some("0"));
    }

    #[test]
    fn printed_f7_has_no_root_near_one_third() {
        let mut f7 = by_name_with("f7", F7Reading::Printed).unwrap();
        assert!(f7.reference_root(60).is_none());
        let v = f7
            .eval(&BigScalar::parse_ratio("1/3", 60).unwrap())
            .unwrap();
        assert!(v.abs() > 0.5);
    }

    #[test]
    fn bisection_on_a_linear() {
        let mut p = Problem::from_expr("lin", "x - 2").unwrap();
        let r = refine_root(&mut p, &big("0", 60), &big("5", 60), 50).unwrap();
        assert!((&r - &big("2", 60)).abs() < BigScalar::pow10(-50, 60));
    }

    #[test]
    fn bisection_requires_a_sign_change() {
        let mut p = Problem::from_expr("sq", "x^2 + 1").unwrap();
        assert!(matches!(
            refine_root(&mut p, &big("-1", 60), &big("1", 60), 30),
            Err(ProblemError::NoSignChange { .. })
        ));
    }

    #[test]
    fn derivative_problem_evaluates() {
        let p = Problem::from_expr("cube", "x^3").unwrap();
        let mut d = p.derivative().unwrap();
        assert_eq!(d.eval(&big("2", 60)).unwrap(), big("12", 60));
        assert!(Problem::from_fn("n", |x| Ok(x.clone()))
            .derivative()
            .is_none());
    }
}

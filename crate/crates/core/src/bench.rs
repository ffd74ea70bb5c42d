//! Iteration-count benchmark of the eighth-order method over the test suite.
//!
//! Twenty-one (function, initial guess) cases with reference iteration
//! counts, evaluation totals and final residuals. Residuals are compared by
//! decimal exponent only, within [`RESIDUAL_EXPONENT_TOLERANCE`].

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::methods::{solve, Method, SolveOptions, SolveReport, Status, DEFAULT_MAX_ITER};
use crate::mpcore::BigScalar;
use crate::problems;

/// Allowed distance, in orders of magnitude, between observed and reference residuals.
pub const RESIDUAL_EXPONENT_TOLERANCE: f64 = 10.0;

/// Precision the reference numbers were produced at.
pub const REFERENCE_DIGITS: u32 = 1000;

/// Minimum number of matching iteration counts for a passing benchmark.
pub const REQUIRED_IT_MATCHES: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchCase {
    pub problem: &'static str,
    pub x0: &'static str,
    pub expected_it: usize,
    pub expected_tne: u64,
    /// Reference residual in `0.Xe-N` notation.
    pub expected_residual: &'static str,
}

const fn case(
    problem: &'static str,
    x0: &'static str,
    expected_it: usize,
    expected_residual: &'static str,
) -> BenchCase {
    BenchCase {
        problem,
        x0,
        expected_it,
        expected_tne: 4 * expected_it as u64,
        expected_residual,
    }
}

/// The reference cases, in fixed order.
pub const CASES: [BenchCase; 21] = [
    case("f1", "1.72", 2, "0.4e-80"),
    case("f1", "1.5", 3, "0.6e-315"),
    case("f1", "1.7", 2, "0.1e-100"),
    case("f2", "0.1", 2, "0.1e-52"),
    case("f2", "-0.1", 2, "0.1e-74"),
    case("f2", "-0.5", 3, "0.4e-259"),
    case("f3", "1.0", 2, "0.1e-58"),
    case("f3", "0.8", 3, "0.1e-64"),
    case("f3", "1.8", 3, "0.1e-107"),
    case("f4", "1.4", 3, "0.4e-333"),
    case("f4", "1.15", 3, "0.2e-284"),
    case("f4", "1.3", 2, "0.1e-161"),
    case("f5", "-0.92", 2, "0.8e-97"),
    case("f5", "-0.93", 2, "0.4e-98"),
    case("f5", "-0.9", 3, "0.2e-361"),
    case("f6", "1.9", 2, "0.3e-59"),
    case("f6", "2.3", 2, "0.4e-60"),
    case("f6", "1.8", 3, "0.7e-352"),
    case("f7", "0.8", 3, "0.8e-219"),
    case("f7", "0.6", 3, "0.2e-378"),
    case("f7", "0.4", 2, "0.1e-70"),
];

impl BenchCase {
    /// `log10` of the reference residual.
    pub fn expected_log10(&self) -> f64 {
        // split so exponents below the f64 range stay exact
        let (m, e) = self
            .expected_residual
            .split_once('e')
            .expect("0.Xe-N literal");
        m.parse::<f64>().expect("mantissa").log10() + e.parse::<f64>().expect("exponent")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub case: BenchCase,
    pub report: SolveReport,
    pub it_match: bool,
    /// `|log10 observed - log10 reference|` for converged runs, rounded.
    pub residual_exponent_delta: Option<i64>,
}

impl BenchResult {
    pub fn residual_match(&self) -> bool {
        self.residual_exponent_delta
            .is_some_and(|d| d as f64 <= RESIDUAL_EXPONENT_TOLERANCE)
    }
}

/// Runs one case with the particular eighth-order method.
pub fn run_case(case: &BenchCase, digits: u32, tol: &BigScalar, max_iter: usize) -> BenchResult {
    let mut f = problems::by_name(case.problem).expect("bench cases name suite problems");
    let x0 = BigScalar::parse(case.x0, digits).expect("bench guesses are decimal literals");
    let opts = SolveOptions::new(digits)
        .with_tol(tol.with_digits(digits))
        .with_max_iter(max_iter);
    let report = solve(&mut f, &x0, &Method::om8(), &opts)
        .expect("bench options are valid")
        .report;
    let converged = report.status == Status::Converged;
    let residual_exponent_delta = converged.then(|| {
        let observed = report.residual.log10_abs();
        let delta = if observed.is_finite() {
            (observed - case.expected_log10()).abs()
        } else {
            f64::INFINITY
        };
        if delta.is_finite() {
            delta.round() as i64
        } else {
            i64::MAX
        }
    });
    BenchResult {
        case: *case,
        it_match: converged && report.iterations == case.expected_it,
        report,
        residual_exponent_delta,
    }
}

/// Runs all 21 cases in parallel; results come back in table order.
pub fn run_benchmark(digits: u32, tol: &BigScalar) -> Vec<BenchResult> {
    run_benchmark_with(digits, tol, DEFAULT_MAX_ITER)
}

pub fn run_benchmark_with(digits: u32, tol: &BigScalar, max_iter: usize) -> Vec<BenchResult> {
    CASES
        .par_iter()
        .map(|c| run_case(c, digits, tol, max_iter))
        .collect()
}

/// Whether a run used the reference settings, so counts are comparable.
pub fn comparable(digits: u32, tol: &BigScalar) -> bool {
    digits >= REFERENCE_DIGITS && *tol == BigScalar::pow10(-50, tol.digits())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            other => Err(format!("unknown table format `{other}`")),
        }
    }
}

pub const COLUMNS: [&str; 12] = [
    "function",
    "guess",
    "IT",
    "TNE",
    "residual",
    "residual_sci",
    "status",
    "ref_IT",
    "ref_TNE",
    "ref_residual",
    "it_match",
    "residual_delta",
];

fn row(r: &BenchResult) -> [String; 12] {
    let converged = r.report.status == Status::Converged;
    let (it, tne) = if converged {
        (
            r.report.iterations.to_string(),
            r.report.evaluations.to_string(),
        )
    } else {
        ("-".to_string(), "-".to_string())
    };
    let residual = if converged {
        r.report.residual.to_short_exp()
    } else {
        r.report.status.code().to_string()
    };
    [
        r.case.problem.to_string(),
        r.case.x0.to_string(),
        it,
        tne,
        residual,
        r.report.residual.to_sci_string_with(6),
        r.report.status.to_string(),
        r.case.expected_it.to_string(),
        r.case.expected_tne.to_string(),
        r.case.expected_residual.to_string(),
        r.it_match.to_string(),
        r.residual_exponent_delta
            .map_or_else(|| "-".to_string(), |d| d.to_string()),
    ]
}

/// Renders results as CSV or a Markdown pipe table. Byte-stable for fixed input.
pub fn emit_table(results: &[BenchResult], format: TableFormat) -> String {
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS).expect("in-memory write");
            for r in results {
                w.write_record(row(r)).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
        }
        TableFormat::Markdown => {
            let mut out = String::new();
            let _ = writeln!(out, "| {} |", COLUMNS.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(COLUMNS.len()));
            for r in results {
                let _ = writeln!(out, "| {} |", row(r).join(" | "));
            }
            out
        }
    }
}

/// Summary line: matched iteration counts and residual exponents.
pub fn summary(results: &[BenchResult]) -> (usize, usize) {
    let it = results.iter().filter(|r| r.it_match).count();
    let res = results.iter().filter(|r| r.residual_match()).count();
    (it, res)
}

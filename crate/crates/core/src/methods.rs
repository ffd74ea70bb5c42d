//! Iteration kernels and the common solve loop.
//!
//! Three kernels are provided: Newton, Steffensen, and the three-step
//! derivative-free family
//!
//! ```text
//! z = x + alpha * f(x)^m
//! y = x - f(x) / f[z, x]
//! w = y - G(t1) * f(y) / f[x, y]          t1 = f(y) / f(x)
//! x' = w - H(t) * f(w) / f[w, y]          t = f[w, y] / f[w, x]   (or t1)
//! ```
//!
//! With `m >= 3`, `G(0) = G'(0) = 1` and `H(1) = 1, H'(1) = 0, H''(1) = 2,
//! H'''(1) = -12` the family is of order eight using four evaluations, the
//! Kung-Traub bound. [`SchemeConfig::particular`] is the concrete member with
//! `G(t) = (1 - 2t) / (1 - 3t)` and `H(t) = 4 - 8t + 7t^2 - 2t^3`.
//!
//! All function values are computed once per iteration and shared between
//! the divided differences, so a full iteration costs exactly four
//! evaluations.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::analysis::CocEstimate;
use crate::mpcore::{ulp_threshold, BigScalar, MpError, MIN_SOLVER_DIGITS};
use crate::problems::Problem;

/// Default stopping tolerance on `|f(x_{n+1})|`.
pub const DEFAULT_TOL_EXP: i32 = -50;
/// Default iteration cap; reaching it means "not convergent".
pub const DEFAULT_MAX_ITER: usize = 100;
/// Iterates beyond this magnitude are reported as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("divided difference {0} has coincident nodes")]
    DegenerateNodes(&'static str),
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
    #[error("zero derivative")]
    ZeroDerivative,
    #[error("weight function {weight} has a pole at t = {at}")]
    Pole { weight: String, at: String },
    #[error("function evaluation failed: {0}")]
    Domain(MpError),
    #[error("non-finite value while computing {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("the perturbation scale alpha must be nonzero")]
    ZeroAlpha,
    #[error("the perturbation exponent m must be at least 1")]
    ZeroExponent,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("tolerance must be positive")]
    NonPositiveTolerance,
    #[error("max_iter must be at least 1")]
    ZeroMaxIter,
    #[error("working precision {0} is below the minimum of {MIN_SOLVER_DIGITS} digits")]
    PrecisionTooLow(u32),
    #[error("newton's method needs a derivative and {0} has none")]
    MissingDerivative(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// What a weight function is required to satisfy at its expansion point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    Equals(i64),
    Finite,
}

/// `W^(order)(expansion_point)` must meet `requirement`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightCondition {
    pub order: u32,
    pub requirement: Requirement,
}

impl WeightCondition {
    pub const fn equals(order: u32, value: i64) -> Self {
        WeightCondition {
            order,
            requirement: Requirement::Equals(value),
        }
    }

    pub const fn finite(order: u32) -> Self {
        WeightCondition {
            order,
            requirement: Requirement::Finite,
        }
    }
}

impl fmt::Display for WeightCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ticks = match self.order {
            0 => String::new(),
            k @ 1..=3 => "'".repeat(k as usize),
            k => format!("^({k})"),
        };
        match self.requirement {
            Requirement::Equals(v) => write!(f, "W{ticks} = {v}"),
            Requirement::Finite => write!(f, "|W{ticks}| < inf"),
        }
    }
}

/// Conditions on `G` at 0 for eighth order.
pub const G_CONDITIONS: [WeightCondition; 3] = [
    WeightCondition::equals(0, 1),
    WeightCondition::equals(1, 1),
    WeightCondition::finite(3),
];

/// Conditions on `H` at 1 for eighth order.
pub const H_CONDITIONS: [WeightCondition; 5] = [
    WeightCondition::equals(0, 1),
    WeightCondition::equals(1, 0),
    WeightCondition::equals(2, 2),
    WeightCondition::equals(3, -12),
    WeightCondition::finite(4),
];

/// Conditions on the third-step weight of the lower-order variants, at 0.
pub const H_VARIANT_CONDITIONS: [WeightCondition; 4] = [
    WeightCondition::equals(0, 1),
    WeightCondition::equals(1, 0),
    WeightCondition::equals(2, 2),
    WeightCondition::finite(3),
];

type WeightEval = Arc<dyn Fn(&BigScalar) -> Result<BigScalar, MpError> + Send + Sync>;

/// A scalar weight function with the Taylor conditions it claims to satisfy.
#[derive(Clone)]
pub struct WeightFn {
    name: String,
    eval: WeightEval,
    expansion_point: i64,
    conditions: Vec<WeightCondition>,
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFn")
            .field("name", &self.name)
            .field("expansion_point", &self.expansion_point)
            .field("conditions", &self.conditions)
            .finish()
    }
}

impl WeightFn {
    pub fn new<F>(name: &str, expansion_point: i64, conditions: &[WeightCondition], eval: F) -> Self
    where
        F: Fn(&BigScalar) -> Result<BigScalar, MpError> + Send + Sync + 'static,
    {
        WeightFn {
            name: name.to_string(),
            eval: Arc::new(eval),
            expansion_point,
            conditions: conditions.to_vec(),
        }
    }

    /// `G(t) = (1 - 2t) / (1 - 3t)`.
    pub fn g_particular() -> Self {
        WeightFn::new("(1-2t)/(1-3t)", 0, &G_CONDITIONS, g_particular)
    }

    /// `H(t) = 4 - 8t + 7t^2 - 2t^3`.
    pub fn h_particular() -> Self {
        WeightFn::new("4-8t+7t^2-2t^3", 1, &H_CONDITIONS, |t| Ok(h_particular(t)))
    }

    /// `H(t) = 1 + t^2`, anchored at 0, for the fifth/seventh-order variants.
    pub fn h_variant() -> Self {
        WeightFn::new("1+t^2", 0, &H_VARIANT_CONDITIONS, |t| {
            Ok(&BigScalar::one(t.digits()) + &t.square())
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn expansion_point(&self) -> i64 {
        self.expansion_point
    }

    pub fn conditions(&self) -> &[WeightCondition] {
        &self.conditions
    }

    pub fn eval(&self, t: &BigScalar) -> Result<BigScalar, MpError> {
        (self.eval)(t)
    }

    /// Returns a copy whose values are shifted by `delta * (t - t0)^order / order!`,
    /// i.e. the `order`-th derivative at the expansion point moves by `delta`.
    pub fn perturbed(&self, order: u32, delta: f64) -> Self {
        let inner = self.eval.clone();
        let t0 = self.expansion_point;
        let factorial: i64 = (1..=i64::from(order)).product();
        WeightFn {
            name: format!("{}+perturbed[{order}]", self.name),
            eval: Arc::new(move |t| {
                let d = t.digits();
                let shift = (t - &BigScalar::from_i64(t0, d)).powi(order as i32)?;
                let bump = (&BigScalar::from_f64(delta, d) * &shift)
                    .checked_div(&BigScalar::from_i64(factorial, d))?;
                Ok(&inner(t)? + &bump)
            }),
            expansion_point: self.expansion_point,
            conditions: self.conditions.clone(),
        }
    }
}

/// `(1 - 2t) / (1 - 3t)`; a division-by-zero error at the pole `t = 1/3`.
pub fn g_particular(t: &BigScalar) -> Result<BigScalar, MpError> {
    let d = t.digits();
    let one = BigScalar::one(d);
    let num = &one - &(&BigScalar::from_i64(2, d) * t);
    let den = &one - &(&BigScalar::from_i64(3, d) * t);
    num.checked_div(&den)
}

/// `4 - 8t + 7t^2 - 2t^3`, evaluated by Horner's rule.
pub fn h_particular(t: &BigScalar) -> BigScalar {
    let d = t.digits();
    let mut acc = BigScalar::from_i64(-2, d);
    for c in [7, -8, 4] {
        acc = &(&acc * t) + &BigScalar::from_i64(c, d);
    }
    acc
}

/// Argument fed to the third-step weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThirdStepArgument {
    /// `f[w, y] / f[w, x]`, for weights anchored at 1.
    SlopeRatio,
    /// `f(y) / f(x)`, for weights anchored at 0.
    ResidualRatio,
}

/// Parameters of the three-step family.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub alpha: BigScalar,
    pub m: u32,
    pub g: WeightFn,
    pub h: WeightFn,
    pub third_step: ThirdStepArgument,
}

impl SchemeConfig {
    /// The concrete eighth-order method: `alpha = 1`, `m = 3`, particular weights.
    pub fn particular() -> Self {
        SchemeConfig {
            alpha: BigScalar::one(MIN_SOLVER_DIGITS),
            m: 3,
            g: WeightFn::g_particular(),
            h: WeightFn::h_particular(),
            third_step: ThirdStepArgument::SlopeRatio,
        }
    }

    /// Lower-order construction: perturbation `x + f(x)^m`, third step
    /// weighted by `1 + t1^2`. Fifth order for `m = 1`, seventh for `m = 2`.
    pub fn variant(m: u32) -> Self {
        SchemeConfig {
            alpha: BigScalar::one(MIN_SOLVER_DIGITS),
            m,
            g: WeightFn::g_particular(),
            h: WeightFn::h_variant(),
            third_step: ThirdStepArgument::ResidualRatio,
        }
    }

    pub fn with_alpha(mut self, alpha: BigScalar) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_m(mut self, m: u32) -> Self {
        self.m = m;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.alpha.is_zero() {
            return Err(ConfigError::ZeroAlpha);
        }
        if self.m == 0 {
            return Err(ConfigError::ZeroExponent);
        }
        Ok(())
    }
}

/// Result of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_x: BigScalar,
    pub evals_used: u32,
    /// Set when the step stopped early because the named divided difference
    /// would have had coincident nodes; `next_x` is then the best node seen.
    pub degenerate: Option<&'static str>,
}

/// An abscissa together with its function value.
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub x: BigScalar,
    pub fx: BigScalar,
}

impl Node {
    pub fn eval(f: &mut Problem, x: BigScalar, label: &'static str) -> Result<Node, StepError> {
        let fx = f.eval(&x).map_err(StepError::Domain)?;
        if !fx.is_finite() {
            return Err(StepError::NonFinite(label));
        }
        Ok(Node { x, fx })
    }
}

fn coincident(a: &BigScalar, b: &BigScalar) -> bool {
    let scale = if a.abs() >= b.abs() { a } else { b };
    (a - b).abs() <= ulp_threshold(scale)
}

/// `(f(a) - f(b)) / (a - b)` from cached values; symmetric in its arguments.
pub fn slope(a: &Node, b: &Node, label: &'static str) -> Result<BigScalar, StepError> {
    if coincident(&a.x, &b.x) {
        return Err(StepError::DegenerateNodes(label));
    }
    (&a.fx - &b.fx)
        .checked_div(&(&a.x - &b.x))
        .map_err(|_| StepError::DegenerateNodes(label))
}

/// First-order divided difference `f[a, b]`, evaluating `f` at both nodes.
pub fn divided_difference(
    f: &mut Problem,
    a: &BigScalar,
    b: &BigScalar,
) -> Result<BigScalar, StepError> {
    if coincident(a, b) {
        return Err(StepError::DegenerateNodes("f[a,b]"));
    }
    let na = Node::eval(f, a.clone(), "f(a)")?;
    let nb = Node::eval(f, b.clone(), "f(b)")?;
    slope(&na, &nb, "f[a,b]")
}

fn nonzero(v: BigScalar, label: &'static str) -> Result<BigScalar, StepError> {
    if v.is_zero() {
        Err(StepError::ZeroDenominator(label))
    } else {
        Ok(v)
    }
}

fn quotient(num: &BigScalar, den: &BigScalar, label: &'static str) -> Result<BigScalar, StepError> {
    num.checked_div(den)
        .map_err(|_| StepError::ZeroDenominator(label))
}

fn best_of<'a>(nodes: &[&'a Node]) -> &'a Node {
    nodes
        .iter()
        .copied()
        .min_by(|a, b| {
            a.fx.abs()
                .partial_cmp(&b.fx.abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .expect("at least one node")
}

fn flagged(nodes: &[&Node], label: &'static str, evals_used: u32) -> StepOutcome {
    StepOutcome {
        next_x: best_of(nodes).x.clone(),
        evals_used,
        degenerate: Some(label),
    }
}

fn weight(w: &WeightFn, t: &BigScalar) -> Result<BigScalar, StepError> {
    let v = w.eval(t).map_err(|_| StepError::Pole {
        weight: w.name().to_string(),
        at: t.to_sci_string_with(20),
    })?;
    if !v.is_finite() {
        return Err(StepError::Pole {
            weight: w.name().to_string(),
            at: t.to_sci_string_with(20),
        });
    }
    Ok(v)
}

/// Newton's step `x - f(x) / f'(x)` with `f(x)` already known.
pub fn newton_step_with(fprime: &mut Problem, x: &Node) -> Result<StepOutcome, StepError> {
    let dfx = fprime.eval(&x.x).map_err(StepError::Domain)?;
    if dfx.is_zero() {
        return Err(StepError::ZeroDerivative);
    }
    let next_x = &x.x - &quotient(&x.fx, &dfx, "f'(x)")?;
    Ok(StepOutcome {
        next_x,
        evals_used: 2,
        degenerate: None,
    })
}

pub fn newton_step(
    f: &mut Problem,
    fprime: &mut Problem,
    x: &BigScalar,
) -> Result<StepOutcome, StepError> {
    let node = Node::eval(f, x.clone(), "f(x)")?;
    newton_step_with(fprime, &node)
}

/// Steffensen's step `x - f(x) / f[x, x + f(x)]` with `f(x)` already known.
pub fn steffensen_step_with(f: &mut Problem, x: &Node) -> Result<StepOutcome, StepError> {
    let w = &x.x + &x.fx;
    if coincident(&w, &x.x) {
        return Ok(flagged(&[x], "f[x,w]", 1));
    }
    let wn = Node::eval(f, w, "f(w)")?;
    let d = nonzero(slope(x, &wn, "f[x,w]")?, "f[x,w]")?;
    Ok(StepOutcome {
        next_x: &x.x - &quotient(&x.fx, &d, "f[x,w]")?,
        evals_used: 2,
        degenerate: None,
    })
}

pub fn steffensen_step(f: &mut Problem, x: &BigScalar) -> Result<StepOutcome, StepError> {
    let node = Node::eval(f, x.clone(), "f(x)")?;
    steffensen_step_with(f, &node)
}

/// One iteration of the three-step family with `f(x)` already known.
pub fn multipoint_step_with(
    f: &mut Problem,
    x: &Node,
    cfg: &SchemeConfig,
) -> Result<StepOutcome, StepError> {
    let m = i32::try_from(cfg.m).unwrap_or(i32::MAX);
    let power = x.fx.powi(m).map_err(StepError::Domain)?;
    let z = &x.x + &(&cfg.alpha * &power);
    if !z.is_finite() {
        return Err(StepError::NonFinite("z"));
    }
    if coincident(&z, &x.x) {
        return Ok(flagged(&[x], "f[z,x]", 1));
    }
    let zn = Node::eval(f, z, "f(z)")?;
    let d_zx = nonzero(slope(&zn, x, "f[z,x]")?, "f[z,x]")?;
    let y = &x.x - &quotient(&x.fx, &d_zx, "f[z,x]")?;
    if coincident(&y, &x.x) {
        return Ok(flagged(&[x, &zn], "f[x,y]", 2));
    }

    let yn = Node::eval(f, y, "f(y)")?;
    if yn.fx.is_zero() {
        // w = y exactly, so f[w, y] collapses; y is a root
        return Ok(flagged(&[&yn], "f[w,y]", 3));
    }
    let t1 = quotient(&yn.fx, &x.fx, "t1")?;
    let g = weight(&cfg.g, &t1)?;
    let d_xy = nonzero(slope(x, &yn, "f[x,y]")?, "f[x,y]")?;
    let w = &yn.x - &(&g * &quotient(&yn.fx, &d_xy, "f[x,y]")?);
    if !w.is_finite() {
        return Err(StepError::NonFinite("w"));
    }
    if coincident(&w, &yn.x) {
        return Ok(flagged(&[x, &yn], "f[w,y]", 3));
    }
    if coincident(&w, &x.x) {
        return Ok(flagged(&[x, &yn], "f[w,x]", 3));
    }

    let wn = Node::eval(f, w, "f(w)")?;
    if wn.fx.is_zero() {
        return Ok(StepOutcome {
            next_x: wn.x,
            evals_used: 4,
            degenerate: None,
        });
    }
    let d_wy = nonzero(slope(&wn, &yn, "f[w,y]")?, "f[w,y]")?;
    let t = match cfg.third_step {
        ThirdStepArgument::SlopeRatio => {
            let d_wx = slope(&wn, x, "f[w,x]")?;
            quotient(&d_wy, &d_wx, "f[w,x]")?
        }
        ThirdStepArgument::ResidualRatio => t1,
    };
    let h = weight(&cfg.h, &t)?;
    let next_x = &wn.x - &(&h * &quotient(&wn.fx, &d_wy, "f[w,y]")?);
    if !next_x.is_finite() {
        return Err(StepError::NonFinite("x_next"));
    }
    Ok(StepOutcome {
        next_x,
        evals_used: 4,
        degenerate: None,
    })
}

/// One iteration of the three-step family from a bare abscissa.
pub fn om8_step(
    f: &mut Problem,
    x: &BigScalar,
    cfg: &SchemeConfig,
) -> Result<StepOutcome, StepError> {
    let node = Node::eval(f, x.clone(), "f(x)")?;
    multipoint_step_with(f, &node, cfg)
}

/// The iteration to run.
#[derive(Debug, Clone)]
pub enum Method {
    Newton,
    Steffensen,
    Multipoint(SchemeConfig),
}

impl Method {
    /// The particular eighth-order method.
    pub fn om8() -> Self {
        Method::Multipoint(SchemeConfig::particular())
    }

    /// The lower-order construction with perturbation exponent `m`.
    pub fn variant(m: u32) -> Self {
        Method::Multipoint(SchemeConfig::variant(m))
    }

    /// Function evaluations per full iteration.
    pub fn evals_per_iteration(&self) -> u32 {
        match self {
            Method::Newton | Method::Steffensen => 2,
            Method::Multipoint(_) => 4,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Method::Newton => "newton".into(),
            Method::Steffensen => "steffensen".into(),
            Method::Multipoint(cfg) => match cfg.third_step {
                ThirdStepArgument::SlopeRatio => format!("om8(m={})", cfg.m),
                ThirdStepArgument::ResidualRatio => format!("variant(m={})", cfg.m),
            },
        }
    }
}

/// Terminal status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    Divergent,
    NotConverged,
    Indeterminate,
}

impl Status {
    /// Short legend code: value, `DIV.`, `NC` or `I`.
    pub fn code(self) -> &'static str {
        match self {
            Status::Converged => "OK",
            Status::Divergent => "DIV.",
            Status::NotConverged => "NC",
            Status::Indeterminate => "I",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "Converged",
            Status::Divergent => "Divergent",
            Status::NotConverged => "NotConverged",
            Status::Indeterminate => "Indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub x: BigScalar,
    /// `|f(x)|`
    pub residual: BigScalar,
    /// Cumulative evaluations charged by the method up to this iterate.
    pub evaluations: u64,
}

/// `x_0, x_1, ...` with their residuals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterRecord>,
}

impl IterationTrace {
    pub fn from_iterates(xs: Vec<BigScalar>) -> Self {
        IterationTrace {
            records: xs
                .into_iter()
                .map(|x| IterRecord {
                    residual: BigScalar::zero(x.digits()),
                    x,
                    evaluations: 0,
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iterates(&self) -> impl Iterator<Item = &BigScalar> {
        self.records.iter().map(|r| &r.x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: Status,
    /// Iterations performed (IT).
    pub iterations: usize,
    /// Total evaluations charged by the method (TNE).
    pub evaluations: u64,
    /// Last iterate.
    pub x: BigScalar,
    /// `|f(x)|` at the last iterate, `inf` when it could not be evaluated.
    pub residual: BigScalar,
    pub note: Option<String>,
    pub coc: Option<CocEstimate>,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: BigScalar,
    pub max_iter: usize,
    pub divergence_bound: f64,
}

impl SolveOptions {
    /// `tol = 1e-50`, `max_iter = 100`, divergence beyond `|x| > 1e10`.
    pub fn new(digits: u32) -> Self {
        SolveOptions {
            tol: BigScalar::pow10(DEFAULT_TOL_EXP, digits),
            max_iter: DEFAULT_MAX_ITER,
            divergence_bound: DIVERGENCE_BOUND,
        }
    }

    pub fn with_tol(mut self, tol: BigScalar) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub report: SolveReport,
    pub trace: IterationTrace,
}

struct Run {
    trace: IterationTrace,
    evaluations: u64,
    digits: u32,
}

impl Run {
    fn finish(
        self,
        status: Status,
        iterations: usize,
        x: BigScalar,
        residual: Option<BigScalar>,
        note: Option<String>,
    ) -> Solution {
        Solution {
            report: SolveReport {
                status,
                iterations,
                evaluations: self.evaluations,
                x,
                residual: residual.unwrap_or_else(|| crate::mpcore::infinity(self.digits)),
                note,
                coc: None,
            },
            trace: self.trace,
        }
    }
}

fn classify(err: &StepError) -> Status {
    match err {
        StepError::Domain(_) => Status::Indeterminate,
        StepError::NonFinite(_) => Status::Divergent,
        StepError::DegenerateNodes(_)
        | StepError::ZeroDenominator(_)
        | StepError::ZeroDerivative
        | StepError::Pole { .. } => Status::NotConverged,
    }
}

/// Iterates `method` from `x0` until `|f(x_{n+1})| < tol`.
///
/// Every failure mode is folded into [`SolveReport::status`]: domain errors
/// give `Indeterminate`, overflow or `|x| > divergence_bound` give
/// `Divergent`, and the iteration cap, poles, zero denominators and
/// unconverged degenerate nodes give `NotConverged`. The `Err` variant is
/// reserved for invalid arguments.
pub fn solve(
    f: &mut Problem,
    x0: &BigScalar,
    method: &Method,
    opts: &SolveOptions,
) -> Result<Solution, SolveError> {
    if !(opts.tol > 0.0) {
        return Err(SolveError::NonPositiveTolerance);
    }
    if opts.max_iter == 0 {
        return Err(SolveError::ZeroMaxIter);
    }
    let digits = x0.digits();
    if digits < MIN_SOLVER_DIGITS {
        return Err(SolveError::PrecisionTooLow(digits));
    }
    let mut fprime = match method {
        Method::Newton => Some(
            f.derivative()
                .ok_or_else(|| SolveError::MissingDerivative(f.name().to_string()))?,
        ),
        Method::Multipoint(cfg) => {
            cfg.validate()?;
            None
        }
        Method::Steffensen => None,
    };

    let mut run = Run {
        trace: IterationTrace::default(),
        evaluations: 0,
        digits,
    };
    let mut x = x0.clone();
    let fx = match f.eval(&x) {
        Ok(v) => v,
        Err(e) => return Ok(run.finish(Status::Indeterminate, 0, x, None, Some(e.to_string()))),
    };
    if !fx.is_finite() {
        return Ok(run.finish(
            Status::Divergent,
            0,
            x,
            None,
            Some("f(x0) overflowed".into()),
        ));
    }
    let mut node = Node { x: x.clone(), fx };
    run.trace.records.push(IterRecord {
        x: x.clone(),
        residual: node.fx.abs(),
        evaluations: 0,
    });
    if node.fx.abs() < opts.tol {
        let r = node.fx.abs();
        return Ok(run.finish(Status::Converged, 0, x, Some(r), None));
    }

    for it in 1..=opts.max_iter {
        let step = match method {
            Method::Newton => {
                newton_step_with(fprime.as_mut().expect("derivative prepared"), &node)
            }
            Method::Steffensen => steffensen_step_with(f, &node),
            Method::Multipoint(cfg) => multipoint_step_with(f, &node, cfg),
        };
        let outcome = match step {
            Ok(o) => o,
            Err(e) => {
                let r = node.fx.abs();
                return Ok(run.finish(classify(&e), it - 1, x, Some(r), Some(e.to_string())));
            }
        };
        run.evaluations += u64::from(outcome.evals_used);
        let progressed = outcome.next_x != node.x;
        x = outcome.next_x;

        if !x.is_finite() || x.abs() > opts.divergence_bound {
            let note = format!("|x| exceeded {:e}", opts.divergence_bound);
            return Ok(run.finish(Status::Divergent, it, x, None, Some(note)));
        }
        if progressed {
            node = match f.eval(&x) {
                Ok(v) if v.is_finite() => Node {
                    x: x.clone(),
                    fx: v,
                },
                Ok(_) => {
                    let note = Some("f overflowed".to_string());
                    return Ok(run.finish(Status::Divergent, it, x, None, note));
                }
                Err(e) => {
                    return Ok(run.finish(Status::Indeterminate, it, x, None, Some(e.to_string())))
                }
            };
            run.trace.records.push(IterRecord {
                x: x.clone(),
                residual: node.fx.abs(),
                evaluations: run.evaluations,
            });
        }
        let residual = node.fx.abs();
        let done = if progressed { it } else { it - 1 };
        if residual < opts.tol {
            return Ok(run.finish(Status::Converged, done, x, Some(residual), None));
        }
        if let Some(which) = outcome.degenerate {
            let note = format!("degenerate divided difference {which} before reaching tolerance");
            return Ok(run.finish(Status::NotConverged, done, x, Some(residual), Some(note)));
        }
    }
    let r = node.fx.abs();
    let note = format!("no convergence within {} iterations", opts.max_iter);
    Ok(run.finish(Status::NotConverged, opts.max_iter, x, Some(r), Some(note)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(s: &str) -> BigScalar {
        BigScalar::parse_ratio(s, 100).unwrap()
    }

    fn expr(src: &str) -> Problem {
        Problem::from_expr("t", src).unwrap()
    }

    fn close(a: &BigScalar, b: &BigScalar, tol: &str) -> bool {
        (a - b).abs() < big(tol)
    }

    #[test]
    fn divided_difference_examples() {
        let mut id = expr("x");
        assert_eq!(
            divided_difference(&mut id, &big("2"), &big("5")).unwrap(),
            big("1")
        );
        let mut sq = expr("x^2");
        assert_eq!(
            divided_difference(&mut sq, &big("1"), &big("3")).unwrap(),
            big("4")
        );
        assert_eq!(sq.evaluations(), 2);
        assert!(matches!(
            divided_difference(&mut sq, &big("1"), &big("1")),
            Err(StepError::DegenerateNodes(_))
        ));
    }

    #[test]
    fn divided_difference_propagates_domain_errors() {
        let mut lg = expr("log(x)");
        assert!(matches!(
            divided_difference(&mut lg, &big("-1"), &big("2")),
            Err(StepError::Domain(_))
        ));
    }

    #[test]
    fn newton_examples() {
        let mut f = expr("x^2 - 1");
        let mut df = f.derivative().unwrap();
        let out = newton_step(&mut f, &mut df, &big("2")).unwrap();
        assert_eq!(out.next_x, big("1.25"));
        assert_eq!(out.evals_used, 2);

        let mut f = expr("x");
        let mut df = f.derivative().unwrap();
        assert!(newton_step(&mut f, &mut df, &big("7"))
            .unwrap()
            .next_x
            .is_zero());

        let mut f = expr("x^2 + 1");
        let mut df = f.derivative().unwrap();
        assert_eq!(
            newton_step(&mut f, &mut df, &big("0")),
            Err(StepError::ZeroDerivative)
        );
    }

    #[test]
    fn newton_decreases_f6_residual() {
        let mut f = crate::problems::by_name("f6").unwrap();
        let mut df = f.derivative().unwrap();
        let x0 = big("1.9");
        let r0 = f.eval(&x0).unwrap().abs();
        let x1 = newton_step(&mut f, &mut df, &x0).unwrap().next_x;
        let r1 = f.eval(&x1).unwrap().abs();
        assert!(r1 < r0);
    }

    #[test]
    fn steffensen_examples() {
        let mut f = expr("x");
        let out = steffensen_step(&mut f, &big("0.5")).unwrap();
        assert!(out.next_x.is_zero());
        assert_eq!(out.evals_used, 2);

        let mut f = expr("x^2 - 4");
        let out = steffensen_step(&mut f, &big("2")).unwrap();
        assert_eq!(out.next_x, big("2"));
        assert_eq!(out.degenerate, Some("f[x,w]"));
    }

    #[test]
    fn om8_on_a_linear_hits_the_root_in_the_first_substep() {
        let mut f = expr("x");
        let out = om8_step(&mut f, &big("0.25"), &SchemeConfig::particular()).unwrap();
        assert!(out.next_x.is_zero());
        assert!(out.degenerate.is_some());
        assert_eq!(out.evals_used, 3);
    }

    #[test]
    fn om8_uses_four_evaluations() {
        let mut f = crate::problems::by_name("f1").unwrap();
        let out = om8_step(&mut f, &big("1.7"), &SchemeConfig::particular()).unwrap();
        assert_eq!(out.evals_used, 4);
        assert_eq!(f.evaluations(), 4);
        assert!(out.degenerate.is_none());
    }

    #[test]
    fn g_particular_values() {
        assert_eq!(g_particular(&big("0")).unwrap(), big("1"));
        assert_eq!(g_particular(&big("-1")).unwrap(), big("0.75"));
        assert!(close(
            &g_particular(&big("0.1")).unwrap(),
            &big("8/7"),
            "1e-95"
        ));
        // the exact pole is not representable in binary, but the zero
        // denominator path is still guarded
        let pole = WeightFn::new("pole", 0, &[], |t| {
            BigScalar::one(t.digits()).checked_div(&(t - t))
        });
        assert!(matches!(
            weight(&pole, &big("1")),
            Err(StepError::Pole { .. })
        ));
    }

    #[test]
    fn h_particular_values() {
        assert_eq!(h_particular(&big("1")), big("1"));
        assert_eq!(h_particular(&big("0")), big("4"));
        assert!(h_particular(&big("2")).is_zero());
    }

    #[test]
    fn solve_linear_in_one_iteration() {
        for method in [
            Method::Newton,
            Method::Steffensen,
            Method::om8(),
            Method::variant(1),
        ] {
            let mut f = expr("x - 5");
            let sol = solve(&mut f, &big("100"), &method, &SolveOptions::new(100)).unwrap();
            assert_eq!(sol.report.status, Status::Converged, "{}", method.name());
            assert_eq!(sol.report.iterations, 1, "{}", method.name());
            assert_eq!(sol.report.x, big("5"));
        }
    }

    #[test]
    fn solve_at_a_root_needs_no_iterations() {
        let mut f = expr("x^2 - 4");
        let sol = solve(
            &mut f,
            &big("2"),
            &Method::Steffensen,
            &SolveOptions::new(100),
        )
        .unwrap();
        assert_eq!(sol.report.status, Status::Converged);
        assert_eq!(sol.report.iterations, 0);
    }

    #[test]
    fn solve_rejects_bad_arguments() {
        let mut f = expr("x");
        let opts = SolveOptions::new(100).with_tol(big("0"));
        assert_eq!(
            solve(&mut f, &big("1"), &Method::om8(), &opts).unwrap_err(),
            SolveError::NonPositiveTolerance
        );
        let opts = SolveOptions::new(100).with_max_iter(0);
        assert_eq!(
            solve(&mut f, &big("1"), &Method::om8(), &opts).unwrap_err(),
            SolveError::ZeroMaxIter
        );
        let low = BigScalar::one(20);
        assert!(matches!(
            solve(&mut f, &low, &Method::om8(), &SolveOptions::new(20)),
            Err(SolveError::PrecisionTooLow(20))
        ));
        let cfg = SchemeConfig::particular().with_alpha(big("0"));
        assert_eq!(
            solve(
                &mut f,
                &big("1"),
                &Method::Multipoint(cfg),
                &SolveOptions::new(100)
            )
            .unwrap_err(),
            SolveError::Config(ConfigError::ZeroAlpha)
        );
        let mut native = Problem::from_fn("n", |x| Ok(x.clone()));
        assert!(matches!(
            solve(
                &mut native,
                &big("1"),
                &Method::Newton,
                &SolveOptions::new(100)
            ),
            Err(SolveError::MissingDerivative(_))
        ));
    }

    #[test]
    fn domain_failure_is_indeterminate() {
        let mut f = expr("log(x) - 3");
        let sol = solve(&mut f, &big("-1"), &Method::om8(), &SolveOptions::new(100)).unwrap();
        assert_eq!(sol.report.status, Status::Indeterminate);
    }

    #[test]
    fn runaway_iterates_are_divergent() {
        // x/(1+x^2) flattens out; Newton is pushed outwards geometrically
        let mut f = expr("x/(1+x^2)");
        let sol = solve(&mut f, &big("2"), &Method::Newton, &SolveOptions::new(100)).unwrap();
        assert_eq!(sol.report.status, Status::Divergent);
    }

    #[test]
    fn iteration_cap_is_not_convergent() {
        let mut f = expr("x^2 + 1");
        let opts = SolveOptions::new(100).with_max_iter(5);
        let sol = solve(&mut f, &big("0.5"), &Method::Steffensen, &opts).unwrap();
        assert_eq!(sol.report.status, Status::NotConverged);
    }

    #[test]
    fn trace_records_every_iterate() {
        let mut f = crate::problems::by_name("f1").unwrap();
        let sol = solve(&mut f, &big("1.7"), &Method::om8(), &SolveOptions::new(100)).unwrap();
        assert_eq!(sol.trace.len(), sol.report.iterations + 1);
        let evals: Vec<u64> = sol.trace.records.iter().map(|r| r.evaluations).collect();
        assert_eq!(
            evals,
            (0..=sol.report.iterations as u64)
                .map(|k| 4 * k)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn perturbed_weight_moves_one_derivative() {
        let h = WeightFn::h_particular().perturbed(2, 1e-3);
        let t = big("1");
        assert_eq!(h.eval(&t).unwrap(), big("1"));
        let t = big("1.5");
        let expected = &h_particular(&t) + &(&BigScalar::from_f64(1e-3, 100) * &big("0.125"));
        assert!(close(&h.eval(&t).unwrap(), &expected, "1e-90"));
    }

    #[test]
    fn condition_display() {
        assert_eq!(H_CONDITIONS[3].to_string(), "W''' = -12");
        assert_eq!(H_CONDITIONS[4].to_string(), "|W^(4)| < inf");
    }
}

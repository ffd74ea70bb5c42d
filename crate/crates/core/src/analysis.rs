//! Convergence diagnostics.
//!
//! * [`coc`] estimates the order of convergence from an iteration trace,
//!   `rho = ln(e_{n+1} / e_n) / ln(e_n / e_{n-1})`.
//! * [`efficiency_index`] is `p^(1/n)` for order `p` and `n` evaluations.
//! * [`check_weight_conditions`] measures derivatives of a weight function at
//!   its expansion point with high-precision central differences.
//! * [`error_constant_probe`] compares the observed `e_{n+1} / e_n^8` with the
//!   closed-form constant of the particular eighth-order method.

use thiserror::Error;

use crate::methods::{IterationTrace, Requirement, WeightCondition, WeightFn};
use crate::mpcore::{ulp_threshold, BigScalar, MpError};
use crate::problems::Problem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("trace too short: need {needed} usable iterates, have {got}")]
    InsufficientTrace { needed: usize, got: usize },
    #[error("errors fall below the resolution of the working precision")]
    NumericalNoise,
    #[error("evaluation failed on the difference stencil: {0}")]
    EvaluationFailure(MpError),
    #[error("{0}")]
    InvalidArgument(String),
}

impl From<MpError> for AnalysisError {
    fn from(e: MpError) -> Self {
        AnalysisError::EvaluationFailure(e)
    }
}

/// Computational order of convergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CocEstimate {
    /// Estimate from the last admissible triple.
    pub rho: f64,
    /// Number of admissible triples found in the trace.
    pub triples_used: usize,
    /// `true` when successive differences stood in for the unknown root.
    pub residual_based: bool,
}

/// `log10` of the error sequence, `None` where the error is unresolvable.
fn log_errors(trace: &IterationTrace, root: Option<&BigScalar>) -> Vec<Option<f64>> {
    let xs: Vec<&BigScalar> = trace.iterates().collect();
    match root {
        Some(r) => {
            let floor = ulp_threshold(r);
            xs.iter()
                .map(|x| {
                    let e = (*x - r).abs();
                    (e > floor).then(|| e.log10_abs())
                })
                .collect()
        }
        None => xs
            .windows(2)
            .map(|w| {
                let e = (w[1] - w[0]).abs();
                (e > ulp_threshold(w[1])).then(|| e.log10_abs())
            })
            .collect(),
    }
}

/// Order estimates from every admissible consecutive triple of errors.
pub fn coc_history(trace: &IterationTrace, root: Option<&BigScalar>) -> Vec<f64> {
    log_errors(trace, root)
        .windows(3)
        .filter_map(|w| match (w[0], w[1], w[2]) {
            (Some(a), Some(b), Some(c)) if b != a => Some((c - b) / (b - a)),
            _ => None,
        })
        .filter(|rho| rho.is_finite())
        .collect()
}

/// Computational order of convergence from the last admissible triple.
///
/// With `root = None` the errors are replaced by `|x_{n+1} - x_n|`.
pub fn coc(trace: &IterationTrace, root: Option<&BigScalar>) -> Result<CocEstimate, AnalysisError> {
    const NEEDED: usize = 4;
    if trace.len() < NEEDED {
        return Err(AnalysisError::InsufficientTrace {
            needed: NEEDED,
            got: trace.len(),
        });
    }
    let history = coc_history(trace, root);
    let rho = *history.last().ok_or(AnalysisError::InsufficientTrace {
        needed: NEEDED,
        got: log_errors(trace, root)
            .iter()
            .filter(|e| e.is_some())
            .count(),
    })?;
    Ok(CocEstimate {
        rho,
        triples_used: history.len(),
        residual_based: root.is_none(),
    })
}

/// `order^(1/evals)`.
pub fn efficiency_index(order: f64, evals: u32) -> f64 {
    order.powf(1.0 / f64::from(evals))
}

/// Derivatives of orders `0..=max_order` (at most 4) by central differences
/// with step `h`. Truncation error is `O(h^2)` for every order.
pub fn central_derivatives<F>(
    mut f: F,
    at: &BigScalar,
    h: &BigScalar,
    max_order: usize,
) -> Result<Vec<BigScalar>, MpError>
where
    F: FnMut(&BigScalar) -> Result<BigScalar, MpError>,
{
    assert!(max_order <= 4, "stencils exist up to the fourth derivative");
    let d = at.digits();
    let two_h = &BigScalar::from_i64(2, d) * h;
    let f0 = f(at)?;
    let mut out = vec![f0.clone()];
    if max_order == 0 {
        return Ok(out);
    }
    let fp1 = f(&(at + h))?;
    let fm1 = f(&(at - h))?;
    out.push((&fp1 - &fm1).checked_div(&two_h)?);
    if max_order >= 2 {
        let num = &(&fp1 + &fm1) - &(&BigScalar::from_i64(2, d) * &f0);
        out.push(num.checked_div(&h.square())?);
    }
    if max_order >= 3 {
        let fp2 = f(&(at + &two_h))?;
        let fm2 = f(&(at - &two_h))?;
        let two = BigScalar::from_i64(2, d);
        let third = &(&(&fp2 - &fm2) - &(&two * &fp1)) + &(&two * &fm1);
        out.push(third.checked_div(&(&two * &h.powi(3)?))?);
        if max_order >= 4 {
            let four = BigScalar::from_i64(4, d);
            let six = BigScalar::from_i64(6, d);
            let fourth = &(&(&fp2 + &fm2) - &(&four * &(&fp1 + &fm1))) + &(&six * &f0);
            out.push(fourth.checked_div(&h.powi(4)?)?);
        }
    }
    Ok(out)
}

/// One declared condition with the value measured for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub condition: WeightCondition,
    pub measured: BigScalar,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightCheck {
    pub weight: String,
    pub expansion_point: i64,
    /// Measured derivatives of orders 0 through 4.
    pub derivatives: Vec<BigScalar>,
    pub checks: Vec<ConditionCheck>,
    pub tolerance: BigScalar,
}

impl WeightCheck {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Measures derivatives 0..4 of `w` at its expansion point and checks each
/// declared condition.
///
/// The stencil step is `10^(-digits/4)` and the tolerance `10^(-digits/8)`.
/// Arithmetic runs at `2 * digits` so that the fourth-derivative stencil,
/// which divides by `h^4 = 10^-digits`, keeps `digits` correct figures.
pub fn check_weight_conditions(w: &WeightFn, digits: u32) -> Result<WeightCheck, AnalysisError> {
    if digits < 128 {
        return Err(AnalysisError::InvalidArgument(format!(
            "weight checks need at least 128 digits, got {digits}"
        )));
    }
    let work = 2 * digits;
    let step_exp = -i32::try_from(digits / 4).unwrap_or(i32::MAX);
    let tol_exp = -i32::try_from(digits / 8).unwrap_or(i32::MAX);
    let h = BigScalar::pow10(step_exp, work);
    let tolerance = BigScalar::pow10(tol_exp, work);
    let at = BigScalar::from_i64(w.expansion_point(), work);
    let derivatives = central_derivatives(|t| w.eval(t), &at, &h, 4)?;
    let checks = w
        .conditions()
        .iter()
        .map(|c| {
            let measured = derivatives[c.order as usize].clone();
            let pass = match c.requirement {
                Requirement::Equals(v) => {
                    (&measured - &BigScalar::from_i64(v, work)).abs() <= tolerance
                }
                Requirement::Finite => measured.is_finite(),
            };
            ConditionCheck {
                condition: *c,
                measured,
                pass,
            }
        })
        .collect();
    Ok(WeightCheck {
        weight: w.name().to_string(),
        expansion_point: w.expansion_point(),
        derivatives,
        checks,
        tolerance,
    })
}

/// Observed against predicted asymptotic error constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorConstantProbe {
    pub fprime_alpha: BigScalar,
    /// `f^(k)(root) / (k! f'(root))` for `k = 2, 3, 4`.
    pub c2: BigScalar,
    pub c3: BigScalar,
    pub c4: BigScalar,
    /// `-c2 c3 (-c3^2 + c2 (f'^3 c2 + 4 c2^3 + c4))`
    pub predicted_c: BigScalar,
    /// `e_{n+1} / e_n^8` for the last resolvable pair.
    pub observed_ratio: BigScalar,
    /// The same ratio for every resolvable pair, in trace order.
    pub ratios: Vec<BigScalar>,
}

/// Stencil step used for the Taylor coefficients at the root.
pub const PROBE_STEP_EXP: i32 = -50;

/// `(f'(root), [c2, c3, c4])` from central differences with step `10^step_exp`.
pub fn taylor_coefficients(
    f: &mut Problem,
    root: &BigScalar,
    step_exp: i32,
) -> Result<(BigScalar, [BigScalar; 3]), AnalysisError> {
    let d = root.digits();
    let h = BigScalar::pow10(step_exp, d);
    let derivs = central_derivatives(|x| f.eval(x), root, &h, 4)?;
    let fp = derivs[1].clone();
    let c = |k: usize, fact: i64| -> Result<BigScalar, AnalysisError> {
        Ok(derivs[k].checked_div(&(&BigScalar::from_i64(fact, d) * &fp))?)
    };
    Ok((fp.clone(), [c(2, 2)?, c(3, 6)?, c(4, 24)?]))
}

/// Closed-form error constant of the particular eighth-order method.
pub fn predicted_constant(
    fp: &BigScalar,
    c2: &BigScalar,
    c3: &BigScalar,
    c4: &BigScalar,
) -> BigScalar {
    let d = c2.digits();
    let fp3 = fp.powi(3).expect("positive power");
    let c2_cubed = c2.powi(3).expect("positive power");
    let inner = &(&(&fp3 * c2) + &(&BigScalar::from_i64(4, d) * &c2_cubed)) + c4;
    let bracket = &(-c3.square()) + &(c2 * &inner);
    -(&(c2 * c3) * &bracket)
}

/// Reports the observed `e_{n+1} / e_n^8` next to the predicted constant.
/// Nothing is asserted about their agreement.
pub fn error_constant_probe(
    f: &mut Problem,
    root: &BigScalar,
    trace: &IterationTrace,
) -> Result<ErrorConstantProbe, AnalysisError> {
    if root.digits() < 200 {
        return Err(AnalysisError::InvalidArgument(format!(
            "the probe needs a root known to at least 200 digits, got {}",
            root.digits()
        )));
    }
    if trace.len() < 3 {
        return Err(AnalysisError::InsufficientTrace {
            needed: 3,
            got: trace.len(),
        });
    }
    let (fp, [c2, c3, c4]) = taylor_coefficients(f, root, PROBE_STEP_EXP)?;
    let predicted_c = predicted_constant(&fp, &c2, &c3, &c4);

    let floor = ulp_threshold(root);
    let errors: Vec<BigScalar> = trace.iterates().map(|x| x - root).collect();
    let ratios: Vec<BigScalar> = errors
        .windows(2)
        .filter(|w| !w[0].is_zero() && w[1].abs() > floor)
        .filter_map(|w| w[1].checked_div(&w[0].powi(8).ok()?).ok())
        .collect();
    let observed_ratio = ratios
        .last()
        .cloned()
        .ok_or(AnalysisError::NumericalNoise)?;
    Ok(ErrorConstantProbe {
        fprime_alpha: fp,
        c2,
        c3,
        c4,
        predicted_c,
        observed_ratio,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `x_n = root + a * b^(p^n)` for `n = 0..len`.
    fn synthetic(p: u32, a: &str, b: &str, len: u32, digits: u32) -> (IterationTrace, BigScalar) {
        let root = BigScalar::parse("0.7", digits).unwrap();
        let a = BigScalar::parse(a, digits).unwrap();
        let b = BigScalar::parse(b, digits).unwrap();
        let xs = (0..len)
            .map(|n| {
                let e = &a * &b.powi(p.pow(n) as i32).unwrap();
                &root + &e
            })
            .collect();
        (IterationTrace::from_iterates(xs), root)
    }

    #[test]
    fn coc_on_constructed_cubic_sequence() {
        // e_n = 10^(-2 * 3^n)
        let d = 200;
        let root = BigScalar::zero(d);
        let xs = (0..4)
            .map(|n| BigScalar::pow10(-2 * 3i32.pow(n), d))
            .collect();
        let est = coc(&IterationTrace::from_iterates(xs), Some(&root)).unwrap();
        assert!((est.rho - 3.0).abs() < 1e-6, "{}", est.rho);
        assert!(!est.residual_based);
    }

    #[test]
    fn coc_recovers_synthetic_orders() {
        for p in [2u32, 5, 7, 8] {
            let (trace, root) = synthetic(p, "3.7", "0.5", 4, 600);
            let est = coc(&trace, Some(&root)).unwrap();
            assert!(
                (est.rho - f64::from(p)).abs() < 1e-6,
                "p = {p}: {}",
                est.rho
            );
        }
    }

    #[test]
    fn coc_without_root_uses_differences() {
        let (trace, _) = synthetic(2, "1", "0.1", 6, 200);
        let est = coc(&trace, None).unwrap();
        assert!(est.residual_based);
        assert!((est.rho - 2.0).abs() < 1e-3, "{}", est.rho);
    }

    #[test]
    fn coc_needs_four_iterates() {
        let (trace, root) = synthetic(2, "1", "0.1", 3, 100);
        assert!(matches!(
            coc(&trace, Some(&root)),
            Err(AnalysisError::InsufficientTrace { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn coc_ignores_errors_below_the_noise_floor() {
        let d = 100;
        let root = BigScalar::zero(d);
        let mut xs: Vec<BigScalar> = (0..4).map(|n| BigScalar::pow10(-2i32.pow(n), d)).collect();
        xs.push(BigScalar::zero(d));
        let est = coc(&IterationTrace::from_iterates(xs), Some(&root)).unwrap();
        assert!((est.rho - 2.0).abs() < 1e-9);
        assert_eq!(est.triples_used, 2);
    }

    #[test]
    fn efficiency_index_values() {
        assert!((efficiency_index(2.0, 2) - 1.414).abs() < 5e-4);
        assert!((efficiency_index(8.0, 4) - 1.682).abs() < 5e-4);
        assert!((efficiency_index(8.0, 5) - 1.516).abs() < 5e-4);
    }

    #[test]
    fn efficiency_index_monotonicity() {
        for evals in 1..8 {
            for k in 2..16 {
                let p = f64::from(k);
                assert!(efficiency_index(p + 1.0, evals) > efficiency_index(p, evals));
                assert!(efficiency_index(p, evals + 1) < efficiency_index(p, evals));
            }
        }
    }

    #[test]
    fn particular_weights_pass() {
        let g = check_weight_conditions(&WeightFn::g_particular(), 256).unwrap();
        assert!(g.passed());
        let h = check_weight_conditions(&WeightFn::h_particular(), 256).unwrap();
        assert!(h.passed());
    }

    #[test]
    fn constant_h_fails() {
        let constant = WeightFn::new("1", 1, &crate::methods::H_CONDITIONS, |t| {
            Ok(BigScalar::one(t.digits()))
        });
        let check = check_weight_conditions(&constant, 256).unwrap();
        assert!(!check.passed());
        let second = check
            .checks
            .iter()
            .find(|c| c.condition.order == 2)
            .unwrap();
        assert!(!second.pass);
        assert!(second.measured.abs() < 1e-20);
    }

    #[test]
    fn weight_check_requires_enough_digits() {
        assert!(matches!(
            check_weight_conditions(&WeightFn::g_particular(), 64),
            Err(AnalysisError::InvalidArgument(_))
        ));
    }

    #[test]
    fn derivatives_of_a_polynomial() {
        // p(x) = x^4 - 2x^3 + x: p(2) = 2, p' = 4x^3-6x^2+1 -> 9, p'' = 12x^2-12x -> 24,
        // p''' = 24x - 12 -> 36, p'''' = 24
        let d = 300;
        let p = crate::expr::Expr::parse("x^4 - 2*x^3 + x").unwrap();
        let h = BigScalar::pow10(-60, d);
        let out = central_derivatives(|x| p.eval(x), &BigScalar::from_i64(2, d), &h, 4).unwrap();
        let expected = [2, 9, 24, 36, 24];
        for (k, (got, want)) in out.iter().zip(expected).enumerate() {
            let err = (got - &BigScalar::from_i64(want, d)).abs();
            assert!(err < 1e-50, "order {k}: {got}");
        }
    }

    #[test]
    fn probe_on_a_linear_predicts_zero() {
        let mut f = Problem::from_expr("lin", "3*x - 1").unwrap();
        let root = BigScalar::parse_ratio("1/3", 256).unwrap();
        let x0 = BigScalar::parse("0.5", 256).unwrap();
        let trace = IterationTrace::from_iterates(vec![x0.clone(), x0.clone(), root.clone()]);
        let (_, [c2, c3, c4]) = taylor_coefficients(&mut f, &root, PROBE_STEP_EXP).unwrap();
        assert!(c2.abs() < 1e-90 && c3.abs() < 1e-90 && c4.abs() < 1e-50);
        // all errors vanish after the first step, so there is nothing to observe
        let probe = error_constant_probe(&mut f, &root, &trace);
        match probe {
            Ok(p) => assert!(p.predicted_c.abs() < 1e-90),
            Err(e) => assert_eq!(e, AnalysisError::NumericalNoise),
        }
    }

    #[test]
    fn probe_rejects_short_roots() {
        let mut f = Problem::from_expr("lin", "x").unwrap();
        let root = BigScalar::zero(100);
        assert!(matches!(
            error_constant_probe(&mut f, &root, &IterationTrace::default()),
            Err(AnalysisError::InvalidArgument(_))
        ));
    }
}

use proptest::prelude::*;

use dfroot::bench::{self, TableFormat};
use dfroot::methods::{divided_difference, multipoint_step_with, Node, SchemeConfig};
use dfroot::{problems, solve, BigScalar, Method, Problem, SolveOptions, Status};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn printed_values_reparse_within_one_unit(v in -1e12f64..1e12, digits in 50u32..400) {
        let x = BigScalar::from_f64(v, digits);
        let s = x.to_sci_string();
        let back = BigScalar::parse(&s, digits).unwrap();
        let unit = &BigScalar::pow10(1 - digits as i32, digits) * &x.abs();
        prop_assert!((&back - &x).abs() <= unit);
        prop_assert_eq!(back.to_sci_string(), s);
    }

    #[test]
    fn divided_difference_of_a_quadratic(a in -20.0f64..20.0, gap in 1e-3f64..5.0) {
        // f[a, b] = a + b for x^2
        let d = 100;
        let mut f = Problem::from_fn("square", |x| Ok(x.square()));
        let a = BigScalar::from_f64(a, d);
        let b = &a + &BigScalar::from_f64(gap, d);
        let got = divided_difference(&mut f, &a, &b).unwrap();
        let want = &a + &b;
        prop_assert!((&got - &want).abs() < BigScalar::pow10(-80, d));
        prop_assert_eq!(f.evaluations(), 2);
    }

    #[test]
    fn om8_bookkeeping_near_f6_root(x0 in 1.7f64..2.4) {
        let d = 300;
        let mut f = problems::by_name("f6").unwrap();
        let x = BigScalar::from_f64(x0, d);
        let sol = solve(&mut f, &x, &Method::om8(), &SolveOptions::new(d)).unwrap();
        prop_assert_eq!(sol.report.status, Status::Converged);
        prop_assert_eq!(sol.report.evaluations, 4 * sol.report.iterations as u64);
        // f(x0) plus four calls per iteration
        prop_assert_eq!(f.evaluations(), sol.report.evaluations + 1);
        prop_assert_eq!(sol.trace.len(), sol.report.iterations + 1);
        prop_assert!(sol.report.residual < 1e-50);
    }

    #[test]
    fn one_step_charges_four_evaluations(x0 in 1.0f64..1.3) {
        let d = 200;
        let mut f = problems::by_name("f3").unwrap();
        let x = BigScalar::from_f64(x0, d);
        let fx = f.eval(&x).unwrap();
        f.reset_counter();
        let out = multipoint_step_with(&mut f, &Node { x, fx }, &SchemeConfig::particular()).unwrap();
        prop_assert_eq!(out.evals_used, 4);
        prop_assert_eq!(f.evaluations(), 3);
    }
}

#[test]
fn runs_are_deterministic() {
    let tol = BigScalar::pow10(-50, 1000);
    let a = bench::run_benchmark(1000, &tol);
    let b = bench::run_benchmark(1000, &tol);
    assert_eq!(a, b);
    assert_eq!(
        bench::emit_table(&a, TableFormat::Csv),
        bench::emit_table(&b, TableFormat::Csv)
    );
}

fn parse_markdown(md: &str) -> Vec<Vec<String>> {
    md.lines()
        .filter(|l| !l.starts_with("|---"))
        .map(|l| {
            l.trim()
                .trim_matches('|')
                .split('|')
                .map(|c| c.trim().to_string())
                .collect()
        })
        .collect()
}

#[test]
fn markdown_and_csv_carry_the_same_cells() {
    let results = bench::run_benchmark(1000, &BigScalar::pow10(-50, 1000));
    let md = parse_markdown(&bench::emit_table(&results, TableFormat::Markdown));
    let csv_text = bench::emit_table(&results, TableFormat::Csv);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_text.as_bytes());
    let csv: Vec<Vec<String>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    assert_eq!(md, csv);
    assert_eq!(md.len(), 22);
    let order: Vec<(String, String)> = md[1..]
        .iter()
        .map(|r| (r[0].clone(), r[1].clone()))
        .collect();
    let expected: Vec<(String, String)> = bench::CASES
        .iter()
        .map(|c| (c.problem.to_string(), c.x0.to_string()))
        .collect();
    assert_eq!(order, expected);
}

#[test]
fn reference_residual_strings_are_reproduced() {
    let results = bench::run_benchmark(1000, &BigScalar::pow10(-50, 1000));
    for r in &results {
        assert_eq!(r.report.status, Status::Converged);
        assert_eq!(
            r.report.residual.to_short_exp(),
            r.case.expected_residual,
            "{}/{}",
            r.case.problem,
            r.case.x0
        );
    }
}

#[test]
fn looser_tolerance_never_needs_more_iterations() {
    let strict = bench::run_benchmark(1000, &BigScalar::pow10(-50, 1000));
    let loose = bench::run_benchmark(1000, &BigScalar::pow10(-10, 1000));
    for (s, l) in strict.iter().zip(&loose) {
        assert!(l.report.iterations <= s.report.iterations);
    }
    assert!(!bench::comparable(1000, &BigScalar::pow10(-10, 1000)));
}

//! `dfroot`: solve, benchmark, weight checks and basin rendering.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dfroot::analysis::{check_weight_conditions, coc};
use dfroot::basins::{self, BasinConfig, BasinMethod, Palette, Polynomial, Region};
use dfroot::bench::{self, TableFormat};
use dfroot::methods::{SchemeConfig, WeightFn};
use dfroot::mpcore::{BigScalar, DEFAULT_DIGITS, MIN_SOLVER_DIGITS};
use dfroot::problems::{self, F7Reading, Problem};
use dfroot::{solve, Method, SolveOptions, Status};

use config::FileConfig;

/// Environment variable holding the default precision in decimal digits.
pub const DIGITS_ENV: &str = "DFROOT_DIGITS";

const EXIT_NOT_CONVERGED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
}

type CliResult = Result<ExitCode, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "dfroot",
    version,
    about = "Derivative-free root finding in arbitrary precision"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve f(x) = 0 from one starting point.
    Solve(SolveArgs),
    /// Run the 21-case iteration-count benchmark.
    Bench(BenchArgs),
    /// Render basins of attraction to PPM images.
    Basins(BasinArgs),
    /// Check the Taylor conditions of the built-in weight functions.
    Weights(WeightArgs),
    /// List the built-in test problems.
    Problems(ProblemArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodArg {
    Newton,
    Steffensen,
    Om8,
    #[value(name = "variant-m1")]
    VariantM1,
    #[value(name = "variant-m2")]
    VariantM2,
}

impl std::str::FromStr for MethodArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <MethodArg as ValueEnum>::from_str(s, false)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FormatArg {
    Csv,
    Markdown,
}

impl std::str::FromStr for FormatArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <FormatArg as ValueEnum>::from_str(s, false)
    }
}

#[derive(Args, Debug)]
struct Precision {
    /// Working precision in decimal digits [env: DFROOT_DIGITS, default 1000].
    #[arg(long)]
    digits: Option<u32>,
    /// Stop when |f(x)| falls below this value [default 1e-50].
    #[arg(long)]
    tol: Option<String>,
    /// Iteration cap [default 100].
    #[arg(long)]
    max_iter: Option<usize>,
    /// Flat key-value TOML file; keys mirror the long flag names.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Built-in problem name (f1..f7).
    #[arg(long, conflicts_with = "expr")]
    problem: Option<String>,
    /// Function of x, e.g. "x^3 - 2*x - 5".
    #[arg(long)]
    expr: Option<String>,
    /// Starting point.
    #[arg(long)]
    x0: Option<String>,
    /// Iteration [default om8].
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[command(flatten)]
    precision: Precision,
    /// Perturbation scale in z = x + alpha f(x)^m.
    #[arg(long)]
    alpha: Option<String>,
    /// Perturbation exponent in z = x + alpha f(x)^m.
    #[arg(long)]
    m: Option<u32>,
    /// Append the computational order of convergence.
    #[arg(long)]
    coc: bool,
    /// Print every iterate.
    #[arg(long)]
    trace: bool,
    /// Use f7 exactly as printed, with cos(pi/2).
    #[arg(long)]
    f7_printed: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    precision: Precision,
    /// Table format [default markdown].
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BasinArgs {
    /// `zN-1` or `coeffs:a,b,c,...`; repeatable [default z3-1].
    #[arg(long)]
    poly: Vec<String>,
    /// Iteration; repeatable [default om8].
    #[arg(long, value_enum)]
    method: Vec<MethodArg>,
    /// `N` or `WxH` pixels [default 512].
    #[arg(long)]
    grid: Option<String>,
    /// `re_min,re_max,im_min,im_max` [default -2,2,-2,2].
    #[arg(long, allow_hyphen_values = true)]
    region: Option<String>,
    /// Iteration cap per pixel [default 100].
    #[arg(long)]
    max_iter_basin: Option<u32>,
    /// Capture radius around each root [default 1e-3].
    #[arg(long)]
    capture_tol: Option<f64>,
    /// Perturbation scale for om8.
    #[arg(long)]
    alpha: Option<f64>,
    /// Perturbation exponent for om8 and the variants.
    #[arg(long)]
    m: Option<u32>,
    /// Output directory, or a `.ppm` path when one image is requested [default .].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key-value TOML file; keys mirror the long flag names.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WeightArgs {
    /// Precision of the check [default 256].
    #[arg(long)]
    digits: Option<u32>,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    /// Show f7 exactly as printed, with cos(pi/2).
    #[arg(long)]
    f7_printed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Basins(a) => cmd_basins(a),
        Command::Weights(a) => cmd_weights(a),
        Command::Problems(a) => cmd_problems(a),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn load_config(path: Option<&Path>, allowed: &[&str]) -> Result<FileConfig, CliError> {
    match path {
        Some(p) => FileConfig::load(p, allowed),
        None => Ok(FileConfig::default()),
    }
}

fn env_digits() -> Result<Option<u32>, CliError> {
    match std::env::var(DIGITS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{DIGITS_ENV}=`{v}` is not a digit count"))),
        Err(_) => Ok(None),
    }
}

/// Flag, then config file, then environment, then the built-in default.
fn resolve_digits(flag: Option<u32>, file: &FileConfig) -> Result<u32, CliError> {
    let d = match file.pick(flag, "digits")? {
        Some(d) => d,
        None => env_digits()?.unwrap_or(DEFAULT_DIGITS),
    };
    if d < MIN_SOLVER_DIGITS {
        return usage(format!(
            "--digits must be at least {MIN_SOLVER_DIGITS}, got {d}"
        ));
    }
    Ok(d)
}

fn parse_scalar(what: &str, s: &str, digits: u32) -> Result<BigScalar, CliError> {
    BigScalar::parse(s, digits)
        .map_err(|_| CliError::Usage(format!("{what} `{s}` is not a number")))
}

fn resolve_tol(
    flag: Option<String>,
    file: &FileConfig,
    digits: u32,
) -> Result<BigScalar, CliError> {
    let tol = match file.pick(flag, "tol")? {
        Some(s) => parse_scalar("--tol", &s, digits)?,
        None => BigScalar::pow10(-50, digits),
    };
    if tol.is_zero() || tol.is_sign_negative() || !tol.is_finite() {
        return usage("--tol must be positive");
    }
    Ok(tol)
}

fn resolve_max_iter(flag: Option<usize>, file: &FileConfig) -> Result<usize, CliError> {
    let n = file.pick(flag, "max-iter")?.unwrap_or(100);
    if n == 0 {
        return usage("--max-iter must be at least 1");
    }
    Ok(n)
}

const SOLVE_KEYS: &[&str] = &[
    "problem",
    "expr",
    "x0",
    "method",
    "digits",
    "tol",
    "max-iter",
    "alpha",
    "m",
    "coc",
    "trace",
    "f7-printed",
];

fn cmd_solve(a: SolveArgs) -> CliResult {
    let file = load_config(a.precision.config.as_deref(), SOLVE_KEYS)?;
    let digits = resolve_digits(a.precision.digits, &file)?;
    let tol = resolve_tol(a.precision.tol, &file, digits)?;
    let max_iter = resolve_max_iter(a.precision.max_iter, &file)?;
    let reading = if file.switch(a.f7_printed, "f7-printed")? {
        F7Reading::Printed
    } else {
        F7Reading::Corrected
    };

    let problem_name: Option<String> = file.pick(a.problem, "problem")?;
    let expr: Option<String> = file.pick(a.expr, "expr")?;
    let mut f = match (problem_name, expr) {
        (Some(_), Some(_)) => return usage("give either --problem or --expr, not both"),
        (Some(name), None) => {
            problems::by_name_with(&name, reading).map_err(|e| CliError::Usage(e.to_string()))?
        }
        (None, Some(src)) => {
            Problem::from_expr("expr", &src).map_err(|e| CliError::Usage(e.to_string()))?
        }
        (None, None) => return usage("one of --problem or --expr is required"),
    };
    let Some(x0) = file.pick::<String>(a.x0, "x0")? else {
        return usage("--x0 is required");
    };
    let x0 = parse_scalar("--x0", &x0, digits)?;

    let method_arg = file.pick(a.method, "method")?.unwrap_or(MethodArg::Om8);
    let alpha: Option<String> = file.pick(a.alpha, "alpha")?;
    let m: Option<u32> = file.pick(a.m, "m")?;
    let mut method = match method_arg {
        MethodArg::Newton => Method::Newton,
        MethodArg::Steffensen => Method::Steffensen,
        MethodArg::Om8 => Method::om8(),
        MethodArg::VariantM1 => Method::variant(1),
        MethodArg::VariantM2 => Method::variant(2),
    };
    match &mut method {
        Method::Multipoint(cfg) => {
            let mut c: SchemeConfig = cfg.clone();
            if let Some(al) = &alpha {
                c = c.with_alpha(parse_scalar("--alpha", al, digits)?);
            }
            if let Some(m) = m {
                c = c.with_m(m);
            }
            c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            *cfg = c;
        }
        _ if alpha.is_some() || m.is_some() => {
            return usage("--alpha and --m apply only to om8 and the variants")
        }
        _ => {}
    }

    let opts = SolveOptions::new(digits)
        .with_tol(tol)
        .with_max_iter(max_iter);
    let mut sol = solve(&mut f, &x0, &method, &opts).map_err(|e| CliError::Usage(e.to_string()))?;
    if file.switch(a.coc, "coc")? {
        let root = f.polished_root(digits).ok();
        sol.report.coc = coc(&sol.trace, root.as_ref()).ok();
    }
    let r = &sol.report;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "problem   {}",
        f.source()
            .map_or_else(|| f.name().to_string(), |s| format!("{} = {s}", f.name()))
    );
    let _ = writeln!(out, "method    {}", method.name());
    let _ = writeln!(out, "digits    {digits}");
    let _ = writeln!(out, "status    {}", r.status);
    let _ = writeln!(out, "IT        {}", r.iterations);
    let _ = writeln!(out, "TNE       {}", r.evaluations);
    let _ = writeln!(
        out,
        "|f(x)|    {}  ({})",
        r.residual.to_short_exp(),
        r.residual.to_sci_string_with(6)
    );
    let _ = writeln!(out, "x         {}", r.x.to_sci_string_with(60));
    if let Some(note) = &r.note {
        let _ = writeln!(out, "note      {note}");
    }
    if file.switch(a.coc, "coc")? {
        match &r.coc {
            Some(c) => {
                let basis = if c.residual_based {
                    "successive differences"
                } else {
                    "reference root"
                };
                let _ = writeln!(out, "COC       {:.4}  ({basis})", c.rho);
            }
            None => {
                let _ = writeln!(
                    out,
                    "COC       unavailable (trace too short or errors below resolution)"
                );
            }
        }
    }
    if file.switch(a.trace, "trace")? {
        let _ = writeln!(out, "trace");
        for (k, rec) in sol.trace.records.iter().enumerate() {
            let _ = writeln!(
                out,
                "  {k:>3}  evals {:>4}  |f| {:>12}  x {}",
                rec.evaluations,
                rec.residual.to_sci_string_with(6),
                rec.x.to_sci_string_with(40)
            );
        }
    }
    print!("{out}");
    Ok(if r.status == Status::Converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    })
}

const BENCH_KEYS: &[&str] = &["digits", "tol", "max-iter", "format", "out"];

fn cmd_bench(a: BenchArgs) -> CliResult {
    let file = load_config(a.precision.config.as_deref(), BENCH_KEYS)?;
    let digits = resolve_digits(a.precision.digits, &file)?;
    let tol = resolve_tol(a.precision.tol, &file, digits)?;
    let max_iter = resolve_max_iter(a.precision.max_iter, &file)?;
    let format = match file
        .pick(a.format, "format")?
        .unwrap_or(FormatArg::Markdown)
    {
        FormatArg::Csv => TableFormat::Csv,
        FormatArg::Markdown => TableFormat::Markdown,
    };
    let out: Option<PathBuf> = file.pick(a.out, "out")?;

    let results = bench::run_benchmark_with(digits, &tol, max_iter);
    let table = bench::emit_table(&results, format);
    match &out {
        Some(path) => std::fs::write(path, &table)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{table}"),
    }
    let (it, res) = bench::summary(&results);
    let pass = it >= bench::REQUIRED_IT_MATCHES;
    eprintln!(
        "IT matches: {it}/{}  residual exponents within +-{}: {res}/{}",
        results.len(),
        bench::RESIDUAL_EXPONENT_TOLERANCE,
        results.len()
    );
    if !bench::comparable(digits, &tol) {
        eprintln!("non-comparable: reference counts use 1000 digits and tol 1e-50");
    }
    eprintln!("{}", if pass { "PASS" } else { "FAIL" });
    if let Some(path) = &out {
        eprintln!("wrote {}", path.display());
    }
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    })
}

const BASIN_KEYS: &[&str] = &[
    "poly",
    "method",
    "grid",
    "region",
    "max-iter-basin",
    "capture-tol",
    "alpha",
    "m",
    "out",
];

fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--grid `{s}` is not N or WxH"));
    match s.split_once(['x', 'X']) {
        Some((w, h)) => Ok((
            w.trim().parse().map_err(|_| bad())?,
            h.trim().parse().map_err(|_| bad())?,
        )),
        None => {
            let n = s.trim().parse().map_err(|_| bad())?;
            Ok((n, n))
        }
    }
}

fn basin_method(
    arg: MethodArg,
    alpha: Option<f64>,
    m: Option<u32>,
) -> Result<BasinMethod, CliError> {
    let method = match arg {
        MethodArg::Newton | MethodArg::Steffensen if alpha.is_some() || m.is_some() => {
            return usage("--alpha and --m apply only to om8 and the variants")
        }
        MethodArg::Newton => BasinMethod::Newton,
        MethodArg::Steffensen => BasinMethod::Steffensen,
        MethodArg::Om8 => BasinMethod::Om8 {
            alpha: alpha.unwrap_or(1.0),
            m: m.unwrap_or(3),
        },
        MethodArg::VariantM1 | MethodArg::VariantM2 if alpha.is_some() => {
            return usage("--alpha applies only to om8")
        }
        MethodArg::VariantM1 => BasinMethod::Variant { m: m.unwrap_or(1) },
        MethodArg::VariantM2 => BasinMethod::Variant { m: m.unwrap_or(2) },
    };
    match method {
        BasinMethod::Om8 { alpha, m } if alpha == 0.0 || m == 0 => {
            usage("alpha and m must be nonzero")
        }
        BasinMethod::Variant { m: 0 } => usage("m must be nonzero"),
        other => Ok(other),
    }
}

fn cmd_basins(a: BasinArgs) -> CliResult {
    let file = load_config(a.config.as_deref(), BASIN_KEYS)?;
    let mut polys: Vec<String> = file.list(a.poly, "poly")?;
    if polys.is_empty() {
        polys.push("z3-1".into());
    }
    let mut methods: Vec<MethodArg> = file.list(a.method, "method")?;
    if methods.is_empty() {
        methods.push(MethodArg::Om8);
    }
    let (width, height) = match file.pick::<String>(a.grid, "grid")? {
        Some(g) => parse_grid(&g)?,
        None => (basins::DEFAULT_GRID, basins::DEFAULT_GRID),
    };
    let region = match file.pick::<String>(a.region, "region")? {
        Some(r) => r
            .parse::<Region>()
            .map_err(|e| CliError::Usage(e.to_string()))?,
        None => Region::default(),
    };
    let max_iter = file
        .pick(a.max_iter_basin, "max-iter-basin")?
        .unwrap_or(basins::DEFAULT_MAX_ITER);
    let capture_tol = file
        .pick(a.capture_tol, "capture-tol")?
        .unwrap_or(basins::DEFAULT_CAPTURE_TOL);
    let alpha: Option<f64> = file.pick(a.alpha, "alpha")?;
    let m: Option<u32> = file.pick(a.m, "m")?;
    let out: PathBuf = file
        .pick(a.out, "out")?
        .unwrap_or_else(|| PathBuf::from("."));

    let mut jobs = Vec::new();
    for p in &polys {
        let poly: Polynomial = p
            .parse()
            .map_err(|e: basins::BasinError| CliError::Usage(e.to_string()))?;
        for &marg in &methods {
            let method = basin_method(marg, alpha, m)?;
            let cfg = BasinConfig {
                polynomial: poly.clone(),
                region,
                width,
                height,
                max_iter,
                capture_tol,
                method,
            };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            jobs.push(cfg);
        }
    }

    let single_file = jobs.len() == 1 && out.extension().is_some_and(|e| e == "ppm");
    if !single_file {
        std::fs::create_dir_all(&out)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out.display())))?;
    }
    for cfg in &jobs {
        let img = basins::render(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
        let path = if single_file {
            out.clone()
        } else {
            out.join(
                format!("{}_{}.ppm", cfg.polynomial, cfg.method.name()).replace([':', ','], "_"),
            )
        };
        let palette = Palette::default_for(cfg.polynomial.roots().len());
        basins::write_image(&img, &palette, &path).map_err(|e| match e {
            basins::BasinError::Io(io) => {
                CliError::Io(format!("cannot write {}: {io}", path.display()))
            }
            other => CliError::Usage(other.to_string()),
        })?;
        println!(
            "{}  {}x{}  {} on {}  converged {:.1}%",
            path.display(),
            img.width,
            img.height,
            cfg.method.name(),
            cfg.polynomial,
            100.0 * img.converged_fraction()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_weights(a: WeightArgs) -> CliResult {
    let digits = a.digits.unwrap_or(256);
    let mut all = true;
    for (role, w) in [
        ("G", WeightFn::g_particular()),
        ("H", WeightFn::h_particular()),
        ("H (variant)", WeightFn::h_variant()),
    ] {
        let check =
            check_weight_conditions(&w, digits).map_err(|e| CliError::Usage(e.to_string()))?;
        println!(
            "{role} = {}  at t = {}  (tolerance {})",
            check.weight,
            check.expansion_point,
            check.tolerance.to_sci_string_with(3)
        );
        for c in &check.checks {
            println!(
                "  {:<16} measured {:>28}  {}",
                c.condition.to_string(),
                c.measured.to_sci_string_with(20),
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        all &= check.passed();
    }
    Ok(if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NOT_CONVERGED)
    })
}

fn cmd_problems(a: ProblemArgs) -> CliResult {
    let reading = if a.f7_printed {
        F7Reading::Printed
    } else {
        F7Reading::Corrected
    };
    for p in problems::suite_with(reading) {
        let root = p
            .reference_root(40)
            .map_or_else(|| "-".to_string(), |r| r.to_sci_string_with(30));
        println!("{}  {}", p.name(), p.source().unwrap_or("-"));
        println!("    domain {}  root {root}", p.domain());
    }
    Ok(ExitCode::SUCCESS)
}

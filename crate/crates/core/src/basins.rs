//! Basins of attraction in the complex plane.
//!
//! Each pixel center is used as a starting point; the chosen iteration runs in
//! double-precision complex arithmetic until the iterate is within
//! `capture_tol` of a root of the polynomial or `max_iter` steps are spent.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_MAX_ITER: u32 = 100;
pub const DEFAULT_CAPTURE_TOL: f64 = 1e-3;
pub const MIN_GRID: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum BasinError {
    #[error("invalid basin configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid polynomial `{0}`")]
    Polynomial(String),
    #[error("palette has {colors} colors for {roots} roots")]
    Palette { colors: usize, roots: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Polynomial with complex coefficients, highest degree first.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
    roots: Vec<Complex64>,
    token: String,
}

impl Polynomial {
    /// Leading zeros are dropped. Roots come from Durand-Kerner.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Polynomial, BasinError> {
        let token = format!(
            "coeffs:{}",
            coeffs
                .iter()
                .map(|c| fmt_coeff(*c))
                .collect::<Vec<_>>()
                .join(",")
        );
        let coeffs: Vec<Complex64> = coeffs
            .into_iter()
            .skip_while(|c| *c == Complex64::new(0.0, 0.0))
            .collect();
        if coeffs.len() < 3 {
            return Err(BasinError::Polynomial(token));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(BasinError::Polynomial(token));
        }
        let roots = durand_kerner(&coeffs);
        Ok(Polynomial {
            coeffs,
            roots,
            token,
        })
    }

    /// `z^n - 1` with roots `exp(2 pi i k / n)`, `k = 0..n`.
    pub fn unity(n: usize) -> Result<Polynomial, BasinError> {
        if n < 2 {
            return Err(BasinError::Polynomial(format!("z{n}-1")));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n + 1];
        coeffs[0] = Complex64::new(1.0, 0.0);
        coeffs[n] = Complex64::new(-1.0, 0.0);
        let roots = (0..n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64))
            .collect();
        Ok(Polynomial {
            coeffs,
            roots,
            token: format!("z{n}-1"),
        })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// `(p(z), p'(z))` in one Horner pass.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        self.coeffs
            .iter()
            .fold((zero, zero), |(p, dp), c| (p * z + c, dp * z + p))
    }

    /// Index of the root within `tol` of `z`, nearest first.
    pub fn captured_root(&self, z: Complex64, tol: f64) -> Option<usize> {
        self.roots
            .iter()
            .enumerate()
            .map(|(i, r)| (i, (z - r).norm()))
            .filter(|(_, d)| *d < tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }
}

fn fmt_coeff(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else {
        format!("{}{:+}i", c.re, c.im)
    }
}

fn parse_coeff(s: &str) -> Option<Complex64> {
    let s = s.trim();
    if let Some(body) = s.strip_suffix('i') {
        // split at the last sign that is not an exponent sign
        let bytes = body.as_bytes();
        let cut = (1..bytes.len())
            .rev()
            .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        return match cut {
            Some(k) => {
                let re = body[..k].parse().ok()?;
                let im = match &body[k..] {
                    "+" => 1.0,
                    "-" => -1.0,
                    v => v.parse().ok()?,
                };
                Some(Complex64::new(re, im))
            }
            None => {
                let im = match body {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    v => v.parse().ok()?,
                };
                Some(Complex64::new(0.0, im))
            }
        };
    }
    s.parse().ok().map(|re| Complex64::new(re, 0.0))
}

impl FromStr for Polynomial {
    type Err = BasinError;

    /// `zN-1` or `coeffs:a,b,c,...` (highest degree first, entries like `2`, `-1.5`, `1+2i`).
    fn from_str(s: &str) -> Result<Self, BasinError> {
        let bad = || BasinError::Polynomial(s.to_string());
        let t = s.trim();
        if let Some(rest) = t.strip_prefix("coeffs:") {
            let coeffs = rest
                .split(',')
                .map(|c| parse_coeff(c).ok_or_else(bad))
                .collect::<Result<Vec<_>, _>>()?;
            let mut p = Polynomial::new(coeffs)?;
            p.token = t.to_string();
            return Ok(p);
        }
        let n = t
            .strip_prefix('z')
            .and_then(|r| r.strip_suffix("-1"))
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(bad)?;
        Polynomial::unity(n).map_err(|_| bad())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token)
    }
}

fn durand_kerner(coeffs: &[Complex64]) -> Vec<Complex64> {
    let lead = coeffs[0];
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let n = monic.len() - 1;
    let eval = |z: Complex64| {
        monic
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    };
    let radius = 1.0 + monic[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| seed.powu(k as u32) * radius / seed.norm().powi(k as i32).max(1e-12))
        .collect();
    for _ in 0..1000 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let denom = (0..n)
                .filter(|&j| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, j| {
                    acc * (roots[i] - roots[j])
                });
            if denom == Complex64::new(0.0, 0.0) {
                continue;
            }
            let delta = eval(roots[i]) / denom;
            roots[i] -= delta;
            moved = moved.max(delta.norm());
        }
        if moved < 1e-15 {
            break;
        }
    }
    roots
}

/// Axis-aligned rectangle of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Default for Region {
    fn default() -> Self {
        Region {
            re_min: -2.0,
            re_max: 2.0,
            im_min: -2.0,
            im_max: 2.0,
        }
    }
}

impl FromStr for Region {
    type Err = BasinError;

    /// `re_min,re_max,im_min,im_max`.
    fn from_str(s: &str) -> Result<Self, BasinError> {
        let v = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| BasinError::InvalidConfig(format!("bad region `{s}`")))?;
        match v[..] {
            [re_min, re_max, im_min, im_max] => Ok(Region {
                re_min,
                re_max,
                im_min,
                im_max,
            }),
            _ => Err(BasinError::InvalidConfig(format!(
                "region needs 4 numbers, got `{s}`"
            ))),
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.re_min, self.re_max, self.im_min, self.im_max
        )
    }
}

/// Iterations available to the renderer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasinMethod {
    Newton,
    Steffensen,
    /// Particular eighth-order scheme with `z = x + alpha p(x)^m`.
    Om8 {
        alpha: f64,
        m: u32,
    },
    /// Third step weighted by `1 + t1^2`.
    Variant {
        m: u32,
    },
}

impl BasinMethod {
    pub const OM8: BasinMethod = BasinMethod::Om8 { alpha: 1.0, m: 3 };

    pub fn name(&self) -> String {
        match self {
            BasinMethod::Newton => "newton".into(),
            BasinMethod::Steffensen => "steffensen".into(),
            BasinMethod::Om8 { alpha, m } if *alpha == 1.0 && *m == 3 => "om8".into(),
            BasinMethod::Om8 { alpha, m } => format!("om8-a{alpha}-m{m}"),
            BasinMethod::Variant { m } => format!("variant-m{m}"),
        }
    }

    /// One step from `x`; `None` when a denominator vanishes or a value is not finite.
    pub fn step(&self, p: &Polynomial, x: Complex64) -> Option<Complex64> {
        let next = match *self {
            BasinMethod::Newton => {
                let (px, dpx) = p.eval_with_derivative(x);
                x - checked(px, dpx)?
            }
            BasinMethod::Steffensen => {
                let px = p.eval(x);
                let w = x + px;
                x - checked(px * px, p.eval(w) - px)?
            }
            BasinMethod::Om8 { alpha, m } => multipoint(p, x, alpha, m, false)?,
            BasinMethod::Variant { m } => multipoint(p, x, 1.0, m, true)?,
        };
        next.is_finite().then_some(next)
    }
}

fn checked(num: Complex64, den: Complex64) -> Option<Complex64> {
    if den == Complex64::new(0.0, 0.0) {
        return None;
    }
    let q = num / den;
    q.is_finite().then_some(q)
}

fn slope(a: Complex64, fa: Complex64, b: Complex64, fb: Complex64) -> Option<Complex64> {
    checked(fa - fb, a - b)
}

fn multipoint(
    p: &Polynomial,
    x: Complex64,
    alpha: f64,
    m: u32,
    variant: bool,
) -> Option<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let fx = p.eval(x);
    let z = x + alpha * fx.powu(m);
    let fz = p.eval(z);
    let y = x - checked(fx, slope(z, fz, x, fx)?)?;
    let fy = p.eval(y);
    if fy == Complex64::new(0.0, 0.0) {
        return Some(y);
    }
    let t1 = checked(fy, fx)?;
    let g = checked(one - 2.0 * t1, one - 3.0 * t1)?;
    let w = y - g * checked(fy, slope(x, fx, y, fy)?)?;
    let fw = p.eval(w);
    let d_wy = slope(w, fw, y, fy)?;
    let h = if variant {
        one + t1 * t1
    } else {
        let t = checked(d_wy, slope(w, fw, x, fx)?)?;
        4.0 - 8.0 * t + 7.0 * t * t - 2.0 * t * t * t
    };
    Some(w - h * checked(fw, d_wy)?)
}

#[derive(Debug, Clone)]
pub struct BasinConfig {
    pub polynomial: Polynomial,
    pub region: Region,
    pub width: usize,
    pub height: usize,
    pub max_iter: u32,
    pub capture_tol: f64,
    pub method: BasinMethod,
}

impl BasinConfig {
    /// Default region, grid, cap and capture tolerance.
    pub fn new(polynomial: Polynomial, method: BasinMethod) -> BasinConfig {
        BasinConfig {
            polynomial,
            region: Region::default(),
            width: DEFAULT_GRID,
            height: DEFAULT_GRID,
            max_iter: DEFAULT_MAX_ITER,
            capture_tol: DEFAULT_CAPTURE_TOL,
            method,
        }
    }

    pub fn with_grid(mut self, width: usize, height: usize) -> BasinConfig {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<(), BasinError> {
        let bad = |m: String| Err(BasinError::InvalidConfig(m));
        if self.width < MIN_GRID || self.height < MIN_GRID {
            return bad(format!(
                "grid {}x{} is below the {MIN_GRID}x{MIN_GRID} minimum",
                self.width, self.height
            ));
        }
        let r = &self.region;
        let finite = [r.re_min, r.re_max, r.im_min, r.im_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(r.re_max > r.re_min) || !(r.im_max > r.im_min) {
            return bad(format!("region {r} has no area"));
        }
        if self.polynomial.degree() < 2 {
            return bad("polynomial degree must be at least 2".into());
        }
        if !(self.capture_tol > 0.0) {
            return bad(format!(
                "capture tolerance {} is not positive",
                self.capture_tol
            ));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        Ok(())
    }

    /// Center of pixel `(col, row)`; row 0 is the top (largest imaginary part).
    pub fn pixel_center(&self, col: usize, row: usize) -> Complex64 {
        let r = &self.region;
        let dx = (r.re_max - r.re_min) / self.width as f64;
        let dy = (r.im_max - r.im_min) / self.height as f64;
        Complex64::new(
            r.re_min + (col as f64 + 0.5) * dx,
            r.im_max - (row as f64 + 0.5) * dy,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub root: Option<usize>,
    pub iterations: u32,
}

/// Row-major grid of per-pixel outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasinImage {
    pub width: usize,
    pub height: usize,
    pub max_iter: u32,
    pub cells: Vec<Cell>,
}

impl BasinImage {
    pub fn cell(&self, col: usize, row: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    /// Fraction of pixels attracted to some root.
    pub fn converged_fraction(&self) -> f64 {
        self.cells.iter().filter(|c| c.root.is_some()).count() as f64 / self.cells.len() as f64
    }
}

/// Follows one starting point. The capture test runs before every step.
pub fn orbit(cfg: &BasinConfig, z0: Complex64) -> (Cell, Complex64) {
    let p = &cfg.polynomial;
    let mut z = z0;
    for it in 0..=cfg.max_iter {
        if let Some(r) = p.captured_root(z, cfg.capture_tol) {
            return (
                Cell {
                    root: Some(r),
                    iterations: it,
                },
                z,
            );
        }
        if it == cfg.max_iter {
            break;
        }
        match cfg.method.step(p, z) {
            Some(next) => z = next,
            None => {
                return (
                    Cell {
                        root: None,
                        iterations: it,
                    },
                    z,
                )
            }
        }
    }
    (
        Cell {
            root: None,
            iterations: cfg.max_iter,
        },
        z,
    )
}

pub fn render(cfg: &BasinConfig) -> Result<BasinImage, BasinError> {
    cfg.validate()?;
    let rows: Vec<Vec<Cell>> = (0..cfg.height)
        .into_par_iter()
        .map(|row| {
            (0..cfg.width)
                .map(|col| orbit(cfg, cfg.pixel_center(col, row)).0)
                .collect()
        })
        .collect();
    Ok(BasinImage {
        width: cfg.width,
        height: cfg.height,
        max_iter: cfg.max_iter,
        cells: rows.into_iter().flatten().collect(),
    })
}

pub type Rgb = [u8; 3];

/// Root colors; pixels with no root are always black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    pub colors: Vec<Rgb>,
    /// Darken pixels by iteration count.
    pub shade: bool,
}

const BASE_COLORS: [Rgb; 8] = [
    [230, 60, 50],
    [60, 170, 75],
    [50, 100, 220],
    [240, 200, 40],
    [170, 70, 200],
    [40, 200, 210],
    [245, 130, 40],
    [150, 150, 150],
];

impl Palette {
    /// Enough distinct colors for `roots` roots, cycling after eight.
    pub fn default_for(roots: usize) -> Palette {
        Palette {
            colors: (0..roots)
                .map(|i| BASE_COLORS[i % BASE_COLORS.len()])
                .collect(),
            shade: true,
        }
    }

    fn color(&self, cell: Cell, max_iter: u32) -> Rgb {
        let Some(r) = cell.root else {
            return [0, 0, 0];
        };
        let base = self.colors[r];
        if !self.shade {
            return base;
        }
        let k = 1.0 - 0.75 * f64::from(cell.iterations.min(max_iter)) / f64::from(max_iter.max(1));
        base.map(|c| (f64::from(c) * k).round() as u8)
    }
}

/// Binary PPM (`P6`, 8-bit) bytes.
pub fn encode_ppm(img: &BasinImage, palette: &Palette) -> Result<Vec<u8>, BasinError> {
    let roots = img
        .cells
        .iter()
        .filter_map(|c| c.root)
        .max()
        .map_or(0, |r| r + 1);
    if palette.colors.len() < roots {
        return Err(BasinError::Palette {
            colors: palette.colors.len(),
            roots,
        });
    }
    let header = format!("P6\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.cells.len() * 3);
    out.extend_from_slice(header.as_bytes());
    for cell in &img.cells {
        out.extend_from_slice(&palette.color(*cell, img.max_iter));
    }
    Ok(out)
}

pub fn write_image(img: &BasinImage, palette: &Palette, path: &Path) -> Result<(), BasinError> {
    let bytes = encode_ppm(img, palette)?;
    let mut file = io::BufWriter::new(std::fs::File::create(path)?);
    file.write_all(&bytes)?;
    file.flush()?;
    Ok(())
}

/// Agreement of root classes under rotation by `2 pi / n` about the origin.
///
/// Every pixel whose rotated center falls inside the grid is paired with the
/// pixel containing that point. The pair agrees when the rotated root of the
/// first (or none) appears in that pixel or one of its eight neighbours, which
/// absorbs the quantization of a rotated lattice point.
pub fn rotational_agreement(cfg: &BasinConfig, img: &BasinImage, n: usize) -> f64 {
    let omega = Complex64::from_polar(1.0, 2.0 * PI / n as f64);
    let roots = cfg.polynomial.roots();
    let rotated_root: Vec<Option<usize>> = roots
        .iter()
        .map(|r| cfg.polynomial.captured_root(r * omega, 1e-9))
        .collect();
    let r = &cfg.region;
    let (w, h) = (img.width as i64, img.height as i64);
    let (mut pairs, mut agree) = (0usize, 0usize);
    for row in 0..img.height {
        for col in 0..img.width {
            let z = cfg.pixel_center(col, row) * omega;
            let fc = ((z.re - r.re_min) / (r.re_max - r.re_min) * img.width as f64).floor();
            let fr = ((r.im_max - z.im) / (r.im_max - r.im_min) * img.height as f64).floor();
            if !(0.0..img.width as f64).contains(&fc) || !(0.0..img.height as f64).contains(&fr) {
                continue;
            }
            pairs += 1;
            let want = img.cell(col, row).root.and_then(|k| rotated_root[k]);
            let (pc, pr) = (fc as i64, fr as i64);
            let hit = (-1..=1).any(|dr| {
                (-1..=1).any(|dc| {
                    let (cc, rr) = (pc + dc, pr + dr);
                    (0..w).contains(&cc)
                        && (0..h).contains(&rr)
                        && img.cell(cc as usize, rr as usize).root == want
                })
            });
            if hit {
                agree += 1;
            }
        }
    }
    agree as f64 / pairs.max(1) as f64
}

/// Fraction of pixels whose class, rotated by `2 pi / n`, equals the class
/// obtained by iterating from the exactly rotated starting point. Measures
/// equivariance of the method itself, free of quantization.
pub fn rotational_equivariance(cfg: &BasinConfig, img: &BasinImage, n: usize) -> f64 {
    let omega = Complex64::from_polar(1.0, 2.0 * PI / n as f64);
    let roots = cfg.polynomial.roots();
    let rotated_root: Vec<Option<usize>> = roots
        .iter()
        .map(|r| cfg.polynomial.captured_root(r * omega, 1e-9))
        .collect();
    let agree: usize = (0..img.height)
        .into_par_iter()
        .map(|row| {
            (0..img.width)
                .filter(|&col| {
                    let want = img.cell(col, row).root.and_then(|k| rotated_root[k]);
                    orbit(cfg, cfg.pixel_center(col, row) * omega).0.root == want
                })
                .count()
        })
        .sum();
    agree as f64 / img.cells.len() as f64
}

/// Agreement of root classes under complex conjugation (mirror in the real axis).
pub fn conjugate_agreement(cfg: &BasinConfig, img: &BasinImage) -> f64 {
    let roots = cfg.polynomial.roots();
    let conj_root: Vec<Option<usize>> = roots
        .iter()
        .map(|r| cfg.polynomial.captured_root(r.conj(), 1e-9))
        .collect();
    let mut agree = 0usize;
    for row in 0..img.height {
        for col in 0..img.width {
            let mirrored = img.cell(col, img.height - 1 - row).root;
            if img.cell(col, row).root.and_then(|k| conj_root[k]) == mirrored {
                agree += 1;
            }
        }
    }
    agree as f64 / img.cells.len() as f64
}

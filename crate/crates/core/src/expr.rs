//! A minimal arithmetic-expression reader for univariate test functions.
//!
//! Grammar (whitespace insignificant):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | sin | cos | sqrt | abs
//! ```
//!
//! `-x^2` parses as `-(x^2)` and `^` is right-associative. Integer exponents
//! are evaluated by repeated multiplication and accept any sign of the base.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::mpcore::{eval_elementary, BigScalar, Elementary, MpError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at offset {offset} in `{source_text}`")]
pub struct ParseError {
    pub message: String,
    pub offset: usize,
    pub source_text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// A decimal literal, kept as text so it is rounded at evaluation precision.
    Num(String),
    X,
    Pi,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    PowInt(Box<Expr>, i32),
    Pow(Box<Expr>, Box<Expr>),
    Call(Elementary, Box<Expr>),
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ParseError> {
        let mut parser = Parser {
            src: source,
            bytes: source.as_bytes(),
            pos: 0,
        };
        let expr = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.bytes.len() {
            return Err(parser.error("unexpected trailing input"));
        }
        Ok(expr)
    }

    /// Evaluates at `x`, rounding literals to the precision of `x`.
    pub fn eval(&self, x: &BigScalar) -> Result<BigScalar, MpError> {
        let digits = x.digits();
        Ok(match self {
            Expr::Num(lit) => BigScalar::parse(lit, digits)?,
            Expr::X => x.clone(),
            Expr::Pi => BigScalar::pi(digits),
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => a.eval(x)?.checked_div(&b.eval(x)?)?,
            Expr::PowInt(a, n) => a.eval(x)?.powi(*n)?,
            Expr::Pow(a, b) => a.eval(x)?.powf(&b.eval(x)?)?,
            Expr::Call(f, a) => eval_elementary(*f, &a.eval(x)?)?,
        })
    }

    /// Machine-precision evaluation, used for quick sanity checks.
    pub fn eval_f64(&self, x: f64) -> f64 {
        match self {
            Expr::Num(lit) => lit.parse().unwrap_or(f64::NAN),
            Expr::X => x,
            Expr::Pi => std::f64::consts::PI,
            Expr::Neg(a) => -a.eval_f64(x),
            Expr::Add(a, b) => a.eval_f64(x) + b.eval_f64(x),
            Expr::Sub(a, b) => a.eval_f64(x) - b.eval_f64(x),
            Expr::Mul(a, b) => a.eval_f64(x) * b.eval_f64(x),
            Expr::Div(a, b) => a.eval_f64(x) / b.eval_f64(x),
            Expr::PowInt(a, n) => a.eval_f64(x).powi(*n),
            Expr::Pow(a, b) => a.eval_f64(x).powf(b.eval_f64(x)),
            Expr::Call(f, a) => {
                let v = a.eval_f64(x);
                match f {
                    Elementary::Exp => v.exp(),
                    Elementary::Log => v.ln(),
                    Elementary::Sin => v.sin(),
                    Elementary::Cos => v.cos(),
                    Elementary::Sqrt => v.sqrt(),
                    Elementary::Abs => v.abs(),
                }
            }
        }
    }

    fn is_const(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => true,
            Expr::X => false,
            Expr::Neg(a) | Expr::PowInt(a, _) | Expr::Call(_, a) => a.is_const(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.is_const() && b.is_const(),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(s) if s == "0")
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Num(s) if s == "1")
    }

    /// Symbolic derivative with respect to `x`.
    pub fn derivative(&self) -> Expr {
        if self.is_const() {
            return num("0");
        }
        match self {
            Expr::Num(_) | Expr::Pi => num("0"),
            Expr::X => num("1"),
            Expr::Neg(a) => neg(a.derivative()),
            Expr::Add(a, b) => add(a.derivative(), b.derivative()),
            Expr::Sub(a, b) => sub(a.derivative(), b.derivative()),
            Expr::Mul(a, b) => add(
                mul(a.derivative(), (**b).clone()),
                mul((**a).clone(), b.derivative()),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(sub(
                    mul(a.derivative(), (**b).clone()),
                    mul((**a).clone(), b.derivative()),
                )),
                Box::new(Expr::PowInt(b.clone(), 2)),
            ),
            Expr::PowInt(a, n) => {
                let outer = match n - 1 {
                    0 => num("1"),
                    1 => (**a).clone(),
                    k => Expr::PowInt(a.clone(), k),
                };
                mul(mul(num(&n.to_string()), outer), a.derivative())
            }
            Expr::Pow(a, b) => {
                // d(a^b) = a^b (b' ln a + b a'/a)
                let ln_a = Expr::Call(Elementary::Log, a.clone());
                let inner = add(
                    mul(b.derivative(), ln_a),
                    Expr::Div(Box::new(mul((**b).clone(), a.derivative())), a.clone()),
                );
                mul(self.clone(), inner)
            }
            Expr::Call(f, a) => {
                let da = a.derivative();
                let outer = match f {
                    Elementary::Exp => self.clone(),
                    Elementary::Log => Expr::Div(Box::new(num("1")), a.clone()),
                    Elementary::Sin => Expr::Call(Elementary::Cos, a.clone()),
                    Elementary::Cos => neg(Expr::Call(Elementary::Sin, a.clone())),
                    Elementary::Sqrt => {
                        Expr::Div(Box::new(num("1")), Box::new(mul(num("2"), self.clone())))
                    }
                    Elementary::Abs => Expr::Div(a.clone(), Box::new(self.clone())),
                };
                mul(outer, da)
            }
        }
    }
}

fn num(s: &str) -> Expr {
    Expr::Num(s.to_string())
}

fn neg(a: Expr) -> Expr {
    if a.is_zero() {
        a
    } else {
        Expr::Neg(Box::new(a))
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        b
    } else if b.is_zero() {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if b.is_zero() {
        a
    } else if a.is_zero() {
        neg(b)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if a.is_zero() || b.is_zero() {
        num("0")
    } else if a.is_one() {
        b
    } else if b.is_one() {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(s) => write!(f, "{s}"),
            Expr::X => write!(f, "x"),
            Expr::Pi => write!(f, "pi"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::PowInt(a, n) => write!(f, "({a}^({n}))"),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ParseError {
        ParseError {
            message: message.to_string(),
            offset: self.pos,
            source_text: self.src.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let exponent = self.unary()?;
        Ok(match integer_exponent(&exponent) {
            Some(n) => Expr::PowInt(Box::new(base), n),
            None => Expr::Pow(Box::new(base), Box::new(exponent)),
        })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = &self.src[start..self.pos];
                match ident {
                    "x" => Ok(Expr::X),
                    "pi" => Ok(Expr::Pi),
                    _ => {
                        let func: Elementary = ident.parse().map_err(|_| {
                            self.pos = start;
                            self.error(&format!("unknown identifier `{ident}`"))
                        })?;
                        if !self.eat(b'(') {
                            return Err(self.error("expected `(` after function name"));
                        }
                        let arg = self.expr()?;
                        if !self.eat(b')') {
                            return Err(self.error("expected `)`"));
                        }
                        Ok(Expr::Call(func, Box::new(arg)))
                    }
                }
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let bytes = self.bytes;
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let lit = &self.src[start..i];
        if lit.parse::<f64>().is_err() {
            return Err(self.error("malformed number"));
        }
        self.pos = i;
        Ok(Expr::Num(lit.to_string()))
    }
}

fn integer_exponent(e: &Expr) -> Option<i32> {
    match e {
        Expr::Num(s) => s.parse::<i32>().ok(),
        Expr::Neg(inner) => integer_exponent(inner).map(|n| -n),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(src: &str, x: f64) -> f64 {
        Expr::parse(src).unwrap().eval_f64(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(at("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(at("-x^2", 3.0), -9.0);
        assert_eq!(at("2^3^2", 0.0), 512.0);
        assert_eq!(at("8 / 4 / 2", 0.0), 1.0);
        assert_eq!(at("x^-2", 2.0), 0.25);
        assert_eq!(at("(1 - 2) - 3", 0.0), -4.0);
    }

    #[test]
    fn functions_and_constants() {
        assert!((at("sin(pi/2)", 0.0) - 1.0).abs() < 1e-15);
        assert!((at("10*x*exp(-x^2) - 1", 1.0) - (10.0 * (-1f64).exp() - 1.0)).abs() < 1e-15);
        assert_eq!(at("abs(x)", -3.0), 3.0);
        assert_eq!(at("1.5e2", 0.0), 150.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("tan(x)").is_err());
        assert!(Expr::parse("(x").is_err());
        assert!(Expr::parse("x y").is_err());
        assert!(Expr::parse("y").is_err());
    }

    #[test]
    fn integer_powers_of_negative_bases() {
        let e = Expr::parse("x^3").unwrap();
        assert!(matches!(e, Expr::PowInt(_, 3)));
        let v = e.eval(&BigScalar::from_i64(-2, 60)).unwrap();
        assert_eq!(v, BigScalar::from_i64(-8, 60));
    }

    #[test]
    fn big_eval_reports_domain_errors() {
        let e = Expr::parse("log(x)").unwrap();
        assert!(matches!(
            e.eval(&BigScalar::from_i64(-1, 60)),
            Err(MpError::Domain { .. })
        ));
        let e = Expr::parse("1/(2*x)").unwrap();
        assert_eq!(e.eval(&BigScalar::zero(60)), Err(MpError::DivisionByZero));
    }

    #[test]
    fn derivatives_match_central_differences() {
        let cases = [
            "10*x*exp(-x^2) - 1",
            "x^2*exp(x) - sin(x)",
            "sin(3*x) + x*cos(x)",
            "log(x) - x^3 + 2*sin(x)",
            "cos(x) + sin(2*x)*sqrt(1-x^2) + sin(x^2) + x^14 + x^3 + 1/(2*x)",
            "(1+x^3)*cos(pi*x/2) + sqrt(1-x^2)",
            "x^x",
            "abs(x - 1)",
        ];
        for src in cases {
            let e = Expr::parse(src).unwrap();
            let d = e.derivative();
            for &x in &[0.3, 0.55, 0.8] {
                let h = 1e-6;
                let fd = (e.eval_f64(x + h) - e.eval_f64(x - h)) / (2.0 * h);
                let exact = d.eval_f64(x);
                assert!(
                    (fd - exact).abs() < 1e-6 * (1.0 + exact.abs()),
                    "{src} at {x}: {fd} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let d = Expr::parse("2*(9*sqrt(2)+7*sqrt(3))/27")
            .unwrap()
            .derivative();
        assert!(d.is_zero());
    }
}

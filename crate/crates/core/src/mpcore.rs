//! Arbitrary-precision scalars.
//!
//! [`BigScalar`] wraps an MPFR float together with the decimal working
//! precision it was created at. Every value taking part in a solve carries
//! its precision, so a run at 4096 digits never silently mixes with 1000-digit
//! constants: binary operations produce a result at the larger of the two
//! precisions.
//!
//! The elementary functions are MPFR's (correctly rounded), which comfortably
//! meets the 10-ulp accuracy contract the solvers rely on.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use rug::float::{Constant, Round, Special};
use rug::ops::Pow;
use rug::Float;
use thiserror::Error;

/// Working precision used when nothing else is requested.
pub const DEFAULT_DIGITS: u32 = 1000;

/// Smallest precision accepted for a solver run.
pub const MIN_SOLVER_DIGITS: u32 = 50;

/// Binary guard bits carried on top of the requested decimal precision.
const GUARD_BITS: u32 = 8;

/// Machine-precision complex scalar used by the basin renderer only.
pub type ComplexScalar = num_complex::Complex64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MpError {
    #[error("{function}({argument}) is outside the real domain")]
    Domain {
        function: &'static str,
        argument: String,
    },
    #[error("division by zero")]
    DivisionByZero,
    #[error("invalid decimal literal `{0}`")]
    Parse(String),
    #[error("unknown elementary function `{0}`")]
    UnknownFunction(String),
}

/// Number of mantissa bits that hold `digits` significant decimal digits.
pub fn bits_for_digits(digits: u32) -> u32 {
    (f64::from(digits.max(1)) * std::f64::consts::LOG2_10).ceil() as u32 + GUARD_BITS
}

/// An arbitrary-precision real number with a decimal working precision.
#[derive(Clone)]
pub struct BigScalar {
    value: Float,
    digits: u32,
}

impl BigScalar {
    fn wrap(value: Float, digits: u32) -> Self {
        BigScalar { value, digits }
    }

    fn make<T>(digits: u32, val: T) -> Self
    where
        Float: rug::Assign<T>,
    {
        BigScalar::wrap(Float::with_val(bits_for_digits(digits), val), digits)
    }

    pub fn zero(digits: u32) -> Self {
        BigScalar::make(digits, 0)
    }

    pub fn one(digits: u32) -> Self {
        BigScalar::make(digits, 1)
    }

    pub fn from_i64(v: i64, digits: u32) -> Self {
        BigScalar::make(digits, v)
    }

    pub fn from_f64(v: f64, digits: u32) -> Self {
        BigScalar::make(digits, v)
    }

    pub fn pi(digits: u32) -> Self {
        BigScalar::make(digits, Constant::Pi)
    }

    /// `10^exp` at the given precision.
    pub fn pow10(exp: i32, digits: u32) -> Self {
        let ten = Float::with_val(bits_for_digits(digits), 10);
        BigScalar::wrap(ten.pow(exp), digits)
    }

    /// Parses a decimal literal such as `1.25`, `-3e-50` or `0.1`.
    pub fn parse(literal: &str, digits: u32) -> Result<Self, MpError> {
        let trimmed = literal.trim();
        let parsed = Float::parse(trimmed).map_err(|_| MpError::Parse(literal.to_string()))?;
        let value = Float::with_val(bits_for_digits(digits), parsed);
        if value.is_nan() {
            return Err(MpError::Parse(literal.to_string()));
        }
        Ok(BigScalar::wrap(value, digits))
    }

    /// Parses either a decimal literal or an exact ratio `p/q` of decimals.
    pub fn parse_ratio(literal: &str, digits: u32) -> Result<Self, MpError> {
        match literal.split_once('/') {
            Some((num, den)) => {
                let num = BigScalar::parse(num, digits)?;
                let den = BigScalar::parse(den, digits)?;
                num.checked_div(&den)
            }
            None => BigScalar::parse(literal, digits),
        }
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn as_float(&self) -> &Float {
        &self.value
    }

    /// Re-rounds the value to a different working precision.
    pub fn with_digits(&self, digits: u32) -> Self {
        BigScalar::make(digits, &self.value)
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    pub fn is_sign_negative(&self) -> bool {
        self.value.is_sign_negative()
    }

    pub fn abs(&self) -> Self {
        BigScalar::wrap(self.value.clone().abs(), self.digits)
    }

    pub fn square(&self) -> Self {
        BigScalar::wrap(self.value.clone().square(), self.digits)
    }

    /// Integer power. A negative exponent on zero is a division by zero.
    pub fn powi(&self, n: i32) -> Result<Self, MpError> {
        if n < 0 && self.is_zero() {
            return Err(MpError::DivisionByZero);
        }
        Ok(BigScalar::wrap(self.value.clone().pow(n), self.digits))
    }

    /// Real power `self^e` for `self > 0`.
    pub fn powf(&self, e: &BigScalar) -> Result<Self, MpError> {
        if !(self.value > 0) {
            return Err(MpError::Domain {
                function: "pow",
                argument: self.to_sci_string_with(20),
            });
        }
        let digits = self.digits.max(e.digits);
        Ok(BigScalar::make(digits, (&self.value).pow(&e.value)))
    }

    /// Division that refuses an exactly zero divisor.
    pub fn checked_div(&self, rhs: &BigScalar) -> Result<Self, MpError> {
        if rhs.is_zero() {
            return Err(MpError::DivisionByZero);
        }
        let digits = self.digits.max(rhs.digits);
        Ok(BigScalar::make(digits, &self.value / &rhs.value))
    }

    pub fn recip(&self) -> Result<Self, MpError> {
        BigScalar::one(self.digits).checked_div(self)
    }

    pub fn exp(&self) -> Self {
        BigScalar::wrap(self.value.clone().exp(), self.digits)
    }

    pub fn ln(&self) -> Result<Self, MpError> {
        if !(self.value > 0) {
            return Err(MpError::Domain {
                function: "log",
                argument: self.to_sci_string_with(20),
            });
        }
        Ok(BigScalar::wrap(self.value.clone().ln(), self.digits))
    }

    pub fn sin(&self) -> Self {
        BigScalar::wrap(self.value.clone().sin(), self.digits)
    }

    pub fn cos(&self) -> Self {
        BigScalar::wrap(self.value.clone().cos(), self.digits)
    }

    pub fn sqrt(&self) -> Result<Self, MpError> {
        if self.value < 0 {
            return Err(MpError::Domain {
                function: "sqrt",
                argument: self.to_sci_string_with(20),
            });
        }
        Ok(BigScalar::wrap(self.value.clone().sqrt(), self.digits))
    }

    /// `log10 |self|` as a machine float; `-inf` for zero.
    ///
    /// Works for magnitudes far outside the `f64` range (e.g. `1e-3000`).
    pub fn log10_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let low = Float::with_val(64, self.value.abs_ref());
        low.log10().to_f64()
    }

    /// Scientific notation at the full working precision, trailing zeros
    /// trimmed: `1.25e0`, `-3.3333333333e-1`.
    pub fn to_sci_string(&self) -> String {
        self.to_sci_string_with(self.digits as usize)
    }

    /// Scientific notation with at most `sig` significant digits.
    pub fn to_sci_string_with(&self, sig: usize) -> String {
        if self.value.is_nan() {
            return "NaN".to_string();
        }
        if self.value.is_infinite() {
            return if self.is_sign_negative() {
                "-inf"
            } else {
                "inf"
            }
            .to_string();
        }
        if self.is_zero() {
            return "0e0".to_string();
        }
        let (negative, mantissa, exp) = decimal_parts(&self.value, sig.max(1), Round::Nearest);
        let trimmed = mantissa.trim_end_matches('0');
        let (head, tail) = trimmed.split_at(1);
        let sign = if negative { "-" } else { "" };
        if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        }
    }

    /// Residual notation `0.Xe-N` with a mantissa in `[0.1, 1)`, truncated to one digit.
    pub fn to_short_exp(&self) -> String {
        if !self.is_finite() {
            return self.to_sci_string_with(1);
        }
        if self.is_zero() {
            return "0".to_string();
        }
        let (negative, mantissa, exp) = decimal_parts(&self.value, 1, Round::Zero);
        let sign = if negative { "-" } else { "" };
        let shifted = exp + 1;
        if shifted == 0 {
            format!("{sign}0.{mantissa}")
        } else {
            format!("{sign}0.{mantissa}e{shifted}")
        }
    }
}

/// Sign, significant digits and decimal exponent for `d.ddd × 10^exp`.
fn decimal_parts(value: &Float, sig: usize, round: Round) -> (bool, String, i64) {
    let (negative, digits, exp) = value.to_sign_string_exp_round(10, Some(sig), round);
    // MPFR returns 0.ddd × 10^exp
    let exp = exp.map(i64::from).unwrap_or(0) - 1;
    (negative, digits, exp)
}

impl fmt::Debug for BigScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "BigScalar({}, {} digits)",
            self.to_sci_string_with(30),
            self.digits
        )
    }
}

impl fmt::Display for BigScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => f.write_str(&self.to_sci_string_with(p)),
            None => f.write_str(&self.to_sci_string()),
        }
    }
}

impl PartialEq for BigScalar {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl PartialOrd for BigScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value.partial_cmp(&other.value)
    }
}

impl PartialEq<f64> for BigScalar {
    fn eq(&self, other: &f64) -> bool {
        self.value == *other
    }
}

impl PartialOrd<f64> for BigScalar {
    fn partial_cmp(&self, other: &f64) -> Option<Ordering> {
        self.value.partial_cmp(other)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl<'a> $trait<&'a BigScalar> for &'a BigScalar {
            type Output = BigScalar;
            fn $method(self, rhs: &'a BigScalar) -> BigScalar {
                let digits = self.digits.max(rhs.digits);
                BigScalar::make(digits, &self.value $op &rhs.value)
            }
        }
        impl $trait<BigScalar> for BigScalar {
            type Output = BigScalar;
            fn $method(self, rhs: BigScalar) -> BigScalar {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a BigScalar> for BigScalar {
            type Output = BigScalar;
            fn $method(self, rhs: &'a BigScalar) -> BigScalar {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<BigScalar> for &'a BigScalar {
            type Output = BigScalar;
            fn $method(self, rhs: BigScalar) -> BigScalar {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, +);
forward_binop!(Sub, sub, -);
forward_binop!(Mul, mul, *);

impl Neg for BigScalar {
    type Output = BigScalar;
    fn neg(self) -> BigScalar {
        BigScalar::wrap(-self.value, self.digits)
    }
}

impl Neg for &BigScalar {
    type Output = BigScalar;
    fn neg(self) -> BigScalar {
        BigScalar::wrap(-self.value.clone(), self.digits)
    }
}

/// The elementary functions the problem suite is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Elementary {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Elementary {
    pub const ALL: [Elementary; 6] = [
        Elementary::Exp,
        Elementary::Log,
        Elementary::Sin,
        Elementary::Cos,
        Elementary::Sqrt,
        Elementary::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Elementary::Exp => "exp",
            Elementary::Log => "log",
            Elementary::Sin => "sin",
            Elementary::Cos => "cos",
            Elementary::Sqrt => "sqrt",
            Elementary::Abs => "abs",
        }
    }
}

impl FromStr for Elementary {
    type Err = MpError;

    fn from_str(s: &str) -> Result<Self, MpError> {
        Elementary::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| MpError::UnknownFunction(s.to_string()))
    }
}

/// Evaluates one of the supported elementary functions.
pub fn eval_elementary(name: Elementary, x: &BigScalar) -> Result<BigScalar, MpError> {
    match name {
        Elementary::Exp => Ok(x.exp()),
        Elementary::Log => x.ln(),
        Elementary::Sin => Ok(x.sin()),
        Elementary::Cos => Ok(x.cos()),
        Elementary::Sqrt => x.sqrt(),
        Elementary::Abs => Ok(x.abs()),
    }
}

/// `10^(10 - digits) * max(1, |x|)`: node separations at or below this are
/// treated as coincident when forming divided differences.
pub fn ulp_threshold(x: &BigScalar) -> BigScalar {
    let scale = if x.value.clone().abs() > 1 {
        x.abs()
    } else {
        BigScalar::one(x.digits)
    };
    let exp = 10 - i32::try_from(x.digits).unwrap_or(i32::MAX);
    &BigScalar::pow10(exp, x.digits) * &scale
}

/// Positive infinity at the given precision; used as the "no residual" marker.
pub fn infinity(digits: u32) -> BigScalar {
    BigScalar::make(digits, Special::Infinity)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_identities() {
        let one = BigScalar::one(100);
        assert_eq!(eval_elementary(Elementary::Sqrt, &one).unwrap(), one);
        assert!(eval_elementary(Elementary::Log, &one).unwrap().is_zero());
        let zero = BigScalar::zero(100);
        assert_eq!(eval_elementary(Elementary::Exp, &zero).unwrap(), one);
        assert_eq!(eval_elementary(Elementary::Abs, &-&one).unwrap(), one);
    }

    #[test]
    fn domain_errors() {
        let zero = BigScalar::zero(60);
        let neg = BigScalar::from_i64(-2, 60);
        assert!(matches!(
            eval_elementary(Elementary::Log, &zero),
            Err(MpError::Domain {
                function: "log",
                ..
            })
        ));
        assert!(matches!(
            eval_elementary(Elementary::Sqrt, &neg),
            Err(MpError::Domain {
                function: "sqrt",
                ..
            })
        ));
        assert!(eval_elementary(Elementary::Sqrt, &zero).unwrap().is_zero());
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let one = BigScalar::one(60);
        let zero = BigScalar::zero(60);
        assert_eq!(one.checked_div(&zero), Err(MpError::DivisionByZero));
        assert_eq!(zero.powi(-1), Err(MpError::DivisionByZero));
        assert_eq!(zero.recip(), Err(MpError::DivisionByZero));
    }

    #[test]
    fn sin_of_pi_vanishes() {
        let pi = BigScalar::pi(100);
        let s = eval_elementary(Elementary::Sin, &pi).unwrap();
        assert!(s.abs() < BigScalar::pow10(-95, 100));
        // the residual is pi - pi_100; check against a 200-digit value
        let wide = BigScalar::pi(200);
        let expected = &wide - &pi.with_digits(200);
        let diff = (&s.with_digits(200) - &expected).abs();
        assert!(diff < BigScalar::pow10(-190, 200));
    }

    #[test]
    fn ulp_threshold_formula() {
        let t = ulp_threshold(&BigScalar::one(1000));
        assert_eq!(t, BigScalar::pow10(-990, 1000));
        let t = ulp_threshold(&BigScalar::zero(100));
        assert_eq!(t, BigScalar::pow10(-90, 100));
        let t = ulp_threshold(&BigScalar::from_i64(1_000_000, 100));
        let rel = (&t - &BigScalar::pow10(-84, 100)).abs();
        assert!(rel < BigScalar::pow10(-180, 100));
    }

    #[test]
    fn printing() {
        let x = BigScalar::parse("1.25", 50).unwrap();
        assert_eq!(x.to_sci_string(), "1.25e0");
        let x = BigScalar::parse("-3e-50", 60).unwrap();
        assert_eq!(x.to_sci_string(), "-3e-50");
        let third = BigScalar::parse_ratio("1/3", 50).unwrap();
        assert_eq!(third.to_sci_string_with(5), "3.3333e-1");
        assert_eq!(BigScalar::zero(50).to_sci_string(), "0e0");
    }

    #[test]
    fn short_exponent_form() {
        let r = BigScalar::parse("4.4e-81", 100).unwrap();
        assert_eq!(r.to_short_exp(), "0.4e-80");
        let r = BigScalar::parse("1.04e-101", 100).unwrap();
        assert_eq!(r.to_short_exp(), "0.1e-100");
        let r = BigScalar::parse("9.97e-60", 100).unwrap();
        assert_eq!(r.to_short_exp(), "0.9e-59");
        let r = BigScalar::parse("7.95e-353", 400).unwrap();
        assert_eq!(r.to_short_exp(), "0.7e-352");
        let r = BigScalar::parse("0.26", 100).unwrap();
        assert_eq!(r.to_short_exp(), "0.2");
    }

    #[test]
    fn log10_beyond_f64_range() {
        let tiny = BigScalar::pow10(-3000, 3100);
        assert!((tiny.log10_abs() + 3000.0).abs() < 1e-9);
        assert_eq!(BigScalar::zero(60).log10_abs(), f64::NEG_INFINITY);
    }

    #[test]
    fn mixed_precision_takes_the_larger() {
        let a = BigScalar::one(60);
        let b = BigScalar::one(300);
        assert_eq!((&a + &b).digits(), 300);
        assert_eq!(a.checked_div(&b).unwrap().digits(), 300);
    }

    #[test]
    fn elementary_names_round_trip() {
        for e in Elementary::ALL {
            assert_eq!(e.name().parse::<Elementary>().unwrap(), e);
        }
        assert!("tan".parse::<Elementary>().is_err());
    }
}

//! Arithmetic substrate.
//!
//! Every numeric coefficient lives in a type implementing [`Scalar`]:
//! [`Rational`] and [`GaussRational`] are exact, [`crate::Complex64`] and the
//! plain float types compare against an absolute tolerance.
//!
//! A run picks one of them through [`ArithmeticContext::select`].

use std::fmt::{self, Debug};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{GaussRational, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalarError {
    #[error("tolerance must be a finite nonnegative number, got {0}")]
    BadTolerance(f64),
    #[error("float mode needs a strictly positive tolerance")]
    ZeroToleranceInFloat,
    #[error("parameter {0} is irrational; exact arithmetic modes cannot represent it")]
    IrrationalInExactMode(String),
    #[error("imaginary coefficients need exact-gaussian or float arithmetic")]
    NeedsComplex,
    #[error("cannot parse scalar from {0:?}")]
    Parse(String),
    #[error("unknown arithmetic mode {0:?}")]
    UnknownMode(String),
}

/// Representation selected for a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArithmeticMode {
    ExactRational,
    ExactGaussian,
    Float,
}

impl ArithmeticMode {
    pub fn is_exact(self) -> bool {
        !matches!(self, ArithmeticMode::Float)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArithmeticMode::ExactRational => "exact-rational",
            ArithmeticMode::ExactGaussian => "exact-gaussian",
            ArithmeticMode::Float => "float",
        }
    }
}

impl fmt::Display for ArithmeticMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArithmeticMode {
    type Err = ScalarError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "exact-rational" | "rational" => Ok(ArithmeticMode::ExactRational),
            "exact-gaussian" | "gaussian" => Ok(ArithmeticMode::ExactGaussian),
            "float" => Ok(ArithmeticMode::Float),
            other => Err(ScalarError::UnknownMode(other.to_string())),
        }
    }
}

/// A user-facing real parameter (α0, λ, ...). Rational whenever the input
/// allows it; irrational inputs such as `sqrt(1/2)` only carry a float.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Rational(BigRational),
    Real { value: f64, source: String },
}

impl Param {
    pub fn rational(num: i64, den: i64) -> Self {
        Param::Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, Param::Rational(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Param::Rational(q) => q.to_f64().unwrap_or(f64::NAN),
            Param::Real { value, .. } => *value,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Param::Rational(q) => q.is_zero(),
            Param::Real { value, .. } => *value == 0.0,
        }
    }

    pub fn to_scalar<S: Scalar>(&self) -> Result<S, ScalarError> {
        match self {
            Param::Rational(q) => Ok(S::from_rational(q)),
            Param::Real { value, source } => S::from_f64(*value)
                .ok_or_else(|| ScalarError::IrrationalInExactMode(source.clone())),
        }
    }

    pub fn scaled(&self, k: i64) -> Param {
        match self {
            Param::Rational(q) => Param::Rational(q * BigRational::from_integer(k.into())),
            Param::Real { value, source } => Param::Real {
                value: value * k as f64,
                source: format!("{k}*{source}"),
            },
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Rational(q) => f.write_str(&render_rational(q)),
            Param::Real { value, .. } => write!(f, "{value}"),
        }
    }
}

impl FromStr for Param {
    type Err = ScalarError;

    /// Accepts `p/q`, integers, exact decimals (`0.125`, `1e-3`) and
    /// `sqrt(x)` with rational `x`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Some(inner) = t.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
            let q = parse_rational(inner)?;
            if q.is_negative() {
                return Err(ScalarError::Parse(s.to_string()));
            }
            if let Some(root) = rational_sqrt(&q) {
                return Ok(Param::Rational(root));
            }
            let value = q.to_f64().ok_or_else(|| ScalarError::Parse(s.to_string()))?.sqrt();
            return Ok(Param::Real { value, source: t.to_string() });
        }
        parse_rational(t).map(Param::Rational)
    }
}

fn rational_sqrt(q: &BigRational) -> Option<BigRational> {
    let n = q.numer();
    let d = q.denom();
    let rn = n.sqrt();
    let rd = d.sqrt();
    (&rn * &rn == *n && &rd * &rd == *d).then(|| BigRational::new(rn, rd))
}

/// Parses `p/q`, `p`, or an exact decimal with optional exponent.
pub fn parse_rational(s: &str) -> Result<BigRational, ScalarError> {
    let err = || ScalarError::Parse(s.to_string());
    let t = s.trim();
    if t.is_empty() {
        return Err(err());
    }
    if let Some((p, q)) = t.split_once('/') {
        let p = BigInt::from_str(p.trim()).map_err(|_| err())?;
        let q = BigInt::from_str(q.trim()).map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(p, q));
    }
    let (mantissa, exponent) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().map_err(|_| err())?),
        None => (t, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(BigInt::from_str(&all_digits).map_err(|_| err())?);
    let shift = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    if shift >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, shift as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, (-shift) as usize));
    }
    Ok(if negative { -value } else { value })
}

/// Always renders with an explicit denominator, e.g. `3/1`, `-1/4`.
pub fn render_rational(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Numeric coefficient type. Exact implementations compare with `==`;
/// floating implementations compare against a caller-supplied tolerance.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + for<'a> AddAssign<&'a Self>
    + for<'a> Mul<&'a Self, Output = Self>
{
    const MODE: ArithmeticMode;

    fn from_rational(q: &BigRational) -> Self;

    /// `None` for exact representations.
    fn from_f64(x: f64) -> Option<Self>;

    /// `None` when the representation is purely real.
    fn imaginary_unit() -> Option<Self>;

    fn conj(&self) -> Self;

    fn re_f64(&self) -> f64;

    fn im_f64(&self) -> f64;

    /// Exact zero test in exact modes, `|x| <= tol` otherwise.
    fn is_negligible(&self, tol: f64) -> bool;

    /// Nearest integer if `self` is (within `tol` of) an integer.
    fn to_integer(&self, tol: f64) -> Option<i64>;

    /// Real part as `p/q` (exact) or a shortest round-trip decimal (float).
    fn render_re(&self) -> String;

    fn render_im(&self) -> String;

    fn from_parts(re: &str, im: &str) -> Result<Self, ScalarError>;

    fn from_i64(n: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(n.into()))
    }

    fn from_bigint(n: &BigInt) -> Self {
        Self::from_rational(&BigRational::from_integer(n.clone()))
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_rational(&BigRational::new(num.into(), den.into()))
    }

    fn abs_f64(&self) -> f64 {
        self.re_f64().hypot(self.im_f64())
    }

    fn is_exact() -> bool {
        Self::MODE.is_exact()
    }
}

fn rational_to_integer(q: &BigRational) -> Option<i64> {
    q.is_integer().then(|| q.to_integer().to_i64()).flatten()
}

impl Scalar for Rational {
    const MODE: ArithmeticMode = ArithmeticMode::ExactRational;

    fn from_rational(q: &BigRational) -> Self {
        q.clone()
    }

    fn from_f64(_: f64) -> Option<Self> {
        None
    }

    fn imaginary_unit() -> Option<Self> {
        None
    }

    fn conj(&self) -> Self {
        self.clone()
    }

    fn re_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn im_f64(&self) -> f64 {
        0.0
    }

    fn is_negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn to_integer(&self, _tol: f64) -> Option<i64> {
        rational_to_integer(self)
    }

    fn render_re(&self) -> String {
        render_rational(self)
    }

    fn render_im(&self) -> String {
        "0/1".to_string()
    }

    fn from_parts(re: &str, im: &str) -> Result<Self, ScalarError> {
        let im_q = parse_rational(im)?;
        if !im_q.is_zero() {
            return Err(ScalarError::NeedsComplex);
        }
        parse_rational(re)
    }
}

impl Scalar for GaussRational {
    const MODE: ArithmeticMode = ArithmeticMode::ExactGaussian;

    fn from_rational(q: &BigRational) -> Self {
        Complex::new(q.clone(), BigRational::zero())
    }

    fn from_f64(_: f64) -> Option<Self> {
        None
    }

    fn imaginary_unit() -> Option<Self> {
        Some(Complex::new(BigRational::zero(), BigRational::one()))
    }

    fn conj(&self) -> Self {
        Complex::conj(self)
    }

    fn re_f64(&self) -> f64 {
        self.re.to_f64().unwrap_or(f64::NAN)
    }

    fn im_f64(&self) -> f64 {
        self.im.to_f64().unwrap_or(f64::NAN)
    }

    fn is_negligible(&self, _tol: f64) -> bool {
        self.is_zero()
    }

    fn to_integer(&self, _tol: f64) -> Option<i64> {
        if self.im.is_zero() {
            rational_to_integer(&self.re)
        } else {
            None
        }
    }

    fn render_re(&self) -> String {
        render_rational(&self.re)
    }

    fn render_im(&self) -> String {
        render_rational(&self.im)
    }

    fn from_parts(re: &str, im: &str) -> Result<Self, ScalarError> {
        Ok(Complex::new(parse_rational(re)?, parse_rational(im)?))
    }
}

macro_rules! float_scalar {
    ($t:ty, $mode:expr) => {
        impl Scalar for $t {
            const MODE: ArithmeticMode = $mode;

            fn from_rational(q: &BigRational) -> Self {
                q.to_f64().unwrap_or(f64::NAN) as $t
            }

            fn from_f64(x: f64) -> Option<Self> {
                Some(x as $t)
            }

            fn imaginary_unit() -> Option<Self> {
                None
            }

            fn conj(&self) -> Self {
                *self
            }

            fn re_f64(&self) -> f64 {
                *self as f64
            }

            fn im_f64(&self) -> f64 {
                0.0
            }

            fn is_negligible(&self, tol: f64) -> bool {
                (*self as f64).abs() <= tol
            }

            fn to_integer(&self, tol: f64) -> Option<i64> {
                let r = (*self as f64).round();
                ((*self as f64 - r).abs() <= tol).then_some(r as i64)
            }

            fn render_re(&self) -> String {
                format!("{}", self)
            }

            fn render_im(&self) -> String {
                "0".to_string()
            }

            fn from_parts(re: &str, im: &str) -> Result<Self, ScalarError> {
                let im: f64 = im.trim().parse().map_err(|_| ScalarError::Parse(im.to_string()))?;
                if im != 0.0 {
                    return Err(ScalarError::NeedsComplex);
                }
                re.trim().parse().map_err(|_| ScalarError::Parse(re.to_string()))
            }
        }
    };
}

float_scalar!(f64, ArithmeticMode::Float);
float_scalar!(f32, ArithmeticMode::Float);

macro_rules! complex_float_scalar {
    ($t:ty) => {
        impl Scalar for Complex<$t> {
            const MODE: ArithmeticMode = ArithmeticMode::Float;

            fn from_rational(q: &BigRational) -> Self {
                Complex::new(q.to_f64().unwrap_or(f64::NAN) as $t, 0.0)
            }

            fn from_f64(x: f64) -> Option<Self> {
                Some(Complex::new(x as $t, 0.0))
            }

            fn imaginary_unit() -> Option<Self> {
                Some(Complex::new(0.0, 1.0))
            }

            fn conj(&self) -> Self {
                Complex::conj(self)
            }

            fn re_f64(&self) -> f64 {
                self.re as f64
            }

            fn im_f64(&self) -> f64 {
                self.im as f64
            }

            fn is_negligible(&self, tol: f64) -> bool {
                (self.norm() as f64) <= tol
            }

            fn to_integer(&self, tol: f64) -> Option<i64> {
                let r = (self.re as f64).round();
                ((self.re as f64 - r).abs() <= tol && (self.im as f64).abs() <= tol)
                    .then_some(r as i64)
            }

            fn render_re(&self) -> String {
                format!("{}", self.re)
            }

            fn render_im(&self) -> String {
                format!("{}", self.im)
            }

            fn from_parts(re: &str, im: &str) -> Result<Self, ScalarError> {
                let re: $t = re.trim().parse().map_err(|_| ScalarError::Parse(re.to_string()))?;
                let im: $t = im.trim().parse().map_err(|_| ScalarError::Parse(im.to_string()))?;
                Ok(Complex::new(re, im))
            }
        }
    };
}

complex_float_scalar!(f64);
complex_float_scalar!(f32);

/// Run-wide arithmetic settings: the chosen representation plus the absolute
/// tolerance used by every comparison in float mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArithmeticContext {
    pub mode: ArithmeticMode,
    pub tolerance: f64,
}

impl ArithmeticContext {
    /// Validates the mode against the run parameters. Exact modes ignore the
    /// tolerance and refuse irrational parameters.
    pub fn select(
        mode: ArithmeticMode,
        tolerance: f64,
        params: &[&Param],
    ) -> Result<Self, ScalarError> {
        if !tolerance.is_finite() || tolerance < 0.0 {
            return Err(ScalarError::BadTolerance(tolerance));
        }
        if mode == ArithmeticMode::Float && tolerance == 0.0 {
            return Err(ScalarError::ZeroToleranceInFloat);
        }
        if mode.is_exact() {
            if let Some(Param::Real { source, .. }) = params.iter().find(|p| !p.is_rational()) {
                return Err(ScalarError::IrrationalInExactMode(source.clone()));
            }
        }
        let tolerance = if mode.is_exact() { 0.0 } else { tolerance };
        Ok(ArithmeticContext { mode, tolerance })
    }

    /// Fails unless the mode can carry an imaginary unit.
    pub fn require_complex(&self) -> Result<(), ScalarError> {
        match self.mode {
            ArithmeticMode::ExactRational => Err(ScalarError::NeedsComplex),
            _ => Ok(()),
        }
    }

    pub fn negligible<S: Scalar>(&self, x: &S) -> bool {
        x.is_negligible(self.tolerance)
    }
}

/// Shortest round-trip decimal for floats, `p/q` for exact values.
pub fn render_f64(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Complex64;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn exact_rational_context_gives_exact_dimension() {
        let alpha = Param::rational(1, 2);
        let ctx = ArithmeticContext::select(ArithmeticMode::ExactRational, 0.0, &[&alpha]).unwrap();
        assert_eq!(ctx.mode, ArithmeticMode::ExactRational);
        let a: Rational = alpha.to_scalar().unwrap();
        let d = &a * &a / Rational::from_i64(2);
        assert_eq!(d, q(1, 8));
    }

    #[test]
    fn float_context_near_threshold() {
        let alpha: Param = "0.70710678".parse().unwrap();
        let ctx = ArithmeticContext::select(ArithmeticMode::Float, 1e-12, &[&alpha]).unwrap();
        assert_eq!(ctx.tolerance, 1e-12);
        let a: Complex64 = alpha.to_scalar().unwrap();
        assert!((a.re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
    }

    #[test]
    fn gaussian_context_carries_i_lambda_m() {
        let lambda = Param::rational(1, 4);
        let ctx = ArithmeticContext::select(ArithmeticMode::ExactGaussian, 0.0, &[&lambda]).unwrap();
        ctx.require_complex().unwrap();
        let i = GaussRational::imaginary_unit().unwrap();
        let l: GaussRational = lambda.to_scalar().unwrap();
        let coeff = i * l * GaussRational::from_i64(1);
        assert_eq!(coeff, Complex::new(q(0, 1), q(1, 4)));
    }

    #[test]
    fn irrational_parameter_refused_in_exact_modes() {
        let alpha: Param = "sqrt(1/2)".parse().unwrap();
        assert!(!alpha.is_rational());
        for mode in [ArithmeticMode::ExactRational, ArithmeticMode::ExactGaussian] {
            assert!(matches!(
                ArithmeticContext::select(mode, 0.0, &[&alpha]),
                Err(ScalarError::IrrationalInExactMode(_))
            ));
        }
        assert!(ArithmeticContext::select(ArithmeticMode::Float, 1e-12, &[&alpha]).is_ok());
        assert!(alpha.to_scalar::<Rational>().is_err());
    }

    #[test]
    fn perfect_square_roots_stay_rational() {
        let p: Param = "sqrt(1/4)".parse().unwrap();
        assert_eq!(p, Param::rational(1, 2));
    }

    #[test]
    fn zero_tolerance_only_in_exact_modes() {
        assert_eq!(
            ArithmeticContext::select(ArithmeticMode::Float, 0.0, &[]),
            Err(ScalarError::ZeroToleranceInFloat)
        );
        assert!(ArithmeticContext::select(ArithmeticMode::ExactRational, 0.0, &[]).is_ok());
        assert!(ArithmeticContext::select(ArithmeticMode::Float, -1.0, &[]).is_err());
    }

    #[test]
    fn rational_only_mode_rejects_imaginary_unit() {
        let ctx = ArithmeticContext::select(ArithmeticMode::ExactRational, 0.0, &[]).unwrap();
        assert_eq!(ctx.require_complex(), Err(ScalarError::NeedsComplex));
        assert!(Rational::imaginary_unit().is_none());
    }

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_rational("0.125").unwrap(), q(1, 8));
        assert_eq!(parse_rational("-3/6").unwrap(), q(-1, 2));
        assert_eq!(parse_rational("1e-3").unwrap(), q(1, 1000));
        assert_eq!(parse_rational("2.5E2").unwrap(), q(250, 1));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
    }

    #[test]
    fn rendering_round_trips() {
        let z = Complex::new(q(-3, 4), q(5, 1));
        let back = GaussRational::from_parts(&z.render_re(), &z.render_im()).unwrap();
        assert_eq!(back, z);
        assert_eq!(q(3, 1).render_re(), "3/1");
        let x = Complex64::new(0.1, -2.5);
        assert_eq!(Complex64::from_parts(&x.render_re(), &x.render_im()).unwrap(), x);
    }

    #[test]
    fn integer_detection() {
        assert_eq!(Scalar::to_integer(&q(6, 3), 0.0), Some(2));
        assert_eq!(Scalar::to_integer(&q(1, 3), 0.0), None);
        assert_eq!(Complex64::new(2.0 + 1e-14, 0.0).to_integer(1e-12), Some(2));
        assert_eq!(Complex64::new(2.0, 1e-3).to_integer(1e-12), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rat() -> impl Strategy<Value = Rational> {
            (-1000i64..1000, 1i64..1000).prop_map(|(n, d)| q(n, d))
        }

        fn gauss() -> impl Strategy<Value = GaussRational> {
            (rat(), rat()).prop_map(|(a, b)| Complex::new(a, b))
        }

        proptest! {
            #[test]
            fn additive_and_multiplicative_inverses(a in gauss()) {
                prop_assert!((a.clone() + (-a.clone())).is_zero());
                if !a.is_zero() {
                    prop_assert!((a.clone() * (GaussRational::one() / a.clone())).is_one());
                }
            }

            #[test]
            fn conjugation_is_involution_and_norm_nonnegative(a in gauss()) {
                prop_assert_eq!(Scalar::conj(&Scalar::conj(&a)), a.clone());
                let n = a.clone() * Scalar::conj(&a);
                prop_assert!(n.im.is_zero());
                prop_assert!(!n.re.is_negative());
            }
        }
    }
}

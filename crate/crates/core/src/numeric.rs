//! Exact rationals and the small numeric abstraction shared by the exact and
//! floating-point solvers.
//!
//! All model data and every reported distance are [`Rational`]s. The
//! transport, linear-solve and policy-iteration routines are generic over
//! [`Scalar`] so the local-search minimizer can run them on `f64` and then
//! confirm its best point exactly.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact fraction, always kept in lowest terms with a positive denominator.
pub type Rational = num_rational::BigRational;

pub fn rat(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

pub fn int(value: i64) -> Rational {
    Rational::from_integer(BigInt::from(value))
}

/// Parses `"a/b"` or `"a"` into a reduced rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let bad = || Error::Syntax(format!("malformed rational `{text}`"));
    let (num, den) = match text.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(Error::Syntax(format!("zero denominator in `{text}`")));
    }
    Ok(Rational::new(num, den))
}

/// Canonical text of a rational: `"a/b"` in lowest terms, or `"a"` for integers.
pub fn format_rational(value: &Rational) -> String {
    value.to_string()
}

pub fn to_f64(value: &Rational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// Simplest rational (smallest denominator) within `tol` of `x`, via the
/// Stern-Brocot descent on continued fractions.
pub fn simplest_within(x: f64, tol: f64) -> Rational {
    if !x.is_finite() {
        return Rational::zero();
    }
    let (lo, hi) = (x - tol, x + tol);
    // Convergents p/q of x until one lands in [lo, hi].
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        let ai = a as i128;
        let (p2, q2) = (ai * p1 + p0, ai * q1 + q0);
        if q2 != 0 {
            let approx = p2 as f64 / q2 as f64;
            if approx >= lo && approx <= hi {
                return Rational::new(BigInt::from(p2), BigInt::from(q2));
            }
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = rem - a;
        if frac.abs() < 1e-300 || q1.abs() > 1 << 60 {
            break;
        }
        rem = 1.0 / frac;
    }
    Rational::new(BigInt::from(p1), BigInt::from(q1.max(1)))
}

/// Ordered field used by the generic solvers.
///
/// For [`Rational`] every predicate is exact. For `f64` the sign tests use an
/// absolute tolerance of [`F64_TOL`].
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn from_rational(value: &Rational) -> Self;
    fn as_f64(&self) -> f64;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn is_nearly_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
    /// Larger is a better elimination pivot.
    fn pivot_weight(&self) -> f64;
}

pub const F64_TOL: f64 = 1e-12;

impl Scalar for Rational {
    fn from_rational(value: &Rational) -> Self {
        value.clone()
    }
    fn as_f64(&self) -> f64 {
        to_f64(self)
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn pivot_weight(&self) -> f64 {
        // Prefer short numerators/denominators to limit coefficient growth.
        if self.is_zero() {
            0.0
        } else {
            1.0 / (1.0 + (self.numer().bits() + self.denom().bits()) as f64)
        }
    }
}

impl Scalar for f64 {
    fn from_rational(value: &Rational) -> Self {
        to_f64(value)
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn is_pos(&self) -> bool {
        *self > F64_TOL
    }
    fn is_neg(&self) -> bool {
        *self < -F64_TOL
    }
    fn pivot_weight(&self) -> f64 {
        self.abs()
    }
}

//! Arithmetic backends shared by the fan, LP and norm code.
//!
//! `f64` decides signs with a fixed tolerance; `BigRational` decides them
//! exactly and is the referee for floating results.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Tolerance for sign decisions in floating mode.
pub const SIGN_TOL: f64 = 1e-9;

/// Tolerance for pivot and reduced-cost decisions inside the floating simplex.
pub const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    #[default]
    F64,
    Rational,
}

impl Arithmetic {
    pub fn as_str(self) -> &'static str {
        match self {
            Arithmetic::F64 => "f64",
            Arithmetic::Rational => "rational",
        }
    }
}

pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    const EXACT: bool;
    const MODE: Arithmetic;

    fn zero() -> Self;
    fn one() -> Self;
    /// Exact conversion for rationals (every finite double is a dyadic rational).
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;
    fn sign_tol() -> Self;
    fn pivot_tol() -> Self;
    /// Lossless text form: shortest round-trip decimal or `p/q`.
    fn to_text(&self) -> String;
    fn from_text(s: &str) -> Option<Self>;

    fn is_zero_tol(&self) -> bool {
        self.abs() <= Self::sign_tol()
    }

    /// -1, 0 or +1 with the sign tolerance applied.
    fn sign(&self) -> i8 {
        let tol = Self::sign_tol();
        if *self > tol {
            1
        } else if *self < -tol {
            -1
        } else {
            0
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;
    const MODE: Arithmetic = Arithmetic::F64;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sign_tol() -> Self {
        SIGN_TOL
    }
    fn pivot_tol() -> Self {
        PIVOT_TOL
    }
    fn to_text(&self) -> String {
        format!("{self:?}")
    }
    fn from_text(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;
    const MODE: Arithmetic = Arithmetic::Rational;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite scalar")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn sign_tol() -> Self {
        Zero::zero()
    }
    fn pivot_tol() -> Self {
        Zero::zero()
    }
    fn to_text(&self) -> String {
        if self.denom().is_one() {
            self.numer().to_string()
        } else {
            format!("{}/{}", self.numer(), self.denom())
        }
    }
    fn from_text(s: &str) -> Option<Self> {
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().ok()?;
                let d: BigInt = d.trim().parse().ok()?;
                if d.is_zero() {
                    None
                } else {
                    Some(BigRational::new(n, d))
                }
            }
            None => {
                if let Ok(n) = s.parse::<BigInt>() {
                    Some(BigRational::from_integer(n))
                } else {
                    s.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .map(<BigRational as Scalar>::from_f64)
                }
            }
        }
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

pub fn to_scalars<S: Scalar>(xs: &[f64]) -> Vec<S> {
    xs.iter().map(|&x| S::from_f64(x)).collect()
}

pub fn to_f64s<S: Scalar>(xs: &[S]) -> Vec<f64> {
    xs.iter().map(Scalar::to_f64).collect()
}

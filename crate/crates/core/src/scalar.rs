//! Scalar traits the generic code is written against.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use nalgebra::RealField;
use num_rational::Ratio;
use num_traits::{Num, Signed};

/// Real field used by the dense layer (f32 or f64).
pub trait Real: RealField + Copy + Display {
    fn from_f64(v: f64) -> Self {
        nalgebra::convert(v)
    }

    fn to_f64(self) -> f64 {
        nalgebra::try_convert(self).unwrap_or(f64::NAN)
    }

    /// Tolerance used for Hermiticity checks at this precision.
    fn hermitian_tol() -> Self;
}

impl Real for f64 {
    fn hermitian_tol() -> Self {
        1e-10
    }
}

impl Real for f32 {
    fn hermitian_tol() -> Self {
        1e-4
    }
}

/// Coefficient ring of a map in the Pauli-string basis.
///
/// Exact rationals make witnesses and Choi spectra exact; floats are accepted for
/// randomized specs and files produced elsewhere.
pub trait Coefficient:
    Num + Signed + Clone + PartialOrd + Debug + Display + FromStr + Send + Sync + 'static
{
    fn from_int(v: i64) -> Self;
    fn to_f64(&self) -> f64;
    /// Token written to map files.
    fn to_token(&self) -> String;
}

impl Coefficient for f64 {
    fn from_int(v: i64) -> Self {
        v as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_token(&self) -> String {
        format!("{:.16e}", self)
    }
}

impl Coefficient for f32 {
    fn from_int(v: i64) -> Self {
        v as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
    fn to_token(&self) -> String {
        format!("{:.8e}", self)
    }
}

impl Coefficient for Ratio<i64> {
    fn from_int(v: i64) -> Self {
        Ratio::from_integer(v)
    }
    fn to_f64(&self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
    fn to_token(&self) -> String {
        self.to_string()
    }
}

/// Formats an exact rational as `p/q` (always with a denominator).
pub fn fmt_rational(r: &Ratio<i64>) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q` or a bare integer.
pub fn parse_rational(s: &str) -> Option<Ratio<i64>> {
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().ok()?;
            let q: i64 = q.trim().parse().ok()?;
            if q == 0 {
                return None;
            }
            Some(Ratio::new(p, q))
        }
        None => s.parse::<i64>().ok().map(Ratio::from_integer),
    }
}

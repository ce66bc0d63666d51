//! Exact rational helpers.

use std::str::FromStr;

use num_bigint::BigInt;
pub use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::{Error, Result};

pub type Rational = BigRational;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `num/den`; panics on a zero denominator.
pub fn frac(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// Parses `"a"`, `"-a"` or `"a/b"`.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((_, den)) = s.split_once('/') {
        if den.trim().trim_start_matches('-').chars().all(|c| c == '0') {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
    }
    Rational::from_str(s).map_err(|_| Error::Parse(format!("not a rational: {s:?}")))
}

pub fn abs_sum<'a>(xs: impl IntoIterator<Item = &'a Rational>) -> Rational {
    xs.into_iter().fold(zero(), |acc, x| acc + x.abs())
}

pub fn to_f64(x: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

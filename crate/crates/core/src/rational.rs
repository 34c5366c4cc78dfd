//! Exact rational scalars and their canonical `"num/den"` text form.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// Arbitrary-precision rational, always stored in lowest terms with a
/// positive denominator.
pub type Rational = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseRationalError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal {0:?}")]
    Syntax(String),
    #[error("zero denominator in {0:?}")]
    ZeroDenominator(String),
}

/// Shorthand for `n/d` with machine integers. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `2^e` for any signed exponent.
pub fn pow2(e: i64) -> Rational {
    let mag = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        Rational::from_integer(mag)
    } else {
        Rational::new(BigInt::one(), mag)
    }
}

/// Integer power with a signed exponent. Panics on `0^negative`.
pub fn powi(base: &Rational, e: i32) -> Rational {
    num_traits::pow::Pow::pow(base, e)
}

fn all_digits(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit())
}

/// Parses `"n"`, `"n/d"` or a plain decimal `"i.f"`, each with an optional
/// leading `-`. The denominator carries no sign. Decimals are converted
/// exactly (`"0.1"` is `1/10`).
pub fn parse_rational(text: &str) -> Result<Rational, ParseRationalError> {
    if text.is_empty() {
        return Err(ParseRationalError::Empty);
    }
    let syntax = || ParseRationalError::Syntax(text.to_owned());
    let (negative, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let value = if let Some((num, den)) = body.split_once('/') {
        if !all_digits(num) || !all_digits(den) {
            return Err(syntax());
        }
        let num: BigInt = num.parse().map_err(|_| syntax())?;
        let den: BigInt = den.parse().map_err(|_| syntax())?;
        if den.is_zero() {
            return Err(ParseRationalError::ZeroDenominator(text.to_owned()));
        }
        Rational::new(num, den)
    } else if let Some((whole, frac)) = body.split_once('.') {
        if !all_digits(whole) || !all_digits(frac) {
            return Err(syntax());
        }
        let digits: BigInt = format!("{whole}{frac}").parse().map_err(|_| syntax())?;
        let scale = num_traits::pow::pow(BigInt::from(10u32), frac.len());
        Rational::new(digits, scale)
    } else {
        if !all_digits(body) {
            return Err(syntax());
        }
        Rational::from_integer(body.parse().map_err(|_| syntax())?)
    };
    Ok(if negative { -value } else { value })
}

/// Canonical `"num/den"` form; integers are written with `/1`.
pub fn format_rational(value: &Rational) -> String {
    format!("{}/{}", value.numer(), value.denom())
}

/// Displays a rational in canonical `"num/den"` form.
pub struct Exact<'a>(pub &'a Rational);

impl fmt::Display for Exact<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

/// Lossy conversion for display and Monte Carlo comparisons.
pub fn to_f64(value: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    value.to_f64().unwrap_or_else(|| {
        // Numerator or denominator too large for f64; scale both down first.
        let shift = value.numer().bits().max(value.denom().bits()).saturating_sub(1000);
        let n = (value.numer() >> shift).to_f64().unwrap_or(f64::NAN);
        let d = (value.denom() >> shift).to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Exact rational equal to the binary value of a finite float.
pub fn from_f64(value: f64) -> Option<Rational> {
    Rational::from_float(value)
}

pub fn max(a: &Rational, b: &Rational) -> Rational {
    if a >= b {
        a.clone()
    } else {
        b.clone()
    }
}

pub fn positive_part(value: &Rational) -> Rational {
    if value.is_positive() {
        value.clone()
    } else {
        Rational::zero()
    }
}

pub fn negative_part(value: &Rational) -> Rational {
    if value.is_negative() {
        -value.clone()
    } else {
        Rational::zero()
    }
}

/// Least common multiple of the denominators of `values`.
pub fn denominator_lcm<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values.into_iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Serde adapter storing a [`Rational`] as its `"num/den"` string.
pub mod as_string {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_fraction_integer_and_decimal_forms() {
        assert_eq!(parse_rational("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("-7").unwrap(), int(-7));
        assert_eq!(parse_rational("0.125").unwrap(), rat(1, 8));
        assert_eq!(parse_rational("-2.50").unwrap(), rat(-5, 2));
    }

    #[test]
    fn rejects_malformed_literals() {
        for bad in ["", "-", "1/", "/2", "1/-2", "+1", "1 /2", "1.2.3", "1/2/3", "0x10", ".5", "5."] {
            assert!(parse_rational(bad).is_err(), "{bad:?} accepted");
        }
        assert_eq!(parse_rational("4/0"), Err(ParseRationalError::ZeroDenominator("4/0".into())));
    }

    #[test]
    fn canonical_form_is_lowest_terms() {
        assert_eq!(format_rational(&parse_rational("-6/4").unwrap()), "-3/2");
        assert_eq!(format_rational(&int(5)), "5/1");
        assert_eq!(format_rational(&Rational::zero()), "0/1");
    }

    #[test]
    fn powers_of_two() {
        assert_eq!(pow2(3), int(8));
        assert_eq!(pow2(-4), rat(1, 16));
        assert_eq!(powi(&rat(2, 3), -2), rat(9, 4));
    }

    #[test]
    fn tiny_values_convert_to_f64() {
        assert_eq!(to_f64(&pow2(-25)), 2f64.powi(-25));
        let huge = pow2(-3000);
        assert_eq!(to_f64(&huge), 0.0);
    }

    proptest! {
        #[test]
        fn text_round_trip(n in any::<i64>(), d in 1i64..) {
            let value = rat(n, d);
            let text = format_rational(&value);
            prop_assert_eq!(parse_rational(&text).unwrap(), value.clone());
            prop_assert_eq!(format_rational(&parse_rational(&text).unwrap()), text);
        }
    }
}

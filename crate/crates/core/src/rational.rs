//! Exact rational helpers shared by every module.
//!
//! Rationals are serialized as `"num/den"` strings so that reports and
//! instance files round-trip without any loss.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int<T: Into<BigInt>>(n: T) -> Rational {
    Rational::from_integer(n.into())
}

pub fn to_string(x: &Rational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `"n"`, `"n/d"` or a finite decimal such as `"-0.125"`.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let digits = format!("{}{}", whole.trim_start_matches(['-', '+']), frac);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let n: BigInt = digits.parse().map_err(|_| bad())?;
        let d = num_traits::pow(BigInt::from(10u32), frac.len());
        let r = Rational::new(n, d);
        return Ok(if negative { -r } else { r });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(n))
}

/// Nearest integer, with exact half-integers rounded down.
pub fn round_half_down(x: &Rational) -> BigInt {
    let half = rat(1, 2);
    (x - half).ceil().to_integer()
}

pub fn floor(x: &Rational) -> BigInt {
    x.floor().to_integer()
}

/// `x mod m` in `[0, m)` for a positive integer `m`.
pub fn rem_euclid(x: &Rational, m: &BigInt) -> Rational {
    let m = Rational::from_integer(m.clone());
    let q = (x / &m).floor();
    x - q * m
}

pub fn product<'a, I: IntoIterator<Item = &'a u64>>(primes: I) -> BigInt {
    primes
        .into_iter()
        .fold(BigInt::one(), |acc, &p| acc * BigInt::from(p))
}

pub fn abs(x: &Rational) -> Rational {
    x.abs()
}

/// Fraction part of `x` in lowest terms, as `(u, d)` with `0 <= u < d`.
pub fn frac_parts(x: &Rational) -> (BigInt, BigInt) {
    let f = x - x.floor();
    let g = f.numer().gcd(f.denom());
    let g = if g.is_zero() { BigInt::one() } else { g };
    (f.numer() / &g, f.denom() / &g)
}

/// Lossy conversion for display and for the asymptotic gate flags only.
pub fn to_f64(x: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}

pub mod serde_str {
    use super::Rational;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::to_string(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).map_err(D::Error::custom)
    }
}

pub mod serde_str_vec {
    use super::Rational;
    use serde::{de::Error as _, ser::SerializeSeq, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&super::to_string(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter()
            .map(|s| super::parse(s).map_err(D::Error::custom))
            .collect()
    }
}

pub mod serde_bigint_str {
    use num_bigint::BigInt;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse("-7").unwrap(), rat(-7, 1));
        assert_eq!(parse("0.05").unwrap(), rat(1, 20));
        assert_eq!(parse("-1.5").unwrap(), rat(-3, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
    }

    #[test]
    fn rounding_ties_go_down() {
        assert_eq!(round_half_down(&rat(5, 2)), BigInt::from(2));
        assert_eq!(round_half_down(&rat(-5, 2)), BigInt::from(-3));
        assert_eq!(round_half_down(&rat(7, 3)), BigInt::from(2));
        assert_eq!(round_half_down(&rat(8, 3)), BigInt::from(3));
    }

    #[test]
    fn fraction_parts() {
        assert_eq!(frac_parts(&rat(-1, 4)), (BigInt::from(3), BigInt::from(4)));
        assert_eq!(frac_parts(&rat(6, 3)), (BigInt::from(0), BigInt::from(1)));
    }
}

//! Exact rational helpers: parsing, formatting, the infinity marker and scale grids.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Parses `"p/q"`, an integer, or a finite decimal such as `"-1.25"` exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational".into()));
    }
    let bad = || Error::Parse(format!("not a rational: {text:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if frac.is_empty() && whole_digits.is_empty() {
            return Err(bad());
        }
        if !whole_digits.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{whole_digits}{frac}");
        let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
        let denom = num_traits::pow(BigInt::from(10u32), frac.len());
        let value = Rational::new(numer, denom);
        return Ok(if negative { -value } else { value });
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Rational::from_integer(p))
}

pub fn parse_natural(text: &str) -> Result<BigUint> {
    text.trim().parse().map_err(|_| Error::Parse(format!("not a natural number: {text:?}")))
}

pub fn int(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn from_natural(n: &BigUint) -> Rational {
    Rational::from_integer(BigInt::from(n.clone()))
}

/// 2^e for any integer exponent.
pub fn pow2(e: i64) -> Rational {
    let base = num_traits::pow(BigInt::from(2u32), e.unsigned_abs() as usize);
    if e >= 0 {
        Rational::from_integer(base)
    } else {
        Rational::new(BigInt::one(), base)
    }
}

pub fn pow4_natural(e: u32) -> BigUint {
    BigUint::one() << (2 * e as usize)
}

/// Smallest m ≥ 0 with 2^m ≥ n (n ≥ 1).
pub fn ceil_log2(n: &BigUint) -> u64 {
    if n <= &BigUint::one() {
        return 0;
    }
    let m = n - 1u32;
    m.bits()
}

pub fn fmt_rational(r: &Rational) -> String {
    r.to_string()
}

pub fn floor_natural(r: &Rational) -> BigUint {
    let f = r.floor().to_integer();
    f.to_biguint().unwrap_or_default()
}

/// Value in `[0, ∞]` with an explicit infinity marker.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Extended {
    Finite(Rational),
    Infinite,
}

impl Extended {
    pub fn zero() -> Self {
        Extended::Finite(Rational::zero())
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            Extended::Finite(r) => Some(r),
            Extended::Infinite => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn le_rational(&self, r: &Rational) -> bool {
        match self {
            Extended::Finite(v) => v <= r,
            Extended::Infinite => false,
        }
    }
}

impl PartialOrd for Extended {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Extended {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.cmp(b),
            (Extended::Finite(_), Extended::Infinite) => Ordering::Less,
            (Extended::Infinite, Extended::Finite(_)) => Ordering::Greater,
            (Extended::Infinite, Extended::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(r) => write!(f, "{r}"),
            Extended::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "inf" {
            return Ok(Extended::Infinite);
        }
        parse_rational(&s).map(Extended::Finite).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter writing rationals as `"p/q"` strings.
pub mod serde_rational {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        value_to_rational(&v).map_err(serde::de::Error::custom)
    }
}

pub mod serde_rational_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = v.iter().map(|r| r.to_string()).collect();
        strings.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        let v = Vec::<serde_json::Value>::deserialize(d)?;
        v.iter().map(value_to_rational).collect::<Result<Vec<_>>>().map_err(serde::de::Error::custom)
    }
}

pub mod serde_natural {
    use super::*;

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigUint, D::Error> {
        let v = serde_json::Value::deserialize(d)?;
        value_to_natural(&v).map_err(serde::de::Error::custom)
    }
}

/// Accepts JSON strings (`"p/q"`, decimals) and JSON integers.
pub fn value_to_rational(v: &serde_json::Value) -> Result<Rational> {
    match v {
        serde_json::Value::String(s) => parse_rational(s),
        serde_json::Value::Number(n) => parse_rational(&n.to_string()),
        other => Err(Error::Parse(format!("expected a rational, found {other}"))),
    }
}

pub fn value_to_natural(v: &serde_json::Value) -> Result<BigUint> {
    match v {
        serde_json::Value::String(s) => parse_natural(s),
        serde_json::Value::Number(n) => parse_natural(&n.to_string()),
        other => Err(Error::Parse(format!("expected a natural number, found {other}"))),
    }
}

/// Parses a scale grid: `dyadic:a..b` (2^a..2^b), `pow:base:a..b`, or a comma list of rationals.
/// The result is strictly increasing and positive.
pub fn parse_grid(text: &str) -> Result<Vec<Rational>> {
    let s = text.trim();
    let range = |r: &str| -> Result<(i64, i64)> {
        let (a, b) = r
            .split_once("..")
            .ok_or_else(|| Error::Parse(format!("expected a range a..b in {text:?}")))?;
        let a: i64 = a.trim().parse().map_err(|_| Error::Parse(format!("bad range start in {text:?}")))?;
        let b: i64 = b.trim().parse().map_err(|_| Error::Parse(format!("bad range end in {text:?}")))?;
        if a > b {
            return Err(Error::Parse(format!("empty range in {text:?}")));
        }
        Ok((a, b))
    };
    let grid: Vec<Rational> = if let Some(r) = s.strip_prefix("dyadic:") {
        let (a, b) = range(r)?;
        (a..=b).map(pow2).collect()
    } else if let Some(rest) = s.strip_prefix("pow:") {
        let (base, r) = rest
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("expected pow:base:a..b, got {text:?}")))?;
        let base = parse_rational(base)?;
        if base <= Rational::one() {
            return Err(Error::Parse("grid base must exceed 1".into()));
        }
        let (a, b) = range(r)?;
        (a..=b).map(|e| rational_pow(&base, e)).collect()
    } else {
        s.split(',').map(parse_rational).collect::<Result<_>>()?
    };
    check_grid(&grid)?;
    Ok(grid)
}

pub fn check_grid(grid: &[Rational]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Invalid("empty scale grid".into()));
    }
    if grid.iter().any(|r| !r.is_positive()) {
        return Err(Error::Invalid("scale grid must be positive".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid("scale grid must be strictly increasing".into()));
    }
    Ok(())
}

pub fn rational_pow(base: &Rational, e: i64) -> Rational {
    let p = num_traits::pow(base.clone(), e.unsigned_abs() as usize);
    if e >= 0 {
        p
    } else {
        p.recip()
    }
}

/// Ceiling of a nonnegative rational as a natural number.
pub fn ceil_natural(r: &Rational) -> BigUint {
    let c = r.ceil().to_integer();
    c.to_biguint().unwrap_or_default()
}

pub fn natural_to_u64(n: &BigUint) -> Option<u64> {
    n.to_u64()
}

pub fn gcd_natural(a: &BigUint, b: &BigUint) -> BigUint {
    a.gcd(b)
}

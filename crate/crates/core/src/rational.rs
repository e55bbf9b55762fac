//! Thin helpers over `BigRational`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn to_f64(r: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact conversion of a finite float.
pub fn from_f64(x: f64) -> Option<Rational> {
    BigRational::from_float(x)
}

/// Parses "p/q", integers and plain decimals ("0.125", "1e-3") exactly.
pub fn parse(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Option<Rational> {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    if ip.is_empty() && fp.is_empty() {
        return None;
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{ip}{fp}").parse().ok()?;
    let scale = exp - fp.len() as i64;
    if scale.abs() > 4000 {
        return None;
    }
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(digits);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

/// Inverse of [`parse`]: integers print bare, everything else as "p/q".
pub fn format(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn abs(r: &Rational) -> Rational {
    r.abs()
}

/// Serde adapter storing a rational as its "p/q" string.
pub mod serde_str {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use super::Rational;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        super::parse(&s).ok_or_else(|| D::Error::custom(format!("bad rational '{s}'")))
    }
}

/// Smallest integer `c` with `2^c >= p / q`.
pub fn ceil_log2_ratio(p: u128, q: u128) -> i64 {
    assert!(p > 0 && q > 0);
    let mut c: i64 = 0;
    if p > q {
        while (q << c) < p {
            c += 1;
        }
    } else {
        while q >= p << (1 - c) {
            c -= 1;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse("3/6"), Some(rat(1, 2)));
        assert_eq!(parse("0.1"), Some(rat(1, 10)));
        assert_eq!(parse("-1.25e-1"), Some(rat(-1, 8)));
        assert_eq!(parse("7"), Some(int(7)));
        assert_eq!(parse("1/0"), None);
        assert_eq!(parse("abc"), None);
        assert_eq!(format(&rat(-2, 4)), "-1/2");
        assert_eq!(format(&int(3)), "3");
    }

    #[test]
    fn ceil_log2() {
        assert_eq!(ceil_log2_ratio(16, 1), 4);
        assert_eq!(ceil_log2_ratio(17, 1), 5);
        assert_eq!(ceil_log2_ratio(1, 1), 0);
        assert_eq!(ceil_log2_ratio(17, 9), 1);
        assert_eq!(ceil_log2_ratio(9, 9), 0);
        assert_eq!(ceil_log2_ratio(10, 12), 0);
        assert_eq!(ceil_log2_ratio(6, 12), -1);
        assert_eq!(ceil_log2_ratio(5, 12), -1);
        assert_eq!(ceil_log2_ratio(3, 12), -2);
    }
}

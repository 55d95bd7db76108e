//! Small helpers around `BigRational`.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = num_rational::BigRational;

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn from_biguints(n: &BigUint, d: &BigUint) -> Rational {
    Rational::new(
        BigInt::from_biguint(Sign::Plus, n.clone()),
        BigInt::from_biguint(Sign::Plus, d.clone()),
    )
}

/// Parses `"n/d"` or `"n"`.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Argument(format!("malformed rational `{s}`"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(Error::Argument(format!("zero denominator in `{s}`")));
            }
            Ok(Rational::new(n, d))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Canonical `"num/den"` form; integers keep an explicit `/1`.
pub fn format(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

pub fn pow(q: &Rational, k: u32) -> Rational {
    let mut out = Rational::one();
    for _ in 0..k {
        out *= q;
    }
    out
}

fn log2_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 60 {
        return (n.to_u64().unwrap() as f64).log2();
    }
    let shift = bits - 60;
    let top = (n >> shift).to_u64().unwrap() as f64;
    top.log2() + shift as f64
}

/// Base-2 logarithm of a positive rational, in floating point.
pub fn log2(q: &Rational) -> f64 {
    assert!(q.is_positive(), "log2 of a non-positive rational");
    let n = q.numer().magnitude();
    let d = q.denom().magnitude();
    log2_biguint(n) - log2_biguint(d)
}

/// Smallest k >= 0 with 2^k >= q, for q > 0.
pub fn ceil_log2(q: &Rational) -> u64 {
    let mut k = 0u64;
    let mut p = Rational::one();
    while &p < q {
        p *= int(2);
        k += 1;
    }
    k
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| log2(q).exp2())
}

pub fn lcm(a: &BigUint, b: &BigUint) -> BigUint {
    a.lcm(b)
}

pub fn in_unit_open(q: &Rational) -> bool {
    q.is_positive() && q < &Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        let q = parse("6/8").unwrap();
        assert_eq!(format(&q), "3/4");
        assert_eq!(parse(&format(&q)).unwrap(), q);
        assert_eq!(format(&parse("2").unwrap()), "2/1");
        assert!(parse("1/0").is_err());
        assert!(parse("x").is_err());
    }

    #[test]
    fn logs() {
        assert_eq!(log2(&int(16)), 4.0);
        assert_eq!(log2(&ratio(1, 4)), -2.0);
        assert_eq!(ceil_log2(&int(1)), 0);
        assert_eq!(ceil_log2(&ratio(5, 4)), 1);
        assert_eq!(ceil_log2(&int(4)), 2);
        let big = pow(&ratio(1, 64), 40);
        assert!((log2(&big) + 240.0).abs() < 1e-9);
    }
}

//! Exact rationals and a few helpers shared across the crate.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number, always kept in lowest terms.
pub type Rat = num_rational::BigRational;

pub fn rat(num: i64, den: i64) -> Rat {
    Rat::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_int(value: impl Into<BigInt>) -> Rat {
    Rat::from_integer(value.into())
}

pub fn pow2(exp: u64) -> BigUint {
    BigUint::one() << exp
}

pub fn pow2_int(exp: u64) -> BigInt {
    BigInt::one() << exp
}

/// `2^-exp` as a rational.
pub fn inv_pow2(exp: u64) -> Rat {
    Rat::new(BigInt::one(), pow2_int(exp))
}

/// Reduced fraction text `p/q`; integers are written with `/1`.
pub fn fmt_rat(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q`, a plain integer, or a terminating decimal such as `0.375`.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let err = || Error::Parse {
        what: "rational",
        input: s.to_string(),
    };
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| err())?;
        let q: BigInt = q.trim().parse().map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(Rat::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let int: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| err())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let den = num_traits::pow(BigInt::from(10), frac.len());
        let frac: BigInt = frac.parse().map_err(|_| err())?;
        let frac = Rat::new(frac, den);
        let int = Rat::from_integer(int.abs());
        let v = int + frac;
        return Ok(if negative { -v } else { v });
    }
    let p: BigInt = s.parse().map_err(|_| err())?;
    Ok(Rat::from_integer(p))
}

/// Best-effort `f64` view of an exact rational (saturates to +-inf).
pub fn rat_to_f64(r: &Rat) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() {
            return n / d;
        }
    }
    // scale both sides down by a common power of two
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 60).max(0) as usize;
    let shift_d = (db - 60).max(0) as usize;
    let n = (r.numer() >> shift_n).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d).to_f64().unwrap_or(1.0);
    let e = shift_n as i64 - shift_d as i64;
    if e > 2000 {
        return if n.is_sign_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    if e < -2000 {
        return 0.0;
    }
    n / d * 2f64.powi(e as i32)
}

/// Floor of a rational as a big integer.
pub fn floor_rat(r: &Rat) -> BigInt {
    r.numer().div_floor(r.denom())
}

pub fn is_power_of_two(n: &BigUint) -> bool {
    !n.is_zero() && (n & (n - BigUint::one())).is_zero()
}

pub fn lcm_denominators<'a>(values: impl IntoIterator<Item = &'a Rat>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| if v.denom().is_one() { acc } else { acc.lcm(v.denom()) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse_rat("3/8").unwrap(), rat(3, 8));
        assert_eq!(parse_rat("-6/4").unwrap(), rat(-3, 2));
        assert_eq!(parse_rat("17").unwrap(), rat(17, 1));
        assert_eq!(parse_rat("0.375").unwrap(), rat(3, 8));
        assert_eq!(parse_rat("-1.5").unwrap(), rat(-3, 2));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("x").is_err());
    }

    #[test]
    fn format_is_reduced_fraction() {
        assert_eq!(fmt_rat(&rat(6, 4)), "3/2");
        assert_eq!(fmt_rat(&rat(4, 1)), "4/1");
    }

    #[test]
    fn f64_view_of_huge_values() {
        let big = Rat::from_integer(pow2_int(3000));
        assert_eq!(rat_to_f64(&big), f64::INFINITY);
        let tiny = inv_pow2(3000);
        assert_eq!(rat_to_f64(&tiny), 0.0);
        let r = Rat::new(pow2_int(1100) * 3, pow2_int(1100) * 4);
        assert_eq!(rat_to_f64(&r), 0.75);
    }
}

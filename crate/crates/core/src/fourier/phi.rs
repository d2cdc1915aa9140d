//! Growth functions `Φ` for strong means, their growth class, and certified
//! evaluation.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::certified::{decide, exact_root, BigFloat, Interval};
use crate::error::{Error, Result};
use crate::rat::{fmt_rat, parse_rat, Rat};

/// Exponents beyond this bound are reported as `+inf` instead of evaluated.
const EXPONENT_CAP: f64 = 72_057_594_037_927_936.0; // 2^56

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PhiKind {
    /// `t^p`
    Power(Rat),
    /// `e^{ct} - 1`
    ExpLinear(Rat),
    /// `e^{t^α} - 1`
    ExpPower(Rat),
}

/// An increasing continuous `Φ` with `Φ(0) = 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhiSpec {
    kind: PhiKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhiClass {
    /// `limsup log Φ(t) / t < ∞`
    Subexponential,
    /// `limsup log Φ(t) / t = ∞`
    Superexponential,
}

impl PhiSpec {
    pub fn new(kind: PhiKind) -> Result<Self> {
        let param = match &kind {
            PhiKind::Power(p) | PhiKind::ExpLinear(p) | PhiKind::ExpPower(p) => p,
        };
        if !param.is_positive() {
            return Err(Error::InvalidParams(format!(
                "growth parameter must be positive, got {}",
                fmt_rat(param)
            )));
        }
        Ok(PhiSpec { kind })
    }

    pub fn power(p: Rat) -> Result<Self> {
        Self::new(PhiKind::Power(p))
    }

    pub fn exp_linear(c: Rat) -> Result<Self> {
        Self::new(PhiKind::ExpLinear(c))
    }

    pub fn exp_power(alpha: Rat) -> Result<Self> {
        Self::new(PhiKind::ExpPower(alpha))
    }

    pub fn kind(&self) -> &PhiKind {
        &self.kind
    }

    /// Growth class, read off the kind symbolically.
    pub fn classify(&self) -> PhiClass {
        match &self.kind {
            PhiKind::Power(_) | PhiKind::ExpLinear(_) => PhiClass::Subexponential,
            PhiKind::ExpPower(a) if *a <= Rat::one() => PhiClass::Subexponential,
            PhiKind::ExpPower(_) => PhiClass::Superexponential,
        }
    }

    /// Certified enclosure of `Φ(t)` for `t >= 0`.
    pub fn eval(&self, t: &Rat, prec: u32) -> ExtReal {
        assert!(!t.is_negative(), "Φ is defined on [0, ∞)");
        if t.is_zero() {
            return ExtReal::Finite(Interval::from_int(0, prec));
        }
        match &self.kind {
            PhiKind::Power(p) => ExtReal::Finite(rat_pow(t, p, prec).clamp_nonneg()),
            PhiKind::ExpLinear(c) => exp_minus_one(&Interval::from_rat(&(c * t), prec + 8), prec),
            PhiKind::ExpPower(a) => exp_minus_one(&rat_pow(t, a, prec + 8), prec),
        }
    }

    /// The exponent `T` with `Φ(t) = e^T - 1` for the exponential kinds, exact
    /// when it is rational.
    fn exponent(&self, t: &Rat, prec: u32) -> Option<Exponent> {
        match &self.kind {
            PhiKind::Power(_) => None,
            PhiKind::ExpLinear(c) => Some(Exponent::Exact(c * t)),
            PhiKind::ExpPower(a) => Some(match exact_rat_pow(t, a) {
                Some(v) => Exponent::Exact(v),
                None => Exponent::Approx(rat_pow(t, a, prec)),
            }),
        }
    }

    /// Decides `Φ(t) > factor · e^a` with certified arithmetic, working in
    /// the log domain so that astronomically large values never need to be
    /// compared directly. `None` only if precision escalation fails.
    pub fn exceeds_exp(&self, t: &Rat, a: &Rat, factor: u32) -> Option<bool> {
        assert!(factor >= 1);
        if !t.is_positive() {
            return Some(false);
        }
        let exact_factor = factor == 1;
        decide(|prec| {
            let ln_factor = if exact_factor {
                Interval::from_int(0, prec)
            } else {
                Interval::from_int(factor as i64, prec).ln()
            };
            let target = Interval::from_rat(a, prec).add(&ln_factor);
            match self.exponent(t, prec) {
                None => {
                    // t^p > F e^a  <=>  p ln t > a + ln F
                    let PhiKind::Power(p) = &self.kind else { unreachable!() };
                    let lhs = Interval::from_rat(p, prec).mul(&Interval::from_rat(t, prec).ln());
                    lhs.gt(&target)
                }
                Some(exponent) => {
                    // e^T - 1 > F e^a  <=>  e^{T - a - ln F} > 1 + e^{-a} / F
                    let d = match &exponent {
                        Exponent::Exact(v) if exact_factor => {
                            let d = v - a;
                            if !d.is_positive() {
                                return Some(false);
                            }
                            if d >= Rat::one() && !a.is_negative() {
                                // e^d - 1 >= e - 1 > 1 >= e^{-a}
                                return Some(true);
                            }
                            Interval::from_rat(&d, prec)
                        }
                        Exponent::Exact(v) => Interval::from_rat(v, prec).sub(&target),
                        Exponent::Approx(iv) => iv.sub(&target),
                    };
                    if d.hi().sign() != num_bigint::Sign::Plus {
                        return Some(false);
                    }
                    if d.lo().sign() != num_bigint::Sign::Plus {
                        return None;
                    }
                    let rhs = Interval::from_int(1, prec).add(
                        &Interval::from_rat(&-a, prec)
                            .exp()
                            .div(&Interval::from_int(factor as i64, prec)),
                    );
                    d.exp().gt(&rhs)
                }
            }
        })
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

enum Exponent {
    Exact(Rat),
    Approx(Interval),
}

impl fmt::Display for PhiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |r: &Rat| {
            if r.is_integer() {
                r.numer().to_string()
            } else {
                fmt_rat(r)
            }
        };
        match &self.kind {
            PhiKind::Power(p) => write!(f, "pow:{}", show(p)),
            PhiKind::ExpLinear(c) => write!(f, "exp:{}", show(c)),
            PhiKind::ExpPower(a) => write!(f, "exppow:{}", show(a)),
        }
    }
}

impl FromStr for PhiSpec {
    type Err = Error;

    /// Grammar: `pow:p`, `exp:c`, `exppow:alpha`.
    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse {
            what: "phi spec",
            input: s.to_string(),
        };
        let (kind, param) = s.trim().split_once(':').ok_or_else(err)?;
        let param = parse_rat(param).map_err(|_| err())?;
        match kind {
            "pow" => Self::power(param),
            "exp" => Self::exp_linear(param),
            "exppow" => Self::exp_power(param),
            _ => Err(err()),
        }
    }
}

/// Certified real or `+inf` (used when an exponent is too large to evaluate).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtReal {
    Finite(Interval),
    PosInfinity,
}

impl ExtReal {
    pub fn add(&self, other: &ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a.add(b)),
            _ => ExtReal::PosInfinity,
        }
    }

    pub fn mul_rat(&self, r: &Rat) -> ExtReal {
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(a.mul(&Interval::from_rat(r, a.prec()))),
            ExtReal::PosInfinity if r.is_zero() => ExtReal::Finite(Interval::from_int(0, 64)),
            ExtReal::PosInfinity => ExtReal::PosInfinity,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtReal::PosInfinity)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtReal::Finite(iv) => iv.mid_f64(),
            ExtReal::PosInfinity => f64::INFINITY,
        }
    }

    /// Certified `self <= other` for nonnegative quantities.
    pub fn certainly_le(&self, other: &ExtReal) -> Option<bool> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.le(b),
            (ExtReal::Finite(_), ExtReal::PosInfinity) => Some(true),
            (ExtReal::PosInfinity, ExtReal::Finite(_)) => Some(false),
            (ExtReal::PosInfinity, ExtReal::PosInfinity) => None,
        }
    }

    /// Lower end of the enclosure (`None` for `+inf`).
    pub fn lower(&self) -> Option<&BigFloat> {
        match self {
            ExtReal::Finite(iv) => Some(iv.lo()),
            ExtReal::PosInfinity => None,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(iv) => write!(f, "{iv}"),
            ExtReal::PosInfinity => write!(f, "+inf"),
        }
    }
}

fn exp_minus_one(exponent: &Interval, prec: u32) -> ExtReal {
    if exponent.hi().to_f64() > EXPONENT_CAP {
        return ExtReal::PosInfinity;
    }
    let one = Interval::from_int(1, prec + 8);
    let v = exponent.exp().sub(&one).clamp_nonneg();
    ExtReal::Finite(Interval::new(
        v.lo().clone().round(prec, crate::certified::Round::Down),
        v.hi().clone().round(prec, crate::certified::Round::Up),
        prec,
    ))
}

/// `t^e` exactly, when the result is rational.
pub fn exact_rat_pow(t: &Rat, e: &Rat) -> Option<Rat> {
    let a = e.numer().to_i64()?;
    let b = e.denom().to_u32()?;
    if a.unsigned_abs() > 1 << 20 {
        return None;
    }
    let base = if a >= 0 {
        t.clone()
    } else {
        if t.is_zero() {
            return None;
        }
        t.recip()
    };
    let raised = num_traits::pow(base, a.unsigned_abs() as usize);
    if b == 1 {
        return Some(raised);
    }
    let n = exact_root(raised.numer(), b)?;
    let d = exact_root(raised.denom(), b)?;
    Some(Rat::new(n, d))
}

/// Enclosure of `t^e` for `t > 0`.
pub fn rat_pow(t: &Rat, e: &Rat, prec: u32) -> Interval {
    if let Some(v) = exact_rat_pow(t, e) {
        return Interval::from_rat(&v, prec);
    }
    let wp = prec + 16;
    Interval::from_rat(e, wp)
        .mul(&Interval::from_rat(t, wp).ln())
        .exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn phi(s: &str) -> PhiSpec {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_print() {
        assert_eq!(phi("pow:2").to_string(), "pow:2");
        assert_eq!(phi("exppow:3/2").to_string(), "exppow:3/2");
        assert_eq!(phi("exp:1"), PhiSpec::exp_linear(rat(1, 1)).unwrap());
        assert!("pow:0".parse::<PhiSpec>().is_err());
        assert!("log:2".parse::<PhiSpec>().is_err());
        assert!("pow".parse::<PhiSpec>().is_err());
    }

    #[test]
    fn classification() {
        assert_eq!(phi("pow:17").classify(), PhiClass::Subexponential);
        assert_eq!(phi("exp:3").classify(), PhiClass::Subexponential);
        assert_eq!(phi("exppow:1").classify(), PhiClass::Subexponential);
        assert_eq!(phi("exppow:1/2").classify(), PhiClass::Subexponential);
        assert_eq!(phi("exppow:2").classify(), PhiClass::Superexponential);
        assert_eq!(phi("exppow:101/100").classify(), PhiClass::Superexponential);
    }

    #[test]
    fn zero_maps_to_zero() {
        for s in ["pow:2", "exp:3", "exppow:2", "pow:1/2"] {
            match phi(s).eval(&rat(0, 1), 64) {
                ExtReal::Finite(iv) => assert!(iv.lo().is_zero() && iv.hi().is_zero()),
                _ => panic!(),
            }
        }
    }

    #[test]
    fn values() {
        let v = phi("pow:2").eval(&rat(3, 2), 64);
        assert_eq!(v, ExtReal::Finite(Interval::from_rat(&rat(9, 4), 64)));
        let v = phi("exppow:2").eval(&rat(2, 1), 96).to_f64();
        assert!((v - (4f64.exp() - 1.0)).abs() < 1e-10);
        let v = phi("pow:1/2").eval(&rat(2, 1), 96).to_f64();
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(exact_rat_pow(&rat(9, 4), &rat(1, 2)), Some(rat(3, 2)));
        assert!(phi("exppow:2").eval(&crate::rat::rat_int(1u64 << 40), 64).is_infinite());
    }

    #[test]
    fn exceeds_exp_near_the_crossing() {
        // e^{t^2} - 1 > e^{2n} with t = n / 100 holds iff n > 20000
        let p = phi("exppow:2");
        let t = |n: i64| rat(n, 100);
        assert_eq!(p.exceeds_exp(&t(20000), &rat(40000, 1), 1), Some(false));
        assert_eq!(p.exceeds_exp(&t(20001), &rat(40002, 1), 1), Some(true));
        assert_eq!(p.exceeds_exp(&t(200), &rat(400, 1), 1), Some(false));
        // power kinds never catch up with e^{2n}
        assert_eq!(phi("pow:5").exceeds_exp(&rat(10, 1), &rat(20, 1), 1), Some(false));
        assert_eq!(phi("pow:5").exceeds_exp(&rat(10, 1), &rat(11, 1), 1), Some(true));
        // factor two: e^{t} - 1 > 2 e^{1} iff t > 1 + ln(2 + e^{-1})
        let e = phi("exp:1");
        assert_eq!(e.exceeds_exp(&rat(18, 10), &rat(1, 1), 2), Some(false));
        assert_eq!(e.exceeds_exp(&rat(19, 10), &rat(1, 1), 2), Some(true));
    }
}

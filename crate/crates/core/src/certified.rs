//! Interval arithmetic with directed rounding over binary floats of arbitrary
//! exponent range.
//!
//! An [`Interval`] always encloses the exact real it stands for: every lower
//! endpoint is rounded toward `-inf` and every upper endpoint toward `+inf`.
//! Transcendental functions use Taylor (exp) and `atanh` (ln) series with
//! explicit remainder bounds, so enclosures are rigorous rather than
//! best-effort. Comparisons are three-valued: an inequality is certified only
//! when it holds at the unfavourable ends of the intervals.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::rat::{pow2_int, Rat};

/// Default working precision in bits.
pub const DEFAULT_PREC: u32 = 96;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    Down,
    Up,
}

/// `mant * 2^exp`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BigFloat {
    mant: BigInt,
    exp: i64,
}

fn div_round(num: &BigInt, den: &BigInt, mode: Round) -> BigInt {
    match mode {
        Round::Down => num.div_floor(den),
        Round::Up => -((-num).div_floor(den)),
    }
}

/// `v / 2^k` rounded in the given direction.
fn shr_round(v: &BigInt, k: u64, mode: Round) -> BigInt {
    // `>>` on BigInt rounds toward -inf
    match mode {
        Round::Down => v >> k as usize,
        Round::Up => -((-v) >> k as usize),
    }
}

impl BigFloat {
    pub fn zero() -> Self {
        BigFloat {
            mant: BigInt::zero(),
            exp: 0,
        }
    }

    pub fn from_int(v: impl Into<BigInt>) -> Self {
        BigFloat {
            mant: v.into(),
            exp: 0,
        }
        .normalized()
    }

    /// `2^e`.
    pub fn pow2(e: i64) -> Self {
        BigFloat {
            mant: BigInt::one(),
            exp: e,
        }
    }

    pub fn from_rat(r: &Rat, prec: u32, mode: Round) -> Self {
        if r.denom().is_one() {
            return Self::from_int(r.numer().clone()).round(prec, mode);
        }
        let shift = prec as i64 + 2 + r.denom().bits() as i64 - r.numer().bits() as i64;
        let shift = shift.max(0);
        let num = r.numer() << shift as usize;
        let q = div_round(&num, r.denom(), mode);
        BigFloat { mant: q, exp: -shift }.round(prec, mode)
    }

    fn normalized(mut self) -> Self {
        if self.mant.is_zero() {
            self.exp = 0;
            return self;
        }
        let tz = self.mant.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mant >>= tz as usize;
            self.exp += tz as i64;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn sign(&self) -> Sign {
        self.mant.sign()
    }

    /// Exponent of the most significant bit (`floor(log2 |x|)`); `None` at zero.
    pub fn msb(&self) -> Option<i64> {
        (!self.is_zero()).then(|| self.exp + self.mant.bits() as i64 - 1)
    }

    fn lsb(&self) -> i64 {
        self.exp
    }

    pub fn round(self, prec: u32, mode: Round) -> Self {
        let bits = self.mant.bits();
        if bits <= prec as u64 {
            return self.normalized();
        }
        let shift = bits - prec as u64;
        let q = shr_round(&self.mant, shift, mode);
        BigFloat {
            mant: q,
            exp: self.exp + shift as i64,
        }
        .normalized()
    }

    pub fn neg(&self) -> Self {
        BigFloat {
            mant: -&self.mant,
            exp: self.exp,
        }
    }

    pub fn mul_pow2(&self, e: i64) -> Self {
        BigFloat {
            mant: self.mant.clone(),
            exp: self.exp + e,
        }
    }

    pub fn add(&self, other: &Self, prec: u32, mode: Round) -> Self {
        if self.is_zero() {
            return other.clone().round(prec, mode);
        }
        if other.is_zero() {
            return self.clone().round(prec, mode);
        }
        let (big, small) = if self.msb() >= other.msb() {
            (self, other)
        } else {
            (other, self)
        };
        // An operand far below the rounding granularity of the larger one only
        // matters through its sign; replace it by a small sticky value.
        let cut = big.lsb().min(big.msb().unwrap() - prec as i64) - 2;
        let sticky;
        let small = if small.msb().unwrap() < cut {
            sticky = BigFloat {
                mant: if small.mant.is_negative() {
                    -BigInt::one()
                } else {
                    BigInt::one()
                },
                exp: cut - 1,
            };
            &sticky
        } else {
            small
        };
        let e = big.exp.min(small.exp);
        let a = &big.mant << (big.exp - e) as usize;
        let b = &small.mant << (small.exp - e) as usize;
        BigFloat { mant: a + b, exp: e }.round(prec, mode)
    }

    pub fn sub(&self, other: &Self, prec: u32, mode: Round) -> Self {
        self.add(&other.neg(), prec, mode)
    }

    pub fn mul(&self, other: &Self, prec: u32, mode: Round) -> Self {
        BigFloat {
            mant: &self.mant * &other.mant,
            exp: self.exp + other.exp,
        }
        .round(prec, mode)
    }

    pub fn div(&self, other: &Self, prec: u32, mode: Round) -> Self {
        assert!(!other.is_zero(), "division by zero");
        if self.is_zero() {
            return Self::zero();
        }
        let shift =
            (prec as i64 + 2 + other.mant.bits() as i64 - self.mant.bits() as i64).max(0);
        let num = &self.mant << shift as usize;
        let q = div_round(&num, &other.mant, mode);
        BigFloat {
            mant: q,
            exp: self.exp - other.exp - shift,
        }
        .round(prec, mode)
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let bits = self.mant.bits() as i64;
        let drop = (bits - 60).max(0);
        let m = (&self.mant >> drop as usize).to_f64().unwrap();
        let e = self.exp + drop;
        if e > 1100 {
            return if m < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        if e < -1200 {
            return 0.0;
        }
        m * 2f64.powi(e as i32)
    }

    /// Exact rational value (only sensible for moderate exponents).
    pub fn to_rat(&self) -> Rat {
        if self.exp >= 0 {
            Rat::from_integer(&self.mant << self.exp as usize)
        } else {
            Rat::new(self.mant.clone(), pow2_int((-self.exp) as u64))
        }
    }

    /// Decimal rendering with about `digits` significant digits (not rigorous;
    /// for display only). Huge magnitudes are shown in `2^e` form.
    pub fn display(&self, digits: usize) -> String {
        let f = self.to_f64();
        if f.is_finite() && (f == 0.0 || f.abs() > 1e-300) {
            format!("{f:.digits$e}")
        } else {
            let msb = self.msb().unwrap_or(0);
            let lead = self.mul_pow2(-msb).to_f64();
            format!("{lead:.digits$}*2^{msb}")
        }
    }
}

impl Ord for BigFloat {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.sign(), other.sign());
        if sa != sb {
            let rank = |s: Sign| match s {
                Sign::Minus => 0,
                Sign::NoSign => 1,
                Sign::Plus => 2,
            };
            return rank(sa).cmp(&rank(sb));
        }
        if sa == Sign::NoSign {
            return Ordering::Equal;
        }
        let (ma, mb) = (self.msb().unwrap(), other.msb().unwrap());
        if ma != mb {
            let ord = ma.cmp(&mb);
            return if sa == Sign::Plus { ord } else { ord.reverse() };
        }
        let e = self.exp.min(other.exp);
        let a = &self.mant << (self.exp - e) as usize;
        let b = &other.mant << (other.exp - e) as usize;
        a.cmp(&b)
    }
}

impl PartialOrd for BigFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A closed interval `[lo, hi]` certified to contain some exact real.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    lo: BigFloat,
    hi: BigFloat,
    prec: u32,
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo.display(12), self.hi.display(12))
    }
}

impl Interval {
    pub fn new(lo: BigFloat, hi: BigFloat, prec: u32) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi, prec }
    }

    pub fn point(v: BigFloat, prec: u32) -> Self {
        Interval {
            lo: v.clone().round(prec, Round::Down),
            hi: v.round(prec, Round::Up),
            prec,
        }
    }

    pub fn from_int(v: i64, prec: u32) -> Self {
        Self::point(BigFloat::from_int(v), prec)
    }

    pub fn from_rat(r: &Rat, prec: u32) -> Self {
        Interval {
            lo: BigFloat::from_rat(r, prec, Round::Down),
            hi: BigFloat::from_rat(r, prec, Round::Up),
            prec,
        }
    }

    pub fn lo(&self) -> &BigFloat {
        &self.lo
    }

    pub fn hi(&self) -> &BigFloat {
        &self.hi
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn mid_f64(&self) -> f64 {
        let (a, b) = (self.lo.to_f64(), self.hi.to_f64());
        if a.is_infinite() || b.is_infinite() {
            return if a == b { a } else { b };
        }
        0.5 * (a + b)
    }

    pub fn width_f64(&self) -> f64 {
        self.hi.sub(&self.lo, 53, Round::Up).to_f64()
    }

    fn p(&self, other: &Interval) -> u32 {
        self.prec.max(other.prec)
    }

    pub fn add(&self, other: &Interval) -> Interval {
        let p = self.p(other);
        Interval {
            lo: self.lo.add(&other.lo, p, Round::Down),
            hi: self.hi.add(&other.hi, p, Round::Up),
            prec: p,
        }
    }

    pub fn sub(&self, other: &Interval) -> Interval {
        let p = self.p(other);
        Interval {
            lo: self.lo.sub(&other.hi, p, Round::Down),
            hi: self.hi.sub(&other.lo, p, Round::Up),
            prec: p,
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: self.hi.neg(),
            hi: self.lo.neg(),
            prec: self.prec,
        }
    }

    pub fn mul(&self, other: &Interval) -> Interval {
        let p = self.p(other);
        let pairs = [
            (&self.lo, &other.lo),
            (&self.lo, &other.hi),
            (&self.hi, &other.lo),
            (&self.hi, &other.hi),
        ];
        let lo = pairs
            .iter()
            .map(|(a, b)| a.mul(b, p, Round::Down))
            .min()
            .unwrap();
        let hi = pairs
            .iter()
            .map(|(a, b)| a.mul(b, p, Round::Up))
            .max()
            .unwrap();
        Interval { lo, hi, prec: p }
    }

    /// Division; panics if the divisor interval contains zero.
    pub fn div(&self, other: &Interval) -> Interval {
        assert!(
            other.lo.sign() == Sign::Plus || other.hi.sign() == Sign::Minus,
            "divisor interval contains zero"
        );
        let p = self.p(other);
        let pairs = [
            (&self.lo, &other.lo),
            (&self.lo, &other.hi),
            (&self.hi, &other.lo),
            (&self.hi, &other.hi),
        ];
        let lo = pairs
            .iter()
            .map(|(a, b)| a.div(b, p, Round::Down))
            .min()
            .unwrap();
        let hi = pairs
            .iter()
            .map(|(a, b)| a.div(b, p, Round::Up))
            .max()
            .unwrap();
        Interval { lo, hi, prec: p }
    }

    pub fn mul_pow2(&self, e: i64) -> Interval {
        Interval {
            lo: self.lo.mul_pow2(e),
            hi: self.hi.mul_pow2(e),
            prec: self.prec,
        }
    }

    /// Intersection with `[0, +inf)` for quantities known to be nonnegative.
    pub fn clamp_nonneg(self) -> Interval {
        let zero = BigFloat::zero();
        Interval {
            lo: if self.lo < zero { zero.clone() } else { self.lo },
            hi: if self.hi < zero { zero } else { self.hi },
            prec: self.prec,
        }
    }

    pub fn exp(&self) -> Interval {
        if self.lo == self.hi {
            return exp_point(&self.lo, self.prec);
        }
        let lo = exp_point(&self.lo, self.prec).lo;
        let hi = exp_point(&self.hi, self.prec).hi;
        Interval {
            lo,
            hi,
            prec: self.prec,
        }
    }

    /// Natural logarithm; panics unless the interval is strictly positive.
    pub fn ln(&self) -> Interval {
        assert!(self.lo.sign() == Sign::Plus, "ln of a non-positive interval");
        let lo = ln_point(&self.lo, self.prec).lo;
        let hi = ln_point(&self.hi, self.prec).hi;
        Interval {
            lo,
            hi,
            prec: self.prec,
        }
    }

    pub fn powi(&self, n: u32) -> Interval {
        let mut acc = Interval::from_int(1, self.prec);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// `Some(true)` if certainly `self < other`, `Some(false)` if certainly
    /// `self >= other`, `None` when the enclosures overlap.
    pub fn lt(&self, other: &Interval) -> Option<bool> {
        if self.hi < other.lo {
            Some(true)
        } else if self.lo >= other.hi {
            Some(false)
        } else {
            None
        }
    }

    /// `Some(true)` if certainly `self <= other`, `Some(false)` if certainly `self > other`.
    pub fn le(&self, other: &Interval) -> Option<bool> {
        if self.hi <= other.lo {
            Some(true)
        } else if self.lo > other.hi {
            Some(false)
        } else {
            None
        }
    }

    pub fn gt(&self, other: &Interval) -> Option<bool> {
        other.lt(self)
    }

    pub fn contains_rat(&self, r: &Rat) -> bool {
        BigFloat::from_rat(r, self.prec, Round::Up) >= self.lo
            && BigFloat::from_rat(r, self.prec, Round::Down) <= self.hi
    }

    /// `floor` of the enclosed value, if the enclosure pins it down.
    pub fn floor(&self) -> Option<BigInt> {
        let f = |b: &BigFloat| -> BigInt {
            if b.exp >= 0 {
                &b.mant << b.exp as usize
            } else {
                b.mant.div_floor(&pow2_int((-b.exp) as u64))
            }
        };
        let (a, b) = (f(&self.lo), f(&self.hi));
        (a == b).then_some(a)
    }
}

/// `floor` or `ceil` of `x · 2^s`.
fn scaled_int(x: &BigFloat, s: i64, mode: Round) -> BigInt {
    let e = x.exp + s;
    if e >= 0 {
        &x.mant << e as usize
    } else {
        shr_round(&x.mant, e.unsigned_abs(), mode)
    }
}

/// `e^y` for `0 <= y < 1/2` as integers `(lo, hi)` with
/// `lo · 2^-wp <= e^y <= hi · 2^-wp`. Two fixed-point Taylor chains, one
/// truncated down and one up.
fn exp_taylor(y: &BigFloat, wp: u32) -> (BigInt, BigInt) {
    let one = BigInt::one() << wp as usize;
    let (ylo, yhi) = (scaled_int(y, wp as i64, Round::Down), scaled_int(y, wp as i64, Round::Up));
    let (mut slo, mut shi) = (one.clone(), one.clone());
    let (mut tlo, mut thi) = (one.clone(), one);
    let mut i = 1u32;
    loop {
        tlo = ((&tlo * &ylo) >> wp as usize) / i;
        let t = shr_round(&(&thi * &yhi), wp as u64, Round::Up);
        thi = (t + (i - 1)) / i;
        slo += &tlo;
        shi += &thi;
        if thi <= BigInt::one() {
            break;
        }
        i += 1;
    }
    // each later term is at most half the previous one, so the tail is <= thi
    shi += thi;
    (slo, shi)
}

/// Enclosure of `e^x` for a single float `x`.
fn exp_point(x: &BigFloat, prec: u32) -> Interval {
    if x.is_zero() {
        return Interval::from_int(1, prec);
    }
    if x.sign() == Sign::Minus {
        let e = exp_point(&x.neg(), prec + 8);
        let one = BigFloat::from_int(1);
        return Interval {
            lo: one.div(&e.hi, prec, Round::Down),
            hi: one.div(&e.lo, prec, Round::Up),
            prec,
        };
    }
    // e^x = (e^y)^(2^r) with y = x / 2^r < 1/2
    let r = (x.msb().unwrap() + 2).max(0);
    let wp = prec + 24 + r as u32;
    let (slo, shi) = exp_taylor(&x.mul_pow2(-r), wp);
    let mut lo = BigFloat { mant: slo, exp: -(wp as i64) }.round(wp, Round::Down);
    let mut hi = BigFloat { mant: shi, exp: -(wp as i64) }.round(wp, Round::Up);
    for _ in 0..r {
        lo = lo.mul(&lo, wp, Round::Down);
        hi = hi.mul(&hi, wp, Round::Up);
    }
    Interval {
        lo: lo.round(prec, Round::Down),
        hi: hi.round(prec, Round::Up),
        prec,
    }
}

/// `2 atanh(z)` for an interval `z` inside `[0, 1/3]`.
fn two_atanh(z: &Interval, wp: u32) -> Interval {
    let z2 = z.mul(z);
    let mut power = z.clone();
    let mut sum = z.clone();
    let tiny = BigFloat::pow2(-(wp as i64) - 4);
    let mut k = 1i64;
    loop {
        power = power.mul(&z2);
        let term = power.div(&Interval::from_int(2 * k + 1, wp));
        sum = sum.add(&term);
        if term.hi < tiny {
            // tail <= term * z^2 / (1 - z^2) <= term / 8
            let tail = term.hi.mul_pow2(-3);
            sum.hi = sum.hi.add(&tail, wp, Round::Up);
            break;
        }
        k += 1;
    }
    sum.mul_pow2(1)
}

pub fn ln2(prec: u32) -> Interval {
    let wp = prec + 16;
    let third = Interval::from_int(1, wp).div(&Interval::from_int(3, wp));
    let v = two_atanh(&third, wp);
    Interval {
        lo: v.lo.round(prec, Round::Down),
        hi: v.hi.round(prec, Round::Up),
        prec,
    }
}

fn ln_point(x: &BigFloat, prec: u32) -> Interval {
    let s = x.msb().unwrap();
    let wp = prec + 24 + (64 - (s.unsigned_abs() | 1).leading_zeros());
    let y = Interval::point(x.mul_pow2(-s), wp); // y in [1, 2)
    let one = Interval::from_int(1, wp);
    let z = y.sub(&one).div(&y.add(&one));
    let ln_y = two_atanh(&z.clamp_nonneg(), wp);
    let v = ln2(wp).mul(&Interval::from_int(s, wp)).add(&ln_y);
    Interval {
        lo: v.lo.round(prec, Round::Down),
        hi: v.hi.round(prec, Round::Up),
        prec,
    }
}

/// Runs `check` at increasing precision until it returns a definite answer.
pub fn decide(mut check: impl FnMut(u32) -> Option<bool>) -> Option<bool> {
    let mut prec = DEFAULT_PREC;
    while prec <= 4096 {
        if let Some(v) = check(prec) {
            return Some(v);
        }
        prec *= 2;
    }
    None
}

/// Exact integer square root check helper: `Some(r)` if `v = r^k` for a
/// nonnegative integer `r`.
pub fn exact_root(v: &BigInt, k: u32) -> Option<BigInt> {
    if v.is_negative() {
        return None;
    }
    let r = v.nth_root(k);
    (num_traits::pow(r.clone(), k as usize) == *v).then_some(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn encloses(iv: &Interval, v: f64) -> bool {
        iv.lo.to_f64() <= v && v <= iv.hi.to_f64()
    }

    #[test]
    fn rounding_is_directed() {
        let third = rat(1, 3);
        let lo = BigFloat::from_rat(&third, 20, Round::Down);
        let hi = BigFloat::from_rat(&third, 20, Round::Up);
        assert!(lo.to_rat() < third && third < hi.to_rat());
        let neg = rat(-1, 3);
        assert!(BigFloat::from_rat(&neg, 20, Round::Down).to_rat() < neg);
        assert!(BigFloat::from_rat(&neg, 20, Round::Up).to_rat() > neg);
    }

    #[test]
    fn sticky_addition_keeps_direction() {
        let one = BigFloat::from_int(1);
        let tiny = BigFloat::pow2(-100_000);
        assert_eq!(one.add(&tiny, 64, Round::Down), one);
        assert!(one.add(&tiny, 64, Round::Up) > one);
        assert!(one.sub(&tiny, 64, Round::Down) < one);
        assert_eq!(one.sub(&tiny, 64, Round::Up), one);
    }

    #[test]
    fn exp_and_ln_enclose_libm() {
        for &x in &[0.001f64, 0.5, 1.0, 2.0, 10.0, 100.0, -3.0, -50.0] {
            let r = Rat::from_float(x).unwrap();
            let e = Interval::from_rat(&r, 96).exp();
            assert!(encloses(&e, x.exp()) || e.width_f64() < 1e-12, "exp({x}) -> {e}");
            assert!(e.width_f64() <= x.exp().abs() * 1e-20);
        }
        // e to 70 digits brackets the 128-bit enclosure
        let digits: BigInt = "27182818284590452353602874713526624977572470936999595749669676277240766"
            .parse()
            .unwrap();
        let scale = num_traits::pow(BigInt::from(10), 70);
        let (e_lo, e_hi) = (Rat::new(digits.clone(), scale.clone()), Rat::new(digits + 1, scale));
        let e1 = Interval::from_int(1, 128).exp();
        assert!(e1.lo.to_rat() <= e_hi && e1.hi.to_rat() >= e_lo, "{e1}");
        assert!(e1.width_f64() < 1e-36);
        for x in [rat(7, 3), rat(1000, 1), rat(1, 1 << 20)] {
            let up = Interval::from_rat(&x, 128).exp();
            let down = Interval::from_rat(&-x.clone(), 128).exp();
            assert!(up.mul(&down).contains_rat(&Rat::one()), "exp({x}) exp(-{x})");
        }
        let l = Interval::from_int(10, 96).ln();
        assert!((l.mid_f64() - 10f64.ln()).abs() < 1e-15);
        let l2 = ln2(200);
        assert!((l2.mid_f64() - std::f64::consts::LN_2).abs() < 1e-16);
        assert!(l2.width_f64() < 1e-55);
    }

    #[test]
    fn huge_exponentials_stay_finite() {
        let big = Interval::from_int(10_000_000, 96).exp();
        // ln of it returns the argument
        let back = big.ln();
        assert!((back.mid_f64() - 1e7).abs() < 1e-6);
        let small = Interval::from_int(-10_000_000, 96).exp();
        assert_eq!(small.lo.sign(), Sign::Plus);
    }

    #[test]
    fn comparisons_are_three_valued() {
        let a = Interval::from_rat(&rat(1, 3), 64);
        let b = Interval::from_rat(&rat(1, 2), 64);
        assert_eq!(a.lt(&b), Some(true));
        assert_eq!(b.lt(&a), Some(false));
        assert_eq!(a.lt(&a), None);
        assert_eq!(Interval::from_int(2, 64).le(&Interval::from_int(2, 64)), Some(true));
    }

    #[test]
    fn floor_of_enclosure() {
        let v = Interval::from_rat(&rat(7, 2), 64);
        assert_eq!(v.floor(), Some(BigInt::from(3)));
        let n = Interval::from_rat(&rat(-1, 2), 64);
        assert_eq!(n.floor(), Some(BigInt::from(-1)));
    }

    #[test]
    fn roots() {
        assert_eq!(exact_root(&BigInt::from(81), 4), Some(BigInt::from(3)));
        assert_eq!(exact_root(&BigInt::from(80), 4), None);
    }
}

//! Dyadic rationals in `[0, 1)`, dyadic intervals, and the group operation `⊕`.
//!
//! Every point is a finite binary fraction `a / 2^e`. Its digits `x_1, x_2, ...`
//! are those of the terminating expansion, so a point on the boundary of a
//! dyadic interval belongs to the interval on its right. All values are
//! immutable and canonical: equality is structural.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::rat::{pow2, pow2_int, Rat};

/// An exact point `numerator / 2^exponent` of `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicPoint {
    numerator: BigUint,
    exponent: u64,
}

impl DyadicPoint {
    pub fn zero() -> Self {
        DyadicPoint {
            numerator: BigUint::zero(),
            exponent: 0,
        }
    }

    /// Builds `numerator / 2^exponent`, reducing to canonical form.
    pub fn new(numerator: impl Into<BigUint>, exponent: u64) -> Result<Self> {
        let numerator = numerator.into();
        if numerator.bits() > exponent {
            return Err(Error::OutOfUnitInterval(format!("{numerator}/2^{exponent}")));
        }
        Ok(Self::canonical(numerator, exponent))
    }

    /// Left endpoint of cell `index` at `level`; panics if the index is out of range.
    pub fn from_cell(index: u64, level: u64) -> Self {
        Self::new(BigUint::from(index), level).expect("cell index out of range")
    }

    fn canonical(mut numerator: BigUint, mut exponent: u64) -> Self {
        if numerator.is_zero() {
            return Self::zero();
        }
        let tz = numerator.trailing_zeros().unwrap_or(0).min(exponent);
        numerator >>= tz;
        exponent -= tz;
        DyadicPoint {
            numerator,
            exponent,
        }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.numerator
    }

    /// Exponent of the canonical form; the point lies on the `2^-exponent` grid.
    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    /// The digit `x_j` (`j >= 1`) of the terminating binary expansion.
    pub fn bit(&self, j: u64) -> u8 {
        assert!(j >= 1, "digits are indexed from 1");
        if j > self.exponent {
            0
        } else {
            self.numerator.bit(self.exponent - j) as u8
        }
    }

    /// Number of leading zero digits; `None` for the point 0.
    pub fn leading_zeros(&self) -> Option<u64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exponent - self.numerator.bits())
        }
    }

    /// Digitwise XOR of binary expansions.
    pub fn xor_add(&self, other: &DyadicPoint) -> DyadicPoint {
        let e = self.exponent.max(other.exponent);
        let a = &self.numerator << (e - self.exponent);
        let b = &other.numerator << (e - other.exponent);
        Self::canonical(a ^ b, e)
    }

    /// `floor(x * 2^level)`.
    pub fn cell_index(&self, level: u64) -> BigUint {
        if level >= self.exponent {
            &self.numerator << (level - self.exponent)
        } else {
            &self.numerator >> (self.exponent - level)
        }
    }

    /// `floor(x * 2^level)` for levels where it fits a machine word.
    pub fn cell_index_u64(&self, level: u64) -> u64 {
        self.cell_index(level)
            .to_u64()
            .expect("cell index exceeds 64 bits")
    }

    /// The unique level-`j` dyadic interval containing the point.
    pub fn containing_interval(&self, level: u64) -> DyadicInterval {
        DyadicInterval {
            level,
            index: self.cell_index(level),
        }
    }

    pub fn to_rat(&self) -> Rat {
        Rat::new(BigInt::from(self.numerator.clone()), pow2_int(self.exponent))
    }

    pub fn from_rat(r: &Rat) -> Result<Self> {
        let den = r.denom().magnitude();
        if r.numer() < &BigInt::zero() || !crate::rat::is_power_of_two(den) {
            return Err(Error::Parse {
                what: "dyadic point",
                input: crate::rat::fmt_rat(r),
            });
        }
        let exponent = den.bits() - 1;
        Self::new(r.numer().magnitude().clone(), exponent)
    }

    /// Value as `f64` (exact for exponents up to 53 bits of numerator).
    pub fn to_f64(&self) -> f64 {
        crate::rat::rat_to_f64(&self.to_rat())
    }
}

impl Ord for DyadicPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exponent.max(other.exponent);
        let a = &self.numerator << (e - self.exponent);
        let b = &other.numerator << (e - other.exponent);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DyadicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.numerator, self.exponent)
    }
}

impl FromStr for DyadicPoint {
    type Err = Error;

    /// Accepts `a/2^e`, `p/q` with `q` a power of two, decimals, and `0`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, e)) = s.split_once("/2^") {
            let err = || Error::Parse {
                what: "dyadic point",
                input: s.to_string(),
            };
            let a: BigUint = a.trim().parse().map_err(|_| err())?;
            let e: u64 = e.trim().parse().map_err(|_| err())?;
            return Self::new(a, e);
        }
        let r = crate::rat::parse_rat(s)?;
        Self::from_rat(&r)
    }
}

/// Which half of a dyadic interval: `Plus` is the left half, `Minus` the right.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// The interval `[index / 2^level, (index + 1) / 2^level)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicInterval {
    level: u64,
    index: BigUint,
}

impl DyadicInterval {
    pub fn new(level: u64, index: impl Into<BigUint>) -> Result<Self> {
        let index = index.into();
        if index.bits() > level {
            return Err(Error::InvalidParams(format!(
                "interval index {index} out of range at level {level}"
            )));
        }
        Ok(DyadicInterval { level, index })
    }

    pub fn unit() -> Self {
        DyadicInterval {
            level: 0,
            index: BigUint::zero(),
        }
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn index(&self) -> &BigUint {
        &self.index
    }

    pub fn left(&self) -> DyadicPoint {
        DyadicPoint::canonical(self.index.clone(), self.level)
    }

    /// Right endpoint as a rational (it may equal 1, which is not a point of `[0,1)`).
    pub fn right(&self) -> Rat {
        Rat::new(
            BigInt::from(&self.index + BigUint::one()),
            pow2_int(self.level),
        )
    }

    pub fn measure(&self) -> Rat {
        crate::rat::inv_pow2(self.level)
    }

    pub fn contains(&self, x: &DyadicPoint) -> bool {
        x.cell_index(self.level) == self.index
    }

    /// Whether `other` is a subset of `self`.
    pub fn contains_interval(&self, other: &DyadicInterval) -> bool {
        other.level >= self.level && (&other.index >> (other.level - self.level)) == self.index
    }

    /// `Plus` gives the left half `δ^+`, `Minus` the right half `δ^-`.
    pub fn half(&self, side: Side) -> DyadicInterval {
        let index = (&self.index << 1u32)
            + match side {
                Side::Plus => BigUint::zero(),
                Side::Minus => BigUint::one(),
            };
        DyadicInterval {
            level: self.level + 1,
            index,
        }
    }

    pub fn parent(&self) -> Option<DyadicInterval> {
        (self.level > 0).then(|| DyadicInterval {
            level: self.level - 1,
            index: &self.index >> 1u32,
        })
    }

    fn start_at(&self, level: u64) -> BigUint {
        &self.index << (level - self.level)
    }
}

impl fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.level, self.index)
    }
}

impl FromStr for DyadicInterval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::Parse {
            what: "dyadic interval",
            input: s.to_string(),
        };
        let (l, k) = s.trim().split_once(':').ok_or_else(err)?;
        let level: u64 = l.parse().map_err(|_| err())?;
        let index: BigUint = k.parse().map_err(|_| err())?;
        Self::new(level, index)
    }
}

/// A finite union of dyadic intervals in canonical form: pairwise disjoint,
/// maximal (no two siblings both present), sorted by left endpoint.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DyadicSet {
    intervals: Vec<DyadicInterval>,
}

impl DyadicSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds the union of the level-`level` cells with the given indices.
    pub fn from_cells(level: u64, cells: impl IntoIterator<Item = u64>) -> Self {
        let mut current: Vec<u64> = cells.into_iter().collect();
        current.sort_unstable();
        current.dedup();
        let mut done: Vec<DyadicInterval> = Vec::new();
        let mut lvl = level;
        while !current.is_empty() {
            let mut parents = Vec::with_capacity(current.len() / 2);
            let mut i = 0;
            while i < current.len() {
                let c = current[i];
                if lvl > 0 && c.is_multiple_of(2) && i + 1 < current.len() && current[i + 1] == c + 1 {
                    parents.push(c / 2);
                    i += 2;
                } else {
                    done.push(DyadicInterval {
                        level: lvl,
                        index: BigUint::from(c),
                    });
                    i += 1;
                }
            }
            current = parents;
            if lvl == 0 {
                break;
            }
            lvl -= 1;
        }
        Self::sorted(done)
    }

    /// Canonical union of arbitrary (possibly overlapping) intervals.
    pub fn from_intervals(intervals: impl IntoIterator<Item = DyadicInterval>) -> Self {
        let intervals: Vec<_> = intervals.into_iter().collect();
        let Some(finest) = intervals.iter().map(|i| i.level).max() else {
            return Self::empty();
        };
        assert!(finest < 63, "from_intervals is limited to levels below 63");
        let mut cells = Vec::new();
        for iv in &intervals {
            let start = iv.start_at(finest).to_u64().unwrap();
            let count = 1u64 << (finest - iv.level);
            cells.extend(start..start + count);
        }
        Self::from_cells(finest, cells)
    }

    fn sorted(mut intervals: Vec<DyadicInterval>) -> Self {
        intervals.sort_by_key(|a| a.left());
        DyadicSet { intervals }
    }

    pub fn intervals(&self) -> &[DyadicInterval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Level of the smallest interval in the union (0 for the empty set).
    pub fn finest_level(&self) -> u64 {
        self.intervals.iter().map(|i| i.level).max().unwrap_or(0)
    }

    pub fn contains(&self, x: &DyadicPoint) -> bool {
        // last interval whose left endpoint is <= x
        let pos = self.intervals.partition_point(|iv| iv.left() <= *x);
        pos > 0 && self.intervals[pos - 1].contains(x)
    }

    pub fn measure(&self) -> Rat {
        self.intervals
            .iter()
            .fold(Rat::zero(), |acc, iv| acc + iv.measure())
    }

    /// Indices of the level-`level` cells covered by the set (`level` must be
    /// at least the finest level and below 63).
    pub fn cells(&self, level: u64) -> Vec<u64> {
        assert!(level >= self.finest_level() && level < 63);
        let mut out = Vec::new();
        for iv in &self.intervals {
            let start = iv.start_at(level).to_u64().unwrap();
            out.extend(start..start + (1u64 << (level - iv.level)));
        }
        out
    }

    /// `[0,1) \ self`, in canonical form.
    pub fn complement(&self) -> DyadicSet {
        let level = self.finest_level();
        assert!(level < 40, "complement is computed by enumeration below level 40");
        let covered = self.cells(level);
        let mut it = covered.iter().peekable();
        let mut rest = Vec::new();
        for c in 0..(1u64 << level) {
            if it.peek() == Some(&&c) {
                it.next();
            } else {
                rest.push(c);
            }
        }
        Self::from_cells(level, rest)
    }
}

/// Total measure `2^-level` times a count, as an exact rational.
pub fn cells_measure(count: u64, level: u64) -> Rat {
    Rat::new(BigInt::from(count), BigInt::from(pow2(level)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn p(s: &str) -> DyadicPoint {
        s.parse().unwrap()
    }

    #[test]
    fn canonical_form_and_parsing() {
        assert_eq!(p("4/2^4"), p("1/2^2"));
        assert_eq!(p("0/2^9"), DyadicPoint::zero());
        assert_eq!(p("3/8"), p("3/2^3"));
        assert_eq!(p("0.375").to_string(), "3/2^3");
        assert_eq!(DyadicPoint::zero().to_string(), "0/2^0");
        assert!("8/2^3".parse::<DyadicPoint>().is_err());
        assert!("1/3".parse::<DyadicPoint>().is_err());
    }

    #[test]
    fn digits() {
        for j in 1..10 {
            assert_eq!(DyadicPoint::zero().bit(j), 0);
        }
        let x = p("3/8");
        assert_eq!((x.bit(1), x.bit(2), x.bit(3), x.bit(4)), (0, 1, 1, 0));
        let half = p("1/2");
        assert_eq!((half.bit(1), half.bit(2)), (1, 0));
    }

    #[test]
    fn xor_examples() {
        let x = p("3/8");
        assert_eq!(x.xor_add(&DyadicPoint::zero()), x);
        assert_eq!(x.xor_add(&p("5/8")), p("3/4"));
        assert_eq!(x.xor_add(&x), DyadicPoint::zero());
    }

    #[test]
    fn containing_and_halves() {
        assert_eq!(
            DyadicPoint::zero().containing_interval(5),
            DyadicInterval::new(5, 0u32).unwrap()
        );
        let d = p("3/8").containing_interval(2);
        assert_eq!(d, DyadicInterval::new(2, 1u32).unwrap());
        assert_eq!(d.left().to_rat(), rat(1, 4));
        assert_eq!(d.right(), rat(1, 2));
        assert_eq!(p("1/2").containing_interval(1).left(), p("1/2"));

        let unit = DyadicInterval::unit();
        assert_eq!(unit.half(Side::Plus).to_string(), "1:0");
        assert_eq!(unit.half(Side::Minus).to_string(), "1:1");
        let quarter = DyadicInterval::new(2, 1u32).unwrap();
        let q = quarter.half(Side::Plus).half(Side::Minus);
        assert_eq!(q.left().to_rat(), rat(5, 16));
        assert_eq!(q.right(), rat(3, 8));
    }

    #[test]
    fn interval_text_round_trip() {
        let iv: DyadicInterval = "7:100".parse().unwrap();
        assert_eq!(iv.to_string(), "7:100");
        assert!("2:4".parse::<DyadicInterval>().is_err());
    }

    #[test]
    fn set_merging() {
        // cells 0..4 of level 3 is [0, 1/2)
        let s = DyadicSet::from_cells(3, [0, 1, 2, 3]);
        assert_eq!(s.intervals(), &[DyadicInterval::unit().half(Side::Plus)]);
        let s = DyadicSet::from_cells(3, [1, 2, 3, 6]);
        assert_eq!(s.intervals().len(), 3);
        assert_eq!(s.measure(), rat(1, 2));
        assert!(s.contains(&p("1/8")));
        assert!(!s.contains(&p("0")));
        assert!(s.contains(&p("13/16")));
        assert!(!s.contains(&p("7/8")));
        let c = s.complement();
        assert_eq!(c.measure(), rat(1, 2));
        assert_eq!(c.cells(3), vec![0, 4, 5, 7]);
        assert_eq!(DyadicSet::from_cells(2, 0..4).intervals(), &[DyadicInterval::unit()]);
        assert!(!DyadicSet::empty().complement().is_empty());
    }

    #[test]
    fn quarter_membership_by_digits() {
        // x in ((δ_k)^+)^- iff x_{k+1} = 0 and x_{k+2} = 1
        for level in 0..4u64 {
            for i in 0..(1u64 << 8) {
                let x = DyadicPoint::from_cell(i, 8);
                let q = x.containing_interval(level).half(Side::Plus).half(Side::Minus);
                let by_bits = x.bit(level + 1) == 0 && x.bit(level + 2) == 1;
                assert_eq!(q.contains(&x), by_bits);
            }
        }
    }
}

//! Rademacher and Paley-ordered Walsh functions, Dirichlet kernels, and the
//! fast Walsh–Hadamard transform over exact rationals.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::dyadic::DyadicPoint;
use crate::error::{Error, Result};
use crate::rat::{fmt_rat, lcm_denominators, pow2_int, rat_to_f64, Rat};

/// Anything usable as a Walsh index: machine integers and big integers.
pub trait WalshIndex {
    /// Bit `ε_j` of the binary expansion.
    fn bit(&self, j: u64) -> bool;
    /// Number of binary digits (0 for zero).
    fn bit_len(&self) -> u64;
}

impl WalshIndex for u64 {
    fn bit(&self, j: u64) -> bool {
        j < 64 && (self >> j) & 1 == 1
    }
    fn bit_len(&self) -> u64 {
        64 - self.leading_zeros() as u64
    }
}

impl WalshIndex for usize {
    fn bit(&self, j: u64) -> bool {
        (*self as u64).bit(j)
    }
    fn bit_len(&self) -> u64 {
        (*self as u64).bit_len()
    }
}

impl WalshIndex for BigUint {
    fn bit(&self, j: u64) -> bool {
        BigUint::bit(self, j)
    }
    fn bit_len(&self) -> u64 {
        self.bits()
    }
}

/// The dyadic form `n = Σ ε_j 2^j`, least significant digit first, with a
/// leading `ε_k = 1` (empty for `n = 0`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadicExpansion {
    bits: Vec<u8>,
}

impl DyadicExpansion {
    pub fn of<N: WalshIndex + ?Sized>(n: &N) -> Self {
        DyadicExpansion {
            bits: (0..n.bit_len()).map(|j| n.bit(j) as u8).collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Positions `j` with `ε_j = 1`, increasing.
    pub fn set_positions(&self) -> impl Iterator<Item = u64> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b == 1)
            .map(|(j, _)| j as u64)
    }
}

/// `r_j(x) = 1 - 2 x_{j+1}`.
pub fn rademacher(j: u64, x: &DyadicPoint) -> i32 {
    1 - 2 * x.bit(j + 1) as i32
}

/// `w_n(x) = ∏ r_j(x)^{ε_j}`.
pub fn walsh<N: WalshIndex + ?Sized>(n: &N, x: &DyadicPoint) -> i32 {
    // digits beyond the exponent of x are 0, so those r_j are +1
    let top = n.bit_len().min(x.exponent());
    let mut parity = 0u8;
    for j in 0..top {
        if n.bit(j) {
            parity ^= x.bit(j + 1);
        }
    }
    1 - 2 * parity as i32
}

/// `D_{2^k}(x)`: `2^k` on `[0, 2^-k)` and 0 elsewhere.
pub fn dirichlet_pow2(k: u64, x: &DyadicPoint) -> BigInt {
    match x.leading_zeros() {
        Some(z) if z < k => BigInt::zero(),
        _ => pow2_int(k),
    }
}

/// Modified kernel `D_n^*(x) = Σ_j ε_j r_j(x) D_{2^j}(x)`.
pub fn dirichlet_star<N: WalshIndex + ?Sized>(n: &N, x: &DyadicPoint) -> BigInt {
    // D_{2^j}(x) vanishes as soon as j exceeds the number of leading zeros
    let z = x.leading_zeros().unwrap_or(u64::MAX);
    let mut acc = BigInt::zero();
    for j in 0..n.bit_len() {
        if j > z {
            break;
        }
        if n.bit(j) {
            let term = dirichlet_pow2(j, x);
            if rademacher(j, x) == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
    }
    acc
}

/// `D_n(x) = w_n(x) D_n^*(x)`, which equals `Σ_{k<n} w_k(x)`.
pub fn dirichlet<N: WalshIndex + ?Sized>(n: &N, x: &DyadicPoint) -> BigInt {
    let star = dirichlet_star(n, x);
    if walsh(n, x) == 1 {
        star
    } else {
        -star
    }
}

/// Reverses the low `bits` bits of `i`.
pub(crate) fn bit_reverse(i: u64, bits: u32) -> u64 {
    if bits == 0 {
        0
    } else {
        i.reverse_bits() >> (64 - bits)
    }
}

/// `w_n` at the left endpoint of cell `index` of a `2^-level` grid.
pub fn walsh_cell(n: u64, index: u64, level: u32) -> i32 {
    let digits = bit_reverse(index, level);
    1 - 2 * ((n & digits).count_ones() & 1) as i32
}

/// `D_n^*` at the left endpoint of cell `index` of a `2^-level` grid, by the
/// defining sum.
pub fn dirichlet_star_cell(n: u64, index: u64, level: u32) -> i64 {
    let digits = bit_reverse(index, level);
    let mut acc = 0i64;
    for j in 0..(64 - n.leading_zeros()) {
        if n >> j & 1 == 0 {
            continue;
        }
        // D_{2^j} is nonzero iff the first j digits vanish
        let mask = if j == 0 { 0 } else { (1u64 << j) - 1 };
        if digits & mask != 0 {
            break;
        }
        let r = 1 - 2 * ((digits >> j) & 1) as i64;
        acc += r << j;
    }
    acc
}

pub fn dirichlet_cell(n: u64, index: u64, level: u32) -> i64 {
    walsh_cell(n, index, level) as i64 * dirichlet_star_cell(n, index, level)
}

/// Values of a step function on the `2^-K` grid, stored over a common
/// denominator: `value[i] = numerators[i] / denominator`.
#[derive(Clone, Debug)]
pub struct GridVector {
    resolution: u32,
    numerators: Vec<BigInt>,
    denominator: BigInt,
}

/// Equal as vectors of rationals, whatever the stored denominators.
impl PartialEq for GridVector {
    fn eq(&self, other: &Self) -> bool {
        self.resolution == other.resolution
            && self
                .numerators
                .iter()
                .zip(&other.numerators)
                .all(|(a, b)| a * &other.denominator == b * &self.denominator)
    }
}

impl Eq for GridVector {}

impl GridVector {
    pub fn new(resolution: u32, values: Vec<Rat>) -> Result<Self> {
        let expected = 1usize << resolution;
        if values.len() != expected {
            return Err(Error::GridLength {
                resolution,
                expected,
                actual: values.len(),
            });
        }
        let denominator = lcm_denominators(&values);
        let numerators = values
            .iter()
            .map(|v| v.numer() * (&denominator / v.denom()))
            .collect();
        Ok(GridVector {
            resolution,
            numerators,
            denominator,
        })
    }

    /// Builds directly from integer numerators over a positive denominator.
    pub fn from_parts(resolution: u32, numerators: Vec<BigInt>, denominator: BigInt) -> Result<Self> {
        let expected = 1usize << resolution;
        if numerators.len() != expected {
            return Err(Error::GridLength {
                resolution,
                expected,
                actual: numerators.len(),
            });
        }
        assert!(denominator.is_positive());
        Ok(GridVector {
            resolution,
            numerators,
            denominator,
        })
    }

    pub fn constant(resolution: u32, value: Rat) -> Self {
        Self::new(resolution, vec![value; 1 << resolution]).unwrap()
    }

    /// Samples `w_m` on the grid.
    pub fn walsh_samples(resolution: u32, m: u64) -> Self {
        let values = (0..1u64 << resolution)
            .map(|i| BigInt::from(walsh_cell(m, i, resolution)))
            .collect();
        Self::from_parts(resolution, values, BigInt::one()).unwrap()
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize) -> Rat {
        Rat::new(self.numerators[i].clone(), self.denominator.clone())
    }

    pub fn values(&self) -> Vec<Rat> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub fn numerators(&self) -> &[BigInt] {
        &self.numerators
    }

    pub fn denominator(&self) -> &BigInt {
        &self.denominator
    }

    /// Analysis transform: `out[m] = 2^-K Σ_i v[i] w_m(i / 2^K)`, exact.
    pub fn fwht(&self) -> GridVector {
        let k = self.resolution;
        let mut data: Vec<BigInt> = (0..self.len() as u64)
            .map(|i| self.numerators[bit_reverse(i, k) as usize].clone())
            .collect();
        hadamard_in_place(&mut data);
        GridVector {
            resolution: k,
            numerators: data,
            denominator: &self.denominator << k as usize,
        }
    }

    /// Synthesis: `v[i] = Σ_m c[m] w_m(i / 2^K)` (no normalization), exact.
    pub fn inverse_fwht(&self) -> GridVector {
        let k = self.resolution;
        let mut data = self.numerators.clone();
        hadamard_in_place(&mut data);
        let numerators = (0..self.len() as u64)
            .map(|i| std::mem::take(&mut data[bit_reverse(i, k) as usize]))
            .collect();
        GridVector {
            resolution: k,
            numerators,
            denominator: self.denominator.clone(),
        }
    }

    /// CSV with header `index,value_exact,value_float`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value_exact,value_float\n");
        for i in 0..self.len() {
            let v = self.get(i);
            out.push_str(&format!("{i},{},{}\n", fmt_rat(&v), rat_to_f64(&v)));
        }
        out
    }
}

const PAR_THRESHOLD: usize = 1 << 14;

/// Natural-order Hadamard butterflies, using `i128` when no overflow is possible.
fn hadamard_in_place(data: &mut [BigInt]) {
    let n = data.len();
    let log = n.trailing_zeros();
    let max_bits = data.iter().map(|v| v.bits()).max().unwrap_or(0);
    if max_bits + log as u64 <= 120 {
        let mut small: Vec<i128> = data.iter().map(|v| v.to_i128().unwrap()).collect();
        butterflies(&mut small, |a, b| (a + b, a - b));
        for (d, s) in data.iter_mut().zip(small) {
            *d = BigInt::from(s);
        }
    } else {
        butterflies(data, |a: BigInt, b: BigInt| (&a + &b, a - b));
    }
}

fn butterflies<T, F>(data: &mut [T], op: F)
where
    T: Default + Send,
    F: Fn(T, T) -> (T, T) + Sync,
{
    let n = data.len();
    let mut h = 1;
    while h < n {
        let stage = |chunk: &mut [T]| {
            let (lo, hi) = chunk.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = op(std::mem::take(a), std::mem::take(b));
                *a = s;
                *b = d;
            }
        };
        if n >= PAR_THRESHOLD {
            data.par_chunks_mut(2 * h).for_each(stage);
        } else {
            data.chunks_mut(2 * h).for_each(stage);
        }
        h *= 2;
    }
}

/// Floating-point analysis transform. Approximate: rounding errors grow with
/// `K`; use [`GridVector::fwht`] for exact work.
pub fn fwht_f64(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    assert!(n.is_power_of_two());
    let k = n.trailing_zeros();
    let mut data: Vec<f64> = (0..n as u64)
        .map(|i| values[bit_reverse(i, k) as usize])
        .collect();
    butterflies(&mut data, |a, b| (a + b, a - b));
    let scale = 1.0 / n as f64;
    data.iter_mut().for_each(|v| *v *= scale);
    data
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat, rat_int};

    #[test]
    fn equality_ignores_the_stored_denominator() {
        let a = GridVector::from_parts(1, vec![2.into(), 4.into()], 4.into()).unwrap();
        let b = GridVector::new(1, vec![rat(1, 2), rat(1, 1)]).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, GridVector::new(1, vec![rat(1, 2), rat(1, 3)]).unwrap());
    }

    fn p(s: &str) -> DyadicPoint {
        s.parse().unwrap()
    }

    #[test]
    fn rademacher_values() {
        assert_eq!(rademacher(0, &p("1/4")), 1);
        assert_eq!(rademacher(0, &p("3/4")), -1);
        assert_eq!(rademacher(1, &p("1/4")), -1);
    }

    #[test]
    fn walsh_values() {
        for i in 0..16 {
            assert_eq!(walsh(&0u64, &DyadicPoint::from_cell(i, 4)), 1);
        }
        assert_eq!(walsh(&3u64, &p("1/4")), -1);
        for k in 0..6u64 {
            for i in 0..64 {
                let x = DyadicPoint::from_cell(i, 6);
                assert_eq!(walsh(&(1u64 << k), &x), rademacher(k, &x));
            }
        }
    }

    #[test]
    fn expansion() {
        assert!(DyadicExpansion::of(&0u64).bits().is_empty());
        let e = DyadicExpansion::of(&13u64);
        assert_eq!(e.bits(), &[1, 0, 1, 1]);
        assert_eq!(e.set_positions().collect::<Vec<_>>(), vec![0, 2, 3]);
    }

    #[test]
    fn kernel_values() {
        for i in 0..8 {
            assert_eq!(dirichlet_pow2(0, &DyadicPoint::from_cell(i, 3)), BigInt::one());
        }
        assert_eq!(dirichlet_pow2(3, &p("1/16")), BigInt::from(8));
        assert_eq!(dirichlet_pow2(3, &p("1/4")), BigInt::zero());
        assert_eq!(dirichlet_star(&5u64, &DyadicPoint::zero()), BigInt::from(5));
        assert_eq!(dirichlet_star(&3u64, &p("1/2")), BigInt::from(-1));
        assert_eq!(dirichlet(&7u64, &DyadicPoint::zero()), BigInt::from(7));
        let x = p("3/32");
        for k in 0..6u64 {
            let star = dirichlet_star(&(1u64 << k), &x);
            assert_eq!(star, rademacher(k, &x) * dirichlet_pow2(k, &x));
            assert_eq!(dirichlet(&(1u64 << k), &x), dirichlet_pow2(k, &x));
        }
    }

    #[test]
    fn cell_fast_paths_match_point_versions() {
        for n in 0..70u64 {
            for i in 0..64 {
                let x = DyadicPoint::from_cell(i, 6);
                assert_eq!(walsh_cell(n, i, 6), walsh(&n, &x));
                assert_eq!(BigInt::from(dirichlet_star_cell(n, i, 6)), dirichlet_star(&n, &x));
            }
        }
    }

    #[test]
    fn big_indices() {
        let n = BigUint::one() << 300u32;
        assert_eq!(dirichlet(&n, &DyadicPoint::zero()), BigInt::from(n.clone()));
        assert_eq!(walsh(&n, &p("1/2")), 1);
    }

    #[test]
    fn transform_examples() {
        let c = GridVector::constant(3, rat(5, 2)).fwht();
        assert_eq!(c.get(0), rat(5, 2));
        assert!((1..8).all(|i| c.get(i) == rat_int(0)));
        for m in 0..16u64 {
            let t = GridVector::walsh_samples(4, m).fwht();
            for i in 0..16 {
                assert_eq!(t.get(i), rat_int((i as u64 == m) as i64));
            }
        }
        let v = GridVector::new(2, vec![rat(1, 3), rat(-2, 5), rat(7, 1), rat(0, 1)]).unwrap();
        let back = v.fwht().inverse_fwht();
        assert_eq!(back.values(), v.values());
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(matches!(
            GridVector::new(3, vec![rat(1, 1); 7]),
            Err(Error::GridLength { .. })
        ));
    }

    #[test]
    fn float_path_is_close() {
        let v: Vec<f64> = (0..32).map(|i| (i as f64).sin()).collect();
        let exact = GridVector::new(5, v.iter().map(|x| Rat::from_float(*x).unwrap()).collect())
            .unwrap()
            .fwht();
        let approx = fwht_f64(&v);
        for (i, a) in approx.iter().enumerate() {
            assert!((rat_to_f64(&exact.get(i)) - a).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_dump() {
        let g = GridVector::new(1, vec![rat(1, 2), rat(-1, 1)]).unwrap();
        assert_eq!(g.to_csv(), "index,value_exact,value_float\n0,1/2,0.5\n1,-1/1,-1\n");
    }
}

//! Walsh–Fourier coefficients, partial sums, strong means and exceedance
//! densities.
//!
//! Partial sums follow the convention `S_l f = Σ_{m<l} f̂(m) w_m`, which makes
//! `S_l f(x) = ∫ f(t) D_l(x ⊕ t) dt` with `D_l = Σ_{k<l} w_k`. Two independent
//! evaluation paths are provided on grids (coefficient prefix and kernel
//! integral) and a third, symbolic one for [`AtomSum`]s.

mod atoms;
mod phi;

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rayon::prelude::*;

use crate::certified::Interval;
use crate::dyadic::DyadicPoint;
use crate::error::{Error, Result};
use crate::rat::{fmt_rat, rat_to_f64, Rat};
use crate::walsh::{dirichlet_cell, walsh_cell, GridVector};

pub use atoms::{Atom, AtomSum, SpectralBlock, MAX_LOCAL_LEVEL};
pub use phi::{exact_rat_pow, rat_pow, ExtReal, PhiClass, PhiKind, PhiSpec};

/// A function constant on each cell of the `2^-K` grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepFunction {
    grid: GridVector,
}

impl StepFunction {
    pub fn new(grid: GridVector) -> Self {
        StepFunction { grid }
    }

    pub fn from_values(resolution: u32, values: Vec<Rat>) -> Result<Self> {
        Ok(Self::new(GridVector::new(resolution, values)?))
    }

    pub fn grid(&self) -> &GridVector {
        &self.grid
    }

    pub fn resolution(&self) -> u32 {
        self.grid.resolution()
    }

    /// Value on the cell containing `x`.
    pub fn value_at(&self, x: &DyadicPoint) -> Rat {
        self.grid.get(x.cell_index_u64(self.resolution() as u64) as usize)
    }

    /// `‖f‖₁ = 2^-K Σ |values|`, exact.
    pub fn l1_norm(&self) -> Rat {
        let total: BigInt = self.grid.numerators().iter().map(|v| v.abs()).sum();
        Rat::new(total, self.grid.denominator() << self.resolution() as usize)
    }

    pub fn mean(&self) -> Rat {
        let total: BigInt = self.grid.numerators().iter().sum();
        Rat::new(total, self.grid.denominator() << self.resolution() as usize)
    }
}

/// `f̂(m)` for `0 <= m < 2^K`.
pub fn coefficients(f: &StepFunction) -> GridVector {
    f.grid.fwht()
}

/// Partial sums of one step function, with its coefficients computed once.
#[derive(Clone, Debug)]
pub struct PartialSums {
    values: GridVector,
    coeffs: GridVector,
}

impl PartialSums {
    pub fn new(f: &StepFunction) -> Self {
        PartialSums {
            values: f.grid.clone(),
            coeffs: coefficients(f),
        }
    }

    pub fn coefficients(&self) -> &GridVector {
        &self.coeffs
    }

    fn grid_index(&self, x: &DyadicPoint) -> Result<u64> {
        let k = self.coeffs.resolution();
        if x.exponent() > k as u64 {
            return Err(Error::OffGrid {
                point: x.to_string(),
                resolution: k,
            });
        }
        Ok(x.cell_index_u64(k as u64))
    }

    /// `S_l f(x)` for `l <= 2^K` and `x` on the grid.
    pub fn at(&self, l: u64, x: &DyadicPoint) -> Result<Rat> {
        let k = self.coeffs.resolution();
        if l > 1u64 << k {
            return Err(Error::Aliased {
                index: l.to_string(),
                resolution: k,
            });
        }
        let xi = self.grid_index(x)?;
        let acc: BigInt = self.coeffs.numerators()[..l as usize]
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(m, c)| {
                if walsh_cell(m as u64, xi, k) > 0 {
                    c.clone()
                } else {
                    -c
                }
            })
            .sum();
        Ok(Rat::new(acc, self.coeffs.denominator().clone()))
    }

    /// `S_1 f(x), …, S_count f(x)`. Cuts beyond `2^K` take the value `f(x)`,
    /// since the spectrum of a step function lies below `2^K`.
    pub fn series(&self, x: &DyadicPoint, count: u64) -> Result<Vec<Rat>> {
        let k = self.coeffs.resolution();
        let xi = self.grid_index(x)?;
        let len = self.coeffs.len() as u64;
        let denom = self.coeffs.denominator();
        let mut out = Vec::with_capacity(count as usize);
        let mut acc = BigInt::zero();
        let mut last = Rat::zero();
        for m in 0..count.min(len) {
            let c = &self.coeffs.numerators()[m as usize];
            if !c.is_zero() {
                if walsh_cell(m, xi, k) > 0 {
                    acc += c;
                } else {
                    acc -= c;
                }
                last = Rat::new(acc.clone(), denom.clone());
            }
            out.push(last.clone());
        }
        if count > len {
            let tail = self.values.get(xi as usize);
            out.resize(count as usize, tail);
        }
        Ok(out)
    }
}

/// `S_l f(x)` by the coefficient prefix sum.
pub fn partial_sum_grid(f: &StepFunction, l: u64, x: &DyadicPoint) -> Result<Rat> {
    PartialSums::new(f).at(l, x)
}

/// `S_l f(x)` as the exact grid integral `2^-K Σ_i f(t_i) D_l(x ⊕ t_i)`;
/// independent of the transform.
pub fn partial_sum_kernel(f: &StepFunction, l: u64, x: &DyadicPoint) -> Result<Rat> {
    let k = f.resolution();
    if l > 1u64 << k {
        return Err(Error::Aliased {
            index: l.to_string(),
            resolution: k,
        });
    }
    if x.exponent() > k as u64 {
        return Err(Error::OffGrid {
            point: x.to_string(),
            resolution: k,
        });
    }
    let xi = x.cell_index_u64(k as u64);
    let acc: BigInt = f
        .grid
        .numerators()
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(i, v)| v * dirichlet_cell(l, xi ^ i as u64, k))
        .sum();
    Ok(Rat::new(acc, f.grid.denominator() << k as usize))
}

/// CSV dump `l,S_l_exact,S_l_float` of cuts `first, first+1, …`.
pub fn partial_sums_csv(first: u64, sums: &[Rat]) -> String {
    let mut out = String::from("l,S_l_exact,S_l_float\n");
    for (i, s) in sums.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{:e}\n",
            first + i as u64,
            fmt_rat(s),
            rat_to_f64(s)
        ));
    }
    out
}

/// `(1/N) Σ_{k=1}^N Φ(|S_k|)`, with `sums[k-1] = S_k`.
pub fn strong_mean(sums: &[Rat], phi: &PhiSpec, n: usize, prec: u32) -> ExtReal {
    strong_mean_centered(sums, &Rat::zero(), phi, n, prec)
}

/// `(1/N) Σ_{k=1}^N Φ(|S_k - s|)`.
pub fn strong_mean_centered(sums: &[Rat], s: &Rat, phi: &PhiSpec, n: usize, prec: u32) -> ExtReal {
    strong_means_centered(sums, s, phi, &[n], prec).pop().unwrap()
}

/// [`strong_mean`] for several `N` at once.
pub fn strong_means(sums: &[Rat], phi: &PhiSpec, ns: &[usize], prec: u32) -> Vec<ExtReal> {
    strong_means_centered(sums, &Rat::zero(), phi, ns, prec)
}

/// [`strong_mean_centered`] for several `N` at once; `Φ` is evaluated once
/// per distinct `|S_k - s|`.
pub fn strong_means_centered(sums: &[Rat], s: &Rat, phi: &PhiSpec, ns: &[usize], prec: u32) -> Vec<ExtReal> {
    let max_n = ns.iter().copied().max().unwrap_or(0);
    assert!(ns.iter().all(|&n| n >= 1) && sums.len() >= max_n, "need S_1 … S_N");
    let values: Vec<Rat> = sums[..max_n].iter().map(|v| (v - s).abs()).collect();
    let mut distinct: Vec<Rat> = values.clone();
    distinct.sort();
    distinct.dedup();
    let index: HashMap<&Rat, usize> = distinct.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let phis: Vec<ExtReal> = distinct.par_iter().map(|v| phi.eval(v, prec + 16)).collect();

    let mut order: Vec<usize> = (0..ns.len()).collect();
    order.sort_by_key(|&i| ns[i]);
    let mut counts = vec![0u64; distinct.len()];
    let mut seen = 0;
    let mut out = vec![ExtReal::Finite(Interval::from_int(0, prec)); ns.len()];
    for i in order {
        let n = ns[i];
        for v in &values[seen..n] {
            counts[index[v]] += 1;
        }
        seen = seen.max(n);
        let total = counts
            .iter()
            .zip(&phis)
            .filter(|(c, _)| **c > 0)
            .fold(ExtReal::Finite(Interval::from_int(0, prec + 16)), |acc, (c, p)| {
                acc.add(&p.mul_rat(&Rat::from_integer((*c).into())))
            });
        out[i] = total.mul_rat(&Rat::new(1.into(), (n as u64).into()));
    }
    out
}

/// `#{k <= N : |S_k| > threshold} / N`, exact.
pub fn exceed_density(sums: &[Rat], threshold: &Rat, n: usize) -> Rat {
    assert!(n >= 1 && sums.len() >= n, "need S_1 … S_N");
    let count = sums[..n].iter().filter(|v| v.abs() > *threshold).count();
    Rat::new((count as u64).into(), (n as u64).into())
}

pub fn phi_classify(phi: &PhiSpec) -> PhiClass {
    phi.classify()
}

/// Largest `|S_k|` over `k <= N`, for reports.
pub fn max_abs(sums: &[Rat]) -> Rat {
    sums.iter().map(|v| v.abs()).max().unwrap_or_else(Rat::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_step(k: u32, rng: &mut ChaCha8Rng) -> StepFunction {
        let vals = (0..1usize << k)
            .map(|_| rat(rng.gen_range(-20..=20), rng.gen_range(1..=6)))
            .collect();
        StepFunction::from_values(k, vals).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        let w5 = StepFunction::new(GridVector::walsh_samples(4, 5));
        let c = coefficients(&w5);
        for m in 0..16 {
            assert_eq!(c.get(m), rat((m == 5) as i64, 1));
        }
        let three = StepFunction::new(GridVector::constant(3, rat(3, 1)));
        assert_eq!(coefficients(&three).get(0), rat(3, 1));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_step(5, &mut rng);
        assert_eq!(coefficients(&f).get(0), f.mean());
    }

    #[test]
    fn partial_sum_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_step(4, &mut rng);
        let x = DyadicPoint::from_cell(9, 4);
        assert_eq!(partial_sum_grid(&f, 0, &x).unwrap(), rat(0, 1));
        assert_eq!(partial_sum_grid(&f, 16, &x).unwrap(), f.value_at(&x));
        assert!(partial_sum_grid(&f, 17, &x).is_err());
        assert!(partial_sum_grid(&f, 3, &DyadicPoint::from_cell(1, 5)).is_err());
        let w3 = StepFunction::new(GridVector::walsh_samples(4, 3));
        for i in 0..16 {
            let x = DyadicPoint::from_cell(i, 4);
            assert_eq!(partial_sum_grid(&w3, 3, &x).unwrap(), rat(0, 1));
            assert_eq!(partial_sum_grid(&w3, 4, &x).unwrap(), w3.value_at(&x));
        }
    }

    #[test]
    fn two_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..=6u32 {
            let f = random_step(k, &mut rng);
            let ps = PartialSums::new(&f);
            for i in 0..1u64 << k {
                let x = DyadicPoint::from_cell(i, k as u64);
                let series = ps.series(&x, (1 << k) + 3).unwrap();
                for l in 0..=1u64 << k {
                    let a = ps.at(l, &x).unwrap();
                    assert_eq!(a, partial_sum_kernel(&f, l, &x).unwrap());
                    if l >= 1 {
                        assert_eq!(a, series[l as usize - 1]);
                    }
                }
                assert_eq!(series.last().unwrap(), &f.value_at(&x));
            }
        }
    }

    #[test]
    fn norms() {
        let f = StepFunction::from_values(1, vec![rat(-1, 2), rat(3, 2)]).unwrap();
        assert_eq!(f.l1_norm(), rat(1, 1));
        assert_eq!(f.mean(), rat(1, 2));
    }

    #[test]
    fn strong_mean_examples() {
        let pow2: PhiSpec = "pow:2".parse().unwrap();
        let zeros = vec![rat(0, 1); 5];
        assert_eq!(strong_mean(&zeros, &pow2, 5, 64).to_f64(), 0.0);
        let consts = vec![rat(3, 1); 4];
        let e = strong_mean(&consts, &pow2, 4, 64);
        let ExtReal::Finite(iv) = e else { panic!() };
        assert!(iv.contains_rat(&rat(9, 1)));
        let s = vec![rat(1, 1), rat(0, 1), rat(0, 1)];
        let ExtReal::Finite(iv) = strong_mean(&s, &pow2, 3, 64) else { panic!() };
        assert!(iv.contains_rat(&rat(1, 3)));
        assert!(iv.width_f64() < 1e-15);
        let centered = strong_mean_centered(&consts, &rat(3, 1), &pow2, 4, 64);
        assert_eq!(centered.to_f64(), 0.0);
    }

    #[test]
    fn batched_means_match_single() {
        let phi: PhiSpec = "exppow:2".parse().unwrap();
        let s: Vec<Rat> = (0..40).map(|k| rat((k * 7 % 11) - 5, 4)).collect();
        let ns = [40, 1, 17, 17, 3];
        let batch = strong_means(&s, &phi, &ns, 96);
        for (n, b) in ns.iter().zip(&batch) {
            assert_eq!(*b, strong_mean(&s, &phi, *n, 96), "N = {n}");
        }
    }

    #[test]
    fn exceed_density_examples() {
        assert_eq!(exceed_density(&vec![rat(0, 1); 4], &rat(1, 1), 4), rat(0, 1));
        assert_eq!(exceed_density(&vec![rat(2, 1); 7], &rat(1, 1), 7), rat(1, 1));
        let s = [rat(3, 1), rat(0, 1), rat(3, 1), rat(0, 1)];
        assert_eq!(exceed_density(&s, &rat(1, 1), 4), rat(1, 2));
    }

    #[test]
    fn classify_examples() {
        let c = |s: &str| phi_classify(&s.parse().unwrap());
        assert_eq!(c("pow:17"), PhiClass::Subexponential);
        assert_eq!(c("exp:3"), PhiClass::Subexponential);
        assert_eq!(c("exppow:2"), PhiClass::Superexponential);
    }
}

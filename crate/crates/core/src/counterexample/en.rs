//! The set `E_n` where `|Σ_{j<=n} r_j r_{j+1}| < n/3`, the selector `m(x)`,
//! and the integral `∫_0^x D_m^*(x ⊕ t) dt`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::certified::{decide, Interval};
use crate::dyadic::{DyadicPoint, DyadicSet};
use crate::error::{Error, Result};
use crate::rat::{fmt_rat, inv_pow2, pow2, Rat};
use crate::walsh::{dirichlet_star_cell, rademacher};

use super::report::LemmaReport;

/// Largest `n` for which `E_n` is enumerated cell by cell.
pub const MAX_ENUMERATED_N: u32 = 22;

/// Number of `j in 1..=n` with `x_{j+1} != x_{j+2}` for the level-`(n+2)`
/// cell `index`, i.e. the sign changes among `r_1, …, r_{n+1}`.
fn changes_of_cell(index: u64, n: u32) -> u32 {
    let y = index & ((1u64 << (n + 1)) - 1); // digits x_2 … x_{n+2}
    ((y ^ (y >> 1)) & ((1u64 << n) - 1)).count_ones()
}

/// `|n - 2·changes| < n/3`.
fn in_en_by_changes(changes: u32, n: u32) -> bool {
    3 * (n as i64 - 2 * changes as i64).abs() < n as i64
}

pub fn in_en(x: &DyadicPoint, n: u32) -> bool {
    let changes = (2..=n as u64 + 1)
        .filter(|&j| x.bit(j) != x.bit(j + 1))
        .count() as u32;
    in_en_by_changes(changes, n)
}

/// `E_n` as a canonical union of level-`(n+2)` intervals.
pub fn build_en(n: u32) -> Result<DyadicSet> {
    if n == 0 || n > MAX_ENUMERATED_N {
        return Err(Error::InvalidParams(format!(
            "E_n is enumerated for 1 <= n <= {MAX_ENUMERATED_N}, got {n}"
        )));
    }
    let cells: Vec<u64> = (0..1u64 << (n + 2))
        .into_par_iter()
        .filter(|&i| in_en_by_changes(changes_of_cell(i, n), n))
        .collect();
    Ok(DyadicSet::from_cells(n as u64 + 2, cells))
}

/// Number of sign vectors `(s_1, …, s_{n+1})` with `Σ s_j s_{j+1} = v`, at
/// index `v + n`. Computed by dynamic programming over the last sign and
/// the running sum.
pub fn product_sum_counts(n: u32) -> Vec<BigUint> {
    let width = 2 * n as usize + 1;
    let offset = n as usize;
    // by_last[s][v + n], s = 0 for +1 and 1 for -1
    let mut by_last = [vec![BigUint::zero(); width], vec![BigUint::zero(); width]];
    by_last[0][offset] = BigUint::one();
    by_last[1][offset] = BigUint::one();
    for _ in 0..n {
        let mut next = [vec![BigUint::zero(); width], vec![BigUint::zero(); width]];
        for last in 0..2 {
            for v in 0..width {
                let count = &by_last[last][v];
                if count.is_zero() {
                    continue;
                }
                // same sign: product +1; flipped sign: product -1
                next[last][v + 1] += count;
                next[1 - last][v - 1] += count;
            }
        }
        by_last = next;
    }
    by_last[0]
        .iter()
        .zip(&by_last[1])
        .map(|(a, b)| a + b)
        .collect()
}

fn measure_where(n: u32, keep: impl Fn(i64) -> bool) -> Rat {
    let counts = product_sum_counts(n);
    let total: BigUint = counts
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i as i64 - n as i64))
        .map(|(_, c)| c)
        .sum();
    Rat::new(BigInt::from(total), BigInt::from(pow2(n as u64 + 1)))
}

/// `|E_n|`, exact.
pub fn measure_en(n: u32) -> Rat {
    measure_where(n, |v| 3 * v.abs() < n as i64)
}

/// `1 - 2 e^{-n/36}` as a certified enclosure.
fn measure_bound(n: u32, prec: u32) -> Interval {
    let e = Interval::from_rat(&Rat::new((-(n as i64)).into(), 36.into()), prec).exp();
    Interval::from_int(1, prec).sub(&e.mul_pow2(1))
}

/// Certified `|E_n| > 1 - 2 e^{-n/36}`, with the exact measure.
pub fn measure_en_bound_holds(n: u32) -> (Rat, Option<bool>) {
    let m = measure_en(n);
    let holds = decide(|prec| measure_bound(n, prec).lt(&Interval::from_rat(&m, prec)));
    (m, holds)
}

/// The Rademacher-polynomial tail bound for the products `r_j r_{j+1}`:
/// `|{|Σ φ_j| <= λ}| >= 1 - 2 e^{-λ²/(4n)}` at `λ = n/3`.
pub fn check_khinchine_tail(n: u32) -> LemmaReport {
    let mut report = LemmaReport::new("tail-bound");
    report.param("n", n);
    let lhs = measure_where(n, |v| 3 * v.abs() <= n as i64);
    let bound = |prec| measure_bound(n, prec); // λ²/(4n) = n/36
    let holds = decide(|prec| bound(prec).le(&Interval::from_rat(&lhs, prec)));
    report.check_certified(
        "|{|sum r_j r_(j+1)| <= n/3}| >= 1 - 2exp(-(n/3)^2/(4n))",
        fmt_rat(&lhs),
        bound(96),
        holds,
        "",
    );
    report
}

/// Sign-change positions `k_1 < … < k_ν` with `r_k(x) = 1`, `r_{k+1}(x) = -1`,
/// and the integers `m = Σ 2^{k_i}`, `p = m (1 + 2^n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectorResult {
    pub positions: Vec<u64>,
    pub nu: usize,
    pub m: u64,
    pub p: BigUint,
}

/// All sign changes of type `(+1, -1)` at positions `1 <= k <= n - 1`.
///
/// Position `n` would need `r_{n+1}`, and including it would allow
/// `m >= 2^n`; the identities that use `p = m (1 + 2^n)` need `m < 2^n`.
pub fn select_m(x: &DyadicPoint, n: u32) -> Result<SelectorResult> {
    assert!((1..=62).contains(&n));
    let positions: Vec<u64> = (1..n as u64)
        .filter(|&k| rademacher(k, x) == 1 && rademacher(k + 1, x) == -1)
        .collect();
    if positions.is_empty() {
        return Err(Error::EmptySelection { n });
    }
    let m = positions.iter().map(|k| 1u64 << k).sum::<u64>();
    let p = BigUint::from(m) * (pow2(n as u64) + BigUint::one());
    Ok(SelectorResult {
        nu: positions.len(),
        positions,
        m,
        p,
    })
}

/// `∫_0^x D_m^*(x ⊕ t) dt`, exact, by splitting `D_m^*` into its
/// `r_k D_{2^k}` terms: each contributes `2^k r_k(x) ∫_{δ_k(x) ∩ [0,x)} r_k(t) dt`.
pub fn integral_dstar_closed(m: u64, x: &DyadicPoint) -> Rat {
    let xr = x.to_rat();
    let mut total = Rat::zero();
    for k in 0..64u64 {
        if m >> k & 1 == 0 {
            continue;
        }
        let a = Rat::new(BigInt::from(x.cell_index(k)), BigInt::from(pow2(k)));
        let mid = &a + inv_pow2(k + 1);
        // r_k(t) = +1 on the left half of δ_k(x) and -1 on the right half
        let inner = if xr <= mid {
            &xr - &a
        } else {
            &mid * Rat::from_integer(2.into()) - &a - &xr
        };
        let scaled = inner * Rat::from_integer(BigInt::from(pow2(k)));
        if rademacher(k, x) == 1 {
            total += scaled;
        } else {
            total -= scaled;
        }
    }
    total
}

/// `2^-K Σ_{cells t ⊂ [0,x)} D_m^*(x ⊕ t)`, exact on the `2^-K` grid.
pub fn integral_dstar_grid(m: u64, x: &DyadicPoint, k: u32) -> Result<Rat> {
    let needed = (64 - m.leading_zeros() as u64).max(x.exponent());
    if (k as u64) < needed || k > 40 {
        return Err(Error::InvalidParams(format!(
            "grid resolution {k} must be at least {needed} (and at most 40)"
        )));
    }
    let xi = x.cell_index_u64(k as u64);
    let sum: i128 = (0..xi)
        .into_par_iter()
        .map(|i| dirichlet_star_cell(m, xi ^ i, k) as i128)
        .sum();
    Ok(Rat::new(BigInt::from(sum), BigInt::from(pow2(k as u64))))
}

/// `r_k(x ⊕ t) = 1` for every grid point `t` of `δ_k(x) ∩ [0, x)` and every
/// selected position `k`.
pub fn sign_constant_on_blocks(x: &DyadicPoint, n: u32, resolution: u32) -> bool {
    let Ok(sel) = select_m(x, n) else {
        return true;
    };
    let xi = x.cell_index_u64(resolution as u64);
    sel.positions.iter().all(|&k| {
        let shift = resolution as u64 - k;
        let start = (xi >> shift) << shift;
        (start..xi).all(|t| {
            let y = DyadicPoint::from_cell(xi ^ t, resolution as u64);
            rademacher(k, &y) == 1
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Lemma2Mode {
    Exhaustive,
    Sample { count: u64, seed: u64 },
}

struct CellOutcome {
    index: u64,
    nu: usize,
    m: u64,
    integral: Rat,
}

fn outcome(index: u64, n: u32) -> CellOutcome {
    let x = DyadicPoint::from_cell(index, n as u64 + 2);
    match select_m(&x, n) {
        Ok(sel) => CellOutcome {
            index,
            nu: sel.nu,
            m: sel.m,
            integral: integral_dstar_closed(sel.m, &x),
        },
        Err(_) => CellOutcome {
            index,
            nu: 0,
            m: 0,
            integral: Rat::zero(),
        },
    }
}

/// Checks the measure bound and, for every point of `E_n` examined, that the
/// selector gives `m < 2^n` with `∫_0^x D_m^*(x ⊕ t) dt >= n/30`.
///
/// Points are left endpoints of level-`(n+2)` cells: every selected term of
/// the integral increases with `x` inside such a cell, so left endpoints are
/// the worst case.
pub fn verify_lemma2(n: u32, mode: Lemma2Mode, exhaustive_cap: u32) -> Result<LemmaReport> {
    if n == 0 || n > 62 {
        return Err(Error::InvalidParams(format!("n must lie in 1..=62, got {n}")));
    }
    let mut report = LemmaReport::new("lemma2");
    report.param("n", n);
    let level = n as u64 + 2;

    let (measure, holds) = measure_en_bound_holds(n);
    let bound = measure_bound(n, 96);
    let vacuous = bound.hi().sign() != num_bigint::Sign::Plus;
    report.check_certified(
        "|E_n| > 1 - 2exp(-n/36)",
        fmt_rat(&measure),
        &bound,
        holds,
        if vacuous { "vacuous: bound <= 0" } else { "" },
    );

    let cells: Vec<u64> = match mode {
        Lemma2Mode::Exhaustive => {
            if n > exhaustive_cap.min(MAX_ENUMERATED_N) {
                return Err(Error::InvalidParams(format!(
                    "exhaustive mode is capped at n = {}",
                    exhaustive_cap.min(MAX_ENUMERATED_N)
                )));
            }
            report.param("mode", "exhaustive");
            let set = build_en(n)?;
            let enumerated = Rat::new(
                BigInt::from(set.cells(level).len()),
                BigInt::from(pow2(level)),
            );
            report.check(
                "DP measure equals enumerated measure",
                fmt_rat(&measure),
                fmt_rat(&enumerated),
                measure == enumerated,
                "",
            );
            set.cells(level)
        }
        Lemma2Mode::Sample { count, seed } => {
            report.param("mode", format!("sample({count})"));
            report.param("seed", seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(count as usize);
            let mut attempts = 0u64;
            while (out.len() as u64) < count && attempts < count.saturating_mul(1000).max(1000) {
                attempts += 1;
                let i = rng.gen::<u64>() >> (64 - level);
                if in_en_by_changes(changes_of_cell(i, n), n) {
                    out.push(i);
                }
            }
            out
        }
    };
    report.info("points of E_n examined", cells.len(), "", "");
    if cells.is_empty() {
        report.info("E_n is empty; the pointwise claims hold vacuously", 0, "", "");
        return Ok(report);
    }

    let outcomes: Vec<CellOutcome> = cells.par_iter().map(|&i| outcome(i, n)).collect();
    let point = |i: u64| DyadicPoint::from_cell(i, level).to_string();

    let empty: Vec<&CellOutcome> = outcomes.iter().filter(|o| o.nu == 0).collect();
    report.check(
        "a sign change (+1,-1) exists at some k <= n-1",
        format!("{} empty", empty.len()),
        "0 empty",
        empty.is_empty(),
        empty.first().map(|o| point(o.index)).unwrap_or_default(),
    );

    let max_m = outcomes.iter().max_by_key(|o| (o.m, std::cmp::Reverse(o.index))).unwrap();
    report.check(
        "m < 2^n",
        max_m.m,
        pow2(n as u64),
        (max_m.m as u128) < 1u128 << n,
        point(max_m.index),
    );

    let nu_floor = Rat::new(BigInt::from(n as i64 - 6), BigInt::from(6)); // n/6 - 1
    let min_nu = outcomes.iter().min_by_key(|o| (o.nu, o.index)).unwrap();
    report.check(
        "nu >= n/6 - 1",
        min_nu.nu,
        fmt_rat(&nu_floor),
        Rat::from_integer(min_nu.nu.into()) >= nu_floor,
        point(min_nu.index),
    );

    let target = Rat::new(BigInt::from(n), BigInt::from(30));
    let min_int = outcomes
        .iter()
        .min_by(|a, b| a.integral.cmp(&b.integral).then(a.index.cmp(&b.index)))
        .unwrap();
    let failures = outcomes.iter().filter(|o| o.integral < target).count();
    report.check(
        "integral_0^x D_m^*(x+t) dt >= n/30 (minimum over E_n)",
        fmt_rat(&min_int.integral),
        fmt_rat(&target),
        failures == 0,
        format!("x={} m={} failures={failures}", point(min_int.index), min_int.m),
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn binomial(n: u64, k: u64) -> BigUint {
        (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn e1_is_empty() {
        assert!(build_en(1).unwrap().is_empty());
        assert_eq!(measure_en(1), rat(0, 1));
    }

    #[test]
    fn alternating_cell_is_excluded() {
        // digits x_2..x_5 = 0,1,0,1 give products (-1,-1,-1)
        let x: DyadicPoint = "5/2^5".parse().unwrap();
        assert_eq!((2..=5).map(|j| x.bit(j)).collect::<Vec<_>>(), [0, 1, 0, 1]);
        assert!(!in_en(&x, 3));
        assert!(!build_en(3).unwrap().contains(&x));
    }

    #[test]
    fn membership_reads_only_digits_2_to_n_plus_2() {
        let n = 6;
        let set = build_en(n).unwrap();
        for i in 0..1u64 << (n + 2) {
            let base = DyadicPoint::from_cell(i, n as u64 + 2);
            let flipped = DyadicPoint::from_cell(i ^ (1 << (n + 1)), n as u64 + 2);
            let finer = DyadicPoint::from_cell(i * 8 + 5, n as u64 + 5);
            assert_eq!(in_en(&base, n), in_en(&flipped, n));
            assert_eq!(in_en(&base, n), in_en(&finer, n));
            assert_eq!(in_en(&base, n), set.contains(&base));
        }
    }

    #[test]
    fn dp_matches_enumeration_and_binomials() {
        for n in 1..=14u32 {
            let set = build_en(n).unwrap();
            assert_eq!(measure_en(n), set.measure(), "n = {n}");
            let counts = product_sum_counts(n);
            for c in 0..=n as u64 {
                // c sign changes give sum n - 2c, with two choices of s_1
                let v = 2 * (n as usize - c as usize);
                assert_eq!(counts[v], binomial(n as u64, c) * 2u32);
            }
        }
    }

    #[test]
    fn measure_at_100_clears_its_bound() {
        let (m, holds) = measure_en_bound_holds(100);
        assert_eq!(holds, Some(true));
        assert!(crate::rat::rat_to_f64(&m) > 0.8752);
    }

    #[test]
    fn tail_bound_instances() {
        for n in [50, 100, 200] {
            assert!(check_khinchine_tail(n).passed());
        }
    }

    #[test]
    fn selector_examples() {
        // digits x_2 … x_{n+2} alternate 0,1,0,1,…
        let n = 8u32;
        let mut idx = 0u64;
        for j in 1..=(n as u64 + 2) {
            let digit = if j >= 2 && j % 2 == 1 { 1 } else { 0 };
            idx = idx << 1 | digit;
        }
        let x = DyadicPoint::from_cell(idx, n as u64 + 2);
        let sel = select_m(&x, n).unwrap();
        assert_eq!(sel.positions, [1, 3, 5, 7]);
        assert_eq!(sel.m, 2 + 8 + 32 + 128);
        assert_eq!(sel.p, BigUint::from(sel.m) * 257u32);
        assert!(matches!(select_m(&DyadicPoint::zero(), n), Err(Error::EmptySelection { .. })));
    }

    #[test]
    fn integral_examples() {
        assert_eq!(integral_dstar_closed(37, &DyadicPoint::zero()), rat(0, 1));
        let half: DyadicPoint = "1/2".parse().unwrap();
        assert_eq!(integral_dstar_grid(1, &half, 3).unwrap(), rat(-1, 2));
        assert_eq!(integral_dstar_closed(1, &half), rat(-1, 2));
        // m = 2^k with x at the left end of the right quarter of the left half of δ_k
        for k in 0..6u64 {
            let x = DyadicPoint::from_cell(4 * ((1 << k) - 1) + 1, k + 2);
            assert_eq!(integral_dstar_closed(1 << k, &x), rat(1, 4));
        }
        assert!(integral_dstar_grid(1 << 5, &half, 4).is_err());
        assert!(integral_dstar_grid(1, &"1/2^6".parse().unwrap(), 5).is_err());
    }

    #[test]
    fn closed_integral_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let m = rng.gen_range(1..1024u64);
            let x = DyadicPoint::from_cell(rng.gen_range(0..1 << 14), 14);
            assert_eq!(integral_dstar_closed(m, &x), integral_dstar_grid(m, &x, 14).unwrap());
        }
    }

    #[test]
    fn sign_is_constant_on_selected_blocks() {
        let n = 6;
        for i in 0..1u64 << (n + 2) {
            assert!(sign_constant_on_blocks(&DyadicPoint::from_cell(i, n as u64 + 2), n, 10));
        }
    }

    #[test]
    fn lemma2_small_cases() {
        let r = verify_lemma2(12, Lemma2Mode::Exhaustive, 16).unwrap();
        assert!(r.passed(), "{}", r.summary());
        let r = verify_lemma2(1, Lemma2Mode::Exhaustive, 16).unwrap();
        assert!(r.passed(), "{}", r.summary());
        assert!(r.summary().contains("vacuous"));
        assert!(verify_lemma2(17, Lemma2Mode::Exhaustive, 16).is_err());
    }
}

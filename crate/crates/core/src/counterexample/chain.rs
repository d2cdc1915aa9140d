//! Scalar inequality chains behind the thresholds, and the staged sum
//! `f = Σ 2^-k g_k`.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};

use crate::certified::{decide, ln2, Interval};
use crate::dyadic::DyadicPoint;
use crate::error::{Error, Result};
use crate::fourier::{AtomSum, PhiClass, PhiSpec};
use crate::rat::{fmt_rat, inv_pow2, pow2, Rat};

use super::construction::build_fn;
use super::report::LemmaReport;
use super::{gamma, gamma_lower_bound_holds, ConstructionParams};

/// Upper end of the search for the minimal `n_k`.
pub const MINIMAL_NK_SEARCH_CAP: u64 = 1 << 62;

fn frac(a: i64, b: i64) -> Rat {
    Rat::new(BigInt::from(a), BigInt::from(b))
}

/// `t = n / (50 · 2^k)`.
fn stage_threshold(n: u64, k: u32) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(50) * BigInt::from(pow2(k as u64)))
}

fn growth_holds(phi: &PhiSpec, n: u64, k: u32) -> Option<bool> {
    phi.exceeds_exp(&stage_threshold(n, k), &Rat::from_integer(BigInt::from(2 * n as u128 as i128)), 1)
}

/// Smallest `n` with `Φ(n / (50·2^k)) > e^{2n}`, found by galloping and
/// bisection. Exact for predicates that stay true once they become true
/// (all exponential kinds); `None` if nothing up to `cap` qualifies.
pub fn minimal_nk(phi: &PhiSpec, k: u32, cap: u64) -> Option<u64> {
    let holds = |n: u64| growth_holds(phi, n, k) == Some(true);
    let mut hi = 1u64;
    while !holds(hi) {
        if hi > cap / 2 {
            return None;
        }
        hi *= 2;
    }
    let mut lo = hi / 2; // holds(lo) is false or lo = 0
    if lo == 0 {
        return Some(hi);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Verifies every scalar inequality used by the thresholds at `n`, and the
/// growth conditions on `Φ` at stage `k`.
pub fn chain_check(n: u64, k: u32, phi: &PhiSpec) -> LemmaReport {
    let mut report = LemmaReport::new("chain");
    report.param("n", n);
    report.param("k", k);
    report.param("phi", phi);
    let ni = n as i64;
    let g = gamma(n);
    let two_g = Rat::from_integer(BigInt::from(pow2(g)));
    let n40 = frac(ni, 40);

    report.check_certified(
        "2^gamma >= exp(n/36)/2",
        format!("gamma={g}"),
        format!("exp({}/36)/2", n),
        gamma_lower_bound_holds(n, g),
        "",
    );
    let e36 = |prec| Interval::from_rat(&frac(ni, 36), prec).exp().mul_pow2(-1);
    report.check_certified(
        "exp(n/36)/2 > n/40",
        e36(96),
        fmt_rat(&n40),
        decide(|prec| e36(prec).gt(&Interval::from_rat(&n40, prec))),
        "",
    );
    report.check("2^gamma > n/40", fmt_rat(&two_g), fmt_rat(&n40), two_g > n40, "");
    let lhs = frac(ni, 30) - Rat::one();
    report.check("n/30 - 1 > n/40", fmt_rat(&lhs), fmt_rat(&n40), lhs > n40, "");
    let quarter_nu = (frac(ni, 6) - Rat::one()) / frac(4, 1);
    report.check(
        "(n/6 - 1)/4 > n/30",
        fmt_rat(&quarter_nu),
        fmt_rat(&frac(ni, 30)),
        quarter_nu > frac(ni, 30),
        "",
    );
    // 2^gamma · 2exp(-n/36) + 2 <= 4  <=>  gamma ln 2 <= n/36
    report.check_certified(
        "2^gamma * 2exp(-n/36) + 2 <= 4",
        format!("gamma={g}"),
        format!("n={n}"),
        decide(|prec| {
            ln2(prec)
                .mul(&Interval::from_int(g as i64, prec))
                .le(&Interval::from_rat(&frac(ni, 36), prec))
        }),
        "",
    );

    let t = stage_threshold(n, k);
    let at_n = growth_holds(phi, n, k);
    report.info(
        "Phi(n/(50*2^k)) > exp(2n) at this n",
        format!("Phi({})", fmt_rat(&t)),
        format!("exp({})", 2 * n),
        match at_n {
            Some(true) => "holds",
            Some(false) => "fails",
            None => "undecided",
        },
    );
    match minimal_nk(phi, k, MINIMAL_NK_SEARCH_CAP) {
        Some(nk) => {
            let consistent = growth_holds(phi, nk, k) == Some(true)
                && (nk == 1 || growth_holds(phi, nk - 1, k) == Some(false));
            report.check(
                "minimal n_k with Phi(n_k/(50*2^k)) > exp(2 n_k)",
                nk,
                format!("holds at {nk}, fails at {}", nk.saturating_sub(1)),
                consistent,
                format!("k={k}"),
            );
            final_display(&mut report, phi, nk, k);
        }
        None => report.info(
            "minimal n_k with Phi(n_k/(50*2^k)) > exp(2 n_k)",
            "none",
            format!("n <= {MINIMAL_NK_SEARCH_CAP}"),
            match phi.classify() {
                PhiClass::Subexponential => "Phi is subexponential",
                PhiClass::Superexponential => "search cap reached",
            },
        ),
    }
    if at_n == Some(true) {
        final_display(&mut report, phi, n, k);
    }
    report
}

/// The closing estimate with the density constant `2^{-2n-1}`:
/// `2^{-2n-1} Φ(t) >= ½ (e/2)^{2n}` is asserted (it is `Φ(t) >= e^{2n}`);
/// the version without the factor ½ needs `Φ(t) >= 2 e^{2n}` and is reported.
fn final_display(report: &mut LemmaReport, phi: &PhiSpec, n: u64, k: u32) {
    let t = stage_threshold(n, k);
    let two_n = Rat::from_integer(BigInt::from(2 * n));
    let w = format!("n_k={n} k={k}");
    report.check_certified(
        "2^(-2n-1) Phi(n/(50*2^k)) >= (1/2)(e/2)^(2n)",
        format!("Phi({})", fmt_rat(&t)),
        format!("exp({})", 2 * n),
        phi.exceeds_exp(&t, &two_n, 1),
        &w,
    );
    let full = phi.exceeds_exp(&t, &two_n, 2);
    report.info(
        "2^(-2n-1) Phi(n/(50*2^k)) >= (e/2)^(2n)",
        format!("Phi({})", fmt_rat(&t)),
        format!("2 exp({})", 2 * n),
        format!(
            "{w}: {}",
            match full {
                Some(true) => "holds",
                Some(false) => "fails",
                None => "undecided",
            }
        ),
    );
}

/// One stage `(n_k, c_k)` of the staged sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Stage {
    pub n: u32,
    pub c: u32,
}

/// `f = Σ_k 2^{-k} g_k` with its per-stage records.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub f: AtomSum,
    pub stages: Vec<AtomSum>,
    pub params: Vec<ConstructionParams>,
    pub report: LemmaReport,
}

/// Records for a stage list without building anything: the separation
/// `p(n_{k+1}) > 2 q(n_k)`, the growth `n_{k+1} > 800 k 2^k q(n_k)`, the
/// interference bound `4 (k-1) q(n_{k-1})`, and the index range of each stage.
pub fn stage_report(stages: &[Stage]) -> Result<LemmaReport> {
    let mut report = LemmaReport::new("assembly");
    let params: Vec<ConstructionParams> = stages
        .iter()
        .map(|s| ConstructionParams::new(s.n, s.c))
        .collect::<Result<_>>()?;
    report.param(
        "stages",
        stages
            .iter()
            .map(|s| format!("({},{})", s.n, s.c))
            .collect::<Vec<_>>()
            .join(" "),
    );
    for (i, p) in params.iter().enumerate() {
        let k = i + 1;
        report.info(
            format!("stage {k} index range [p(n_k), 2q(n_k)]"),
            format!("2^{}", p.n()),
            format!("2^{}", p.q_log2() + 1),
            format!("n_{k}={} c={}", p.n(), p.c()),
        );
        if k >= 2 {
            let prev = &params[i - 1];
            let sep = p.p() > prev.q() * 2u32;
            report.check(
                format!("p(n_{k}) > 2q(n_{})", k - 1),
                format!("2^{}", p.n()),
                format!("2^{}", prev.q_log2() + 1),
                sep,
                "",
            );
            if !sep {
                return Err(Error::SpectralOverlap { stage: k });
            }
            let bound = BigUint::from(4 * (k - 1) as u64) * prev.q();
            report.info(
                format!("interference bound 4(k-1)q(n_{}) at stage {k}", k - 1),
                format!("2^{:.3}", (bound.bits() as f64 - 1.0).max(0.0) + frac_log2(&bound)),
                "",
                "",
            );
            let need = BigUint::from(800 * (k - 1) as u64) * pow2((k - 1) as u64) * prev.q();
            report.info(
                format!("n_{k} > 800 (k-1) 2^(k-1) q(n_{})", k - 1),
                p.n(),
                format!("~2^{}", need.bits()),
                if BigUint::from(p.n()) > need { "holds" } else { "fails at desk scale" },
            );
        }
    }
    Ok(report)
}

fn frac_log2(v: &BigUint) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    let top = v >> (v.bits().saturating_sub(53) as usize);
    let mant = top.to_string().parse::<f64>().unwrap_or(1.0);
    mant.log2() - (v.bits().min(53) as f64 - 1.0)
}

/// Builds `f = Σ 2^{-k} g_k` with `g_k = f_{n_k}`, rejecting stage lists
/// whose index ranges are not separated.
pub fn assemble_f(stages: &[Stage]) -> Result<Assembly> {
    let mut report = stage_report(stages)?;
    let params: Vec<ConstructionParams> = stages
        .iter()
        .map(|s| ConstructionParams::new(s.n, s.c))
        .collect::<Result<_>>()?;
    let parts: Vec<AtomSum> = params.iter().map(build_fn).collect::<Result<_>>()?;
    for (i, g) in parts.iter().enumerate() {
        if let Some((lo, hi)) = g.spectrum_hull_exact()? {
            report.info(
                format!("stage {} spectrum hull", i + 1),
                lo.to_string(),
                format!("2^{:.0}", (hi.bits() as f64).max(1.0) - 1.0 + frac_log2(&(hi + BigUint::one()))),
                if lo < params[i].p() {
                    "starts below p(n_k)"
                } else {
                    "inside [p(n_k), q(n_k)]"
                },
            );
        }
    }
    let weighted: Vec<(Rat, &AtomSum)> = parts
        .iter()
        .enumerate()
        .map(|(i, g)| (inv_pow2(i as u64 + 1), g))
        .collect();
    let f = AtomSum::combine(weighted);
    Ok(Assembly {
        f,
        stages: parts,
        params,
        report,
    })
}

impl Assembly {
    /// Checks `S_l f(x) = Σ_{j<k} 2^{-j} g_j(x) + 2^{-k} S_l g_k(x)` at the
    /// given cuts `l > q(n_{k-1})`.
    pub fn check_stage_identity(&self, k: usize, x: &DyadicPoint, cuts: &[BigUint]) -> Result<LemmaReport> {
        let mut report = LemmaReport::new("assembly");
        let earlier: Rat = self.stages[..k - 1]
            .iter()
            .enumerate()
            .map(|(j, g)| inv_pow2(j as u64 + 1) * g.eval(x))
            .sum();
        let weight = inv_pow2(k as u64);
        for l in cuts {
            let whole = self.f.partial_sum(l, x)?;
            let split = &earlier + &weight * self.stages[k - 1].partial_sum(l, x)?;
            report.check(
                format!("S_l(x,f) = sum_(j<{k}) 2^-j g_j(x) + 2^-{k} S_l(x,g_{k})"),
                fmt_rat(&whole),
                fmt_rat(&split),
                whole == split,
                format!("x={x} l={l}"),
            );
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(s: &str) -> PhiSpec {
        s.parse().unwrap()
    }

    #[test]
    fn threshold_chain_at_151() {
        let r = chain_check(151, 1, &phi("exppow:2"));
        assert!(r.passed(), "{}", r.summary());
        assert_eq!(gamma(151), 6);
    }

    #[test]
    fn minimal_nk_for_squares() {
        for k in 1..=3u32 {
            let expected = 5000 * 4u64.pow(k) + 1;
            assert_eq!(minimal_nk(&phi("exppow:2"), k, MINIMAL_NK_SEARCH_CAP), Some(expected));
        }
        assert_eq!(minimal_nk(&phi("pow:3"), 1, 1 << 20), None);
    }

    #[test]
    fn growth_condition_fails_at_200() {
        assert_eq!(growth_holds(&phi("exppow:2"), 200, 1), Some(false));
        let r = chain_check(200, 1, &phi("exppow:2"));
        assert!(r.summary().contains("fails"));
    }

    #[test]
    fn separation_is_enforced() {
        let bad = [Stage { n: 2, c: 2 }, Stage { n: 2, c: 2 }];
        assert!(matches!(stage_report(&bad), Err(Error::SpectralOverlap { stage: 2 })));
        let ok = [Stage { n: 1, c: 2 }, Stage { n: 8, c: 2 }];
        assert!(stage_report(&ok).unwrap().passed());
    }

    #[test]
    fn single_stage_is_half_of_fn() {
        let a = assemble_f(&[Stage { n: 2, c: 2 }]).unwrap();
        let g = build_fn(&ConstructionParams::new(2, 2).unwrap()).unwrap();
        for i in 0..64u64 {
            let x = DyadicPoint::from_cell(i, 6);
            assert_eq!(a.f.eval(&x), g.eval(&x) / Rat::from_integer(2.into()));
            let l = BigUint::from(i * 7);
            assert_eq!(
                a.f.partial_sum(&l, &x).unwrap(),
                g.partial_sum(&l, &x).unwrap() / Rat::from_integer(2.into())
            );
        }
    }
}

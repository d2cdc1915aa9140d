//! The divergence construction: the set `E_n` and the selector `m(x)`, the
//! polynomial `f_n`, and the staged assembly, each with an exact verifier.

mod chain;
mod construction;
mod en;
mod report;

use num_bigint::{BigInt, BigUint};
use num_traits::One;

use crate::certified::{decide, ln2, Interval};
use crate::dyadic::{DyadicInterval, DyadicPoint};
use crate::error::{Error, Result};
use crate::rat::{pow2, Rat};

pub use chain::{
    assemble_f, chain_check, minimal_nk, stage_report, Assembly, Stage, MINIMAL_NK_SEARCH_CAP,
};
pub use construction::{
    base_cells, build_fn, construction_report, progression_count, progression_l, verify_lemma1,
    verify_lemma1_all, Lemma1Setup, Lemma1Witness,
};
pub use en::{
    build_en, check_khinchine_tail, sign_constant_on_blocks, in_en, integral_dstar_closed, integral_dstar_grid,
    measure_en, measure_en_bound_holds, product_sum_counts, select_m, verify_lemma2,
    Lemma2Mode, SelectorResult,
};
pub use report::{Assertion, LemmaReport, Verdict};

/// Default ceiling on dense grid resolution.
pub const DEFAULT_GRID_CAP: u32 = 26;
/// Default ceiling on `n` for exhaustive sweeps.
pub const DEFAULT_EXHAUSTIVE_CAP: u32 = 16;
/// Largest `n` for which `f_n` is built atom by atom.
pub const MAX_BUILD_N: u32 = 20;

/// `n`, the spectral exponent `c`, and the quantities derived from them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructionParams {
    n: u32,
    c: u32,
    gamma: u64,
}

impl ConstructionParams {
    pub fn new(n: u32, c: u32) -> Result<Self> {
        if n == 0 || n > 62 {
            return Err(Error::InvalidParams(format!("n must lie in 1..=62, got {n}")));
        }
        if c < 2 {
            return Err(Error::InvalidParams(format!(
                "the spectral exponent c must be at least 2, got {c}"
            )));
        }
        Ok(ConstructionParams {
            n,
            c,
            gamma: gamma(n as u64),
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    /// `γ = floor(log₂ e^{n/36})`.
    pub fn gamma(&self) -> u64 {
        self.gamma
    }

    /// Number of base cells `Δ_k`, i.e. `2^n`.
    pub fn cells(&self) -> u64 {
        1u64 << self.n
    }

    /// `log₂ u_j = c (j + n)`; `j = 0` is allowed and gives the cut used
    /// below the first block.
    pub fn u_log2(&self, j: u64) -> u64 {
        self.c as u64 * (j + self.n as u64)
    }

    pub fn u(&self, j: u64) -> BigUint {
        pow2(self.u_log2(j))
    }

    /// `p(n) = 2^n`.
    pub fn p(&self) -> BigUint {
        pow2(self.n as u64)
    }

    pub fn q_log2(&self) -> u64 {
        self.u_log2(self.cells())
    }

    /// `q(n) = u_{2^n}`.
    pub fn q(&self) -> BigUint {
        pow2(self.q_log2())
    }

    /// `θ_k = (k-1)/2^n + (k-1)/4^n`, a point of level `2n`.
    pub fn theta(&self, k: u64) -> DyadicPoint {
        assert!(k >= 1 && k <= self.cells());
        let n = self.n as u64;
        let num = BigUint::from(k - 1) * (pow2(n) + BigUint::one());
        let t = DyadicPoint::new(num, 2 * n).expect("θ_k lies in [0, 1)");
        debug_assert!(t.exponent() <= 2 * n);
        t
    }

    /// `Δ_k = [(k-1)/2^n, k/2^n)`.
    pub fn delta(&self, k: u64) -> DyadicInterval {
        DyadicInterval::new(self.n as u64, k - 1).expect("k within 1..=2^n")
    }

    /// The `k` with `x ∈ Δ_k`.
    pub fn cell_of(&self, x: &DyadicPoint) -> u64 {
        x.cell_index_u64(self.n as u64) + 1
    }

    pub fn describe(&self) -> Vec<(String, String)> {
        vec![
            ("n".into(), self.n.to_string()),
            ("c".into(), self.c.to_string()),
            ("gamma".into(), self.gamma.to_string()),
            ("p".into(), format!("2^{}", self.n)),
            ("q".into(), format!("2^{}", self.q_log2())),
        ]
    }
}

/// `floor(n / (36 ln 2))`, decided with certified arithmetic.
pub fn gamma(n: u64) -> u64 {
    let mut prec = 96;
    loop {
        let v = Interval::from_rat(&Rat::new(BigInt::from(n), BigInt::from(36)), prec).div(&ln2(prec));
        if let Some(f) = v.floor() {
            return u64::try_from(f).expect("γ fits in u64");
        }
        prec *= 2;
        assert!(prec <= 1 << 16, "γ undecidable");
    }
}

/// Certified `2^γ >= e^{n/36} / 2`, i.e. `(γ + 1) ln 2 >= n / 36`.
pub(crate) fn gamma_lower_bound_holds(n: u64, gamma: u64) -> Option<bool> {
    decide(|prec| {
        let lhs = ln2(prec).mul(&Interval::from_int(gamma as i64 + 1, prec));
        let rhs = Interval::from_rat(&Rat::new(BigInt::from(n), BigInt::from(36)), prec);
        rhs.le(&lhs)
    })
}

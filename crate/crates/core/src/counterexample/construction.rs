//! The polynomial `f_n`: an indicator term on `(E_n)^c` plus translated
//! kernel differences, and the exact checks of its properties.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::dyadic::DyadicPoint;
use crate::error::{Error, Result};
use crate::fourier::{exceed_density, Atom, AtomSum, PartialSums, StepFunction};
use crate::rat::{fmt_rat, inv_pow2, pow2, Rat};
use crate::walsh::{dirichlet, dirichlet_star, walsh};

use super::en::{build_en, integral_dstar_closed, measure_en, select_m, SelectorResult};
use super::report::LemmaReport;
use super::{ConstructionParams, MAX_BUILD_N};

/// `f_n = 2^γ 1_{(E_n)^c} r_n + 2^-n Σ_j (D_q(· ⊕ θ_j) - D_{u_j}(· ⊕ θ_j))`.
pub fn build_fn(params: &ConstructionParams) -> Result<AtomSum> {
    let n = params.n();
    if n > MAX_BUILD_N {
        return Err(Error::InvalidParams(format!(
            "f_n is built for n <= {MAX_BUILD_N}, got {n}"
        )));
    }
    let complement = build_en(n)?.complement();
    let mut atoms = vec![Atom::Indicator {
        coef: Rat::from_integer(BigInt::from(pow2(params.gamma()))),
        set: complement,
        character: pow2(n as u64),
    }];
    let weight = inv_pow2(n as u64);
    for j in 1..=params.cells() {
        let theta = params.theta(j);
        atoms.push(Atom::Kernel {
            coef: weight.clone(),
            order_log2: params.q_log2(),
            shift: theta.clone(),
        });
        atoms.push(Atom::Kernel {
            coef: -weight.clone(),
            order_log2: params.u_log2(j),
            shift: theta,
        });
    }
    Ok(AtomSum::new(atoms))
}

/// Left endpoints of the cells of level `max(n + 2, 2n)`, on which `E_n`,
/// the `Δ_k` and the `θ_j` are all resolved.
pub fn base_cells(params: &ConstructionParams) -> Vec<DyadicPoint> {
    let n = params.n() as u64;
    let level = (n + 2).max(2 * n);
    assert!(level <= 24, "too many base cells");
    (0..1u64 << level).map(|i| DyadicPoint::from_cell(i, level)).collect()
}

/// `L(x) ∩ [lo, hi)` where `L(x) = {p + μ 2^{2n} : μ >= 0}`.
pub fn progression_l(sel: &SelectorResult, n: u32, lo: &BigUint, hi: &BigUint) -> Vec<BigUint> {
    let step = pow2(2 * n as u64);
    let mut l = first_at_or_above(&sel.p, &step, lo);
    let mut out = Vec::new();
    while l < *hi {
        out.push(l.clone());
        l += &step;
    }
    out
}

/// `#(L(x) ∩ [lo, hi))` without enumerating.
pub fn progression_count(p: &BigUint, n: u32, lo: &BigUint, hi: &BigUint) -> BigUint {
    let step = pow2(2 * n as u64);
    let first = first_at_or_above(p, &step, lo);
    if first >= *hi {
        return BigUint::zero();
    }
    (hi - &first - BigUint::one()) / &step + BigUint::one()
}

fn first_at_or_above(p: &BigUint, step: &BigUint, lo: &BigUint) -> BigUint {
    if lo <= p {
        return p.clone();
    }
    let mu = (lo - p + step - BigUint::one()) / step;
    p + mu * step
}

fn int(v: impl Into<BigInt>) -> Rat {
    Rat::from_integer(v.into())
}

/// Structural checks of `f_n`: the norm certificates, spectrum containment
/// and the lower bound of `|f|` on its support.
pub fn construction_report(params: &ConstructionParams, f: &AtomSum, grid_cap: u32) -> Result<LemmaReport> {
    let n = params.n();
    let mut report = LemmaReport::new("construction").with_params(params.describe());
    let measure = measure_en(n);
    let two_gamma = int(pow2(params.gamma()));
    let formula_cert = &two_gamma * (Rat::one() - &measure) + int(2);
    report.check(
        "||f||_1 <= 2^gamma (1 - |E_n|) + 2 <= 4",
        fmt_rat(&formula_cert),
        "4/1",
        formula_cert <= int(4),
        "",
    );
    let atom_cert = f.l1_certificate();
    report.check(
        "atom-wise norm certificate <= 2^gamma (1 - |E_n|) + 2",
        fmt_rat(&atom_cert),
        fmt_rat(&formula_cert),
        atom_cert <= formula_cert,
        "",
    );

    let (p, q) = (params.p(), params.q());
    match f.spectrum_hull_exact()? {
        Some((lo, hi)) => {
            report.check(
                "sp f within [p(n), q(n)] (union of atom spectra)",
                format!("[{lo}, {hi}]"),
                format!("[{p}, 2^{}]", params.q_log2()),
                lo >= p && hi <= q,
                "",
            );
        }
        None => report.info("sp f is empty", "", "", ""),
    }
    if let Some(Atom::Indicator { .. }) = f.atoms().first() {
        let indicator = AtomSum::new(vec![f.atoms()[0].clone()]);
        if let Some((lo, hi)) = indicator.spectrum_hull_exact()? {
            report.info(
                "sp(1_(E_n)^c r_n) compared with [2^n, 2^(n+1))",
                format!("[{lo}, {hi}]"),
                format!("[{}, {})", pow2(n as u64), pow2(n as u64 + 1)),
                if lo >= pow2(n as u64) && hi < pow2(n as u64 + 1) {
                    "inside"
                } else {
                    "extends outside; the spectrum lies in [0, 2^(n+2))"
                },
            );
        }
    }

    let k = params.q_log2();
    if k > grid_cap as u64 {
        report.info(
            "grid checks skipped",
            format!("resolution {k}"),
            format!("cap {grid_cap}"),
            "",
        );
        return Ok(report);
    }
    let grid = f.render(k as u32, grid_cap)?;
    let l1 = grid.l1_norm();
    report.check(
        "||f||_1 on the grid <= atom-wise certificate",
        fmt_rat(&l1),
        fmt_rat(&atom_cert),
        l1 <= atom_cert,
        "",
    );
    let coeffs = grid.grid().fwht();
    // indices above q(n) do not exist on a grid of 2^K = q(n) cells
    let p_idx = p.to_usize().unwrap().min(coeffs.len());
    let outside = (0..p_idx).find(|&m| !coeffs.numerators()[m].is_zero());
    report.check(
        "transform: every coefficient outside [p(n), q(n)] vanishes",
        outside.map_or("none".to_string(), |m| format!("f^({m}) != 0")),
        "none",
        outside.is_none(),
        "",
    );
    let bad = support_violation(params, f, &grid);
    report.check(
        "|f(x)| >= 2^gamma on supp f",
        bad.as_ref().map_or("all cells".to_string(), |(_, v)| fmt_rat(v)),
        fmt_rat(&two_gamma),
        bad.is_none(),
        bad.map(|(x, _)| x.to_string()).unwrap_or_default(),
    );
    Ok(report)
}

fn support_violation(params: &ConstructionParams, f: &AtomSum, grid: &StepFunction) -> Option<(DyadicPoint, Rat)> {
    let k = grid.resolution() as u64;
    let floor = int(pow2(params.gamma()));
    (0..1u64 << k)
        .into_par_iter()
        .find_first(|&i| {
            let v = grid.grid().get(i as usize);
            v.abs() < floor && f.support_covers(&DyadicPoint::from_cell(i, k))
        })
        .map(|i| {
            let x = DyadicPoint::from_cell(i, k);
            (x, grid.grid().get(i as usize))
        })
}

/// What a Lemma 1 check found at one point: the cut `N`, the threshold and
/// the exceedance density of `|S_l f(x)|` over `l <= N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lemma1Witness {
    pub x: DyadicPoint,
    pub in_support: bool,
    pub m: Option<u64>,
    pub cut: BigUint,
    pub threshold: Rat,
    pub density: Option<Rat>,
}

/// `f_n` together with its grid partial sums when the grid fits the cap.
pub struct Lemma1Setup {
    params: ConstructionParams,
    f: AtomSum,
    grid: Option<PartialSums>,
}

impl Lemma1Setup {
    pub fn new(params: &ConstructionParams, grid_cap: u32) -> Result<Self> {
        let f = build_fn(params)?;
        let k = params.q_log2();
        let grid = if k <= grid_cap as u64 {
            Some(PartialSums::new(&f.render(k as u32, grid_cap)?))
        } else {
            None
        };
        Ok(Lemma1Setup {
            params: params.clone(),
            f,
            grid,
        })
    }

    pub fn params(&self) -> &ConstructionParams {
        &self.params
    }

    pub fn f(&self) -> &AtomSum {
        &self.f
    }

    pub fn grid(&self) -> Option<&PartialSums> {
        self.grid.as_ref()
    }
}

/// Checks the Lemma 1 argument at `x`: on the support, `S_l f(x) = f(x)` for
/// `l >= q(n)`; off the support, the identity chain along the progression
/// `L(x)` inside `[u_{k-1}, u_k)`, `x ∈ Δ_k` (with `u_0 = 2^{cn}`), evaluated both
/// symbolically and on the grid.
pub fn verify_lemma1(setup: &Lemma1Setup, x: &DyadicPoint) -> Result<(LemmaReport, Lemma1Witness)> {
    if setup.f.support_covers(x) {
        Ok(branch_support(setup, x))
    } else {
        branch_progression(setup, x)
    }
}

fn branch_support(setup: &Lemma1Setup, x: &DyadicPoint) -> (LemmaReport, Lemma1Witness) {
    let params = &setup.params;
    let f = &setup.f;
    let n = params.n();
    let mut report = LemmaReport::new("lemma1");
    let w = x.to_string();
    let value = f.eval(x);
    let floor = int(pow2(params.gamma()));
    report.check("x in supp f: |f(x)| >= 2^gamma", fmt_rat(&value.abs()), fmt_rat(&floor), value.abs() >= floor, &w);

    let q = params.q();
    for l in [q.clone(), &q * 2u32] {
        let s = f.partial_sum(&l, x).expect("kernel atoms have closed forms");
        report.check(
            format!("S_l(x,f) = f(x) at l = 2^{}", l.bits() - 1),
            fmt_rat(&s),
            fmt_rat(&value),
            s == value,
            &w,
        );
    }

    let threshold = Rat::new(BigInt::from(n), BigInt::from(40));
    let cut = &q * 2u32;
    let density = match &setup.grid {
        Some(ps) => {
            let n_cut = cut.to_u64().unwrap();
            let sums = ps.series(x, n_cut).expect("base cells lie on the grid");
            let d = exceed_density(&sums, &threshold, n_cut as usize);
            report.check(
                "density #{k <= 2q : |S_k| > n/40} / 2q >= 1/2",
                fmt_rat(&d),
                "1/2",
                d >= Rat::new(1.into(), 2.into()),
                &w,
            );
            Some(d)
        }
        None => {
            // S_l = f(x) for the q + 1 cuts l in [q, 2q]
            let lower = Rat::new(BigInt::from(&q + 1u32), BigInt::from(cut.clone()));
            let ok = value.abs() > threshold && lower >= Rat::new(1.into(), 2.into());
            report.check(
                "density at 2q >= (q+1)/2q >= 1/2 (cuts l >= q only)",
                fmt_rat(&lower),
                "1/2",
                ok,
                &w,
            );
            None
        }
    };
    let witness = Lemma1Witness {
        x: x.clone(),
        in_support: true,
        m: None,
        cut,
        threshold,
        density,
    };
    (report, witness)
}

fn branch_progression(setup: &Lemma1Setup, x: &DyadicPoint) -> Result<(LemmaReport, Lemma1Witness)> {
    let params = &setup.params;
    let f = &setup.f;
    let n = params.n();
    let Some(grid) = &setup.grid else {
        return Err(Error::Infeasible(format!(
            "x = {x} lies off supp f and q(n) = 2^{} exceeds the grid cap",
            params.q_log2()
        )));
    };
    let sel = select_m(x, n).map_err(|_| {
        Error::Infeasible(format!(
            "x = {x} lies off supp f but has no sign change (+1,-1) among r_1..r_n, so m(x) is undefined"
        ))
    })?;
    let mut report = LemmaReport::new("lemma1");
    let w = format!("x={x} m={}", sel.m);
    let k = params.cell_of(x);
    let thetas: Vec<DyadicPoint> = (1..=params.cells()).map(|j| params.theta(j)).collect();

    let bad = thetas.iter().position(|t| walsh(&sel.p, t) != 1);
    report.check(
        "w_p(theta_j) = 1 for all j",
        bad.map_or("all".to_string(), |j| format!("fails at j={}", j + 1)),
        "all",
        bad.is_none(),
        &w,
    );

    let lo = params.u(k - 1);
    let hi = params.u(k);
    let cuts = progression_l(&sel, n, &lo, &hi);
    let hi_u64 = hi.to_u64().expect("grid-sized cut");
    let sums = grid.series(x, hi_u64).expect("base cells lie on the grid");
    let integral = integral_dstar_closed(sel.m, x);
    let scale = inv_pow2(n as u64);

    #[derive(Default)]
    struct Tally {
        first: Option<String>,
        failures: usize,
    }
    impl Tally {
        fn record(&mut self, ok: bool, l: &BigUint) {
            if !ok {
                self.failures += 1;
                if self.first.is_none() {
                    self.first = Some(format!("l={l}"));
                }
            }
        }
    }
    let mut dual = Tally::default();
    let mut kernel_form = Tally::default();
    let mut characters_trivial = Tally::default();
    let mut modified_kernels = Tally::default();
    let mut locality_tally = Tally::default();
    let mut lower_bound = Tally::default();

    let results: Vec<[bool; 6]> = cuts
        .par_iter()
        .map(|l| {
            let symbolic = f.partial_sum(l, x).expect("closed forms suffice for build_fn");
            let on_grid = &sums[l.to_usize().unwrap() - 1];
            let shifted: Vec<DyadicPoint> = thetas.iter().map(|t| x.xor_add(t)).collect();
            let left = &shifted[..(k - 1) as usize];
            let d_sum: BigInt = left.iter().map(|y| dirichlet(l, y)).sum();
            let d_star_sum: BigInt = left.iter().map(|y| dirichlet_star(l, y)).sum();
            let chain = &scale * int(d_sum.clone());
            let wx = walsh(l, x);
            let locality = shifted
                .iter()
                .enumerate()
                .filter(|(j, _)| *j as u64 + 1 != k)
                .all(|(_, y)| dirichlet_star(l, y) == dirichlet_star(&sel.m, y));
            let m_star_sum: BigInt = left.iter().map(|y| dirichlet_star(&sel.m, y)).sum();
            let bound_ok = (&scale * int(m_star_sum.abs())) == symbolic.abs()
                && symbolic.abs() >= &integral - Rat::one();
            [
                symbolic == *on_grid,
                symbolic == chain,
                thetas.iter().all(|t| walsh(l, t) == 1),
                d_sum == d_star_sum * wx,
                locality,
                bound_ok,
            ]
        })
        .collect();
    for (l, r) in cuts.iter().zip(&results) {
        dual.record(r[0], l);
        kernel_form.record(r[1], l);
        characters_trivial.record(r[2], l);
        modified_kernels.record(r[3], l);
        locality_tally.record(r[4], l);
        lower_bound.record(r[5], l);
    }
    let range = format!("{} cuts in L(x) ∩ [{lo}, {hi})", cuts.len());
    let rows = [
        ("symbolic S_l(x,f) = grid S_l(x,f)", dual),
        ("S_l(x,f) = 2^-n sum_{j<k} D_l(x+theta_j)", kernel_form),
        ("w_l(theta_j) = 1 for all j", characters_trivial),
        ("sum_{j<k} D_l(x+theta_j) = w_l(x) sum_{j<k} D_l^*(x+theta_j)", modified_kernels),
        ("D_l^*(x+theta_j) = D_m^*(x+theta_j) for j != k", locality_tally),
        ("|S_l(x,f)| = 2^-n |sum_{j<k} D_m^*(x+theta_j)| >= integral - 1", lower_bound),
    ];
    for (assertion, t) in rows {
        report.check(
            assertion,
            format!("{} failures", t.failures),
            range.clone(),
            t.failures == 0,
            t.first.map_or(w.clone(), |l| format!("{w} {l}")),
        );
    }

    let count = progression_count(&sel.p, n, &lo, &hi);
    let step = pow2(2 * n as u64);
    let expected = Rat::new(BigInt::from(&hi - &lo), BigInt::from(step.clone())) - Rat::one();
    report.check(
        "#(L(x) ∩ [u_(k-1), u_k)) >= (u_k - u_(k-1))/2^(2n) - 1",
        count.to_string(),
        fmt_rat(&expected),
        int(count.clone()) >= expected && count == BigUint::from(cuts.len()),
        &w,
    );
    let ratio = Rat::new(BigInt::from(count), BigInt::from(hi.clone()));
    report.check(
        "#(L(x) ∩ [u_(k-1), u_k)) / u_k >= 2^(-2n-1)",
        fmt_rat(&ratio),
        fmt_rat(&inv_pow2(2 * n as u64 + 1)),
        ratio >= inv_pow2(2 * n as u64 + 1),
        &w,
    );

    let n40 = Rat::new(BigInt::from(n), BigInt::from(40));
    let threshold = std::cmp::max(n40, &integral - Rat::one());
    let density = exceed_density(&sums, &threshold, hi_u64 as usize);
    report.info(
        "density #{l <= u_k : |S_l| > max(n/40, integral - 1)} / u_k",
        fmt_rat(&density),
        fmt_rat(&inv_pow2(2 * n as u64)),
        format!("{w} integral={} threshold={}", fmt_rat(&integral), fmt_rat(&threshold)),
    );
    let witness = Lemma1Witness {
        x: x.clone(),
        in_support: false,
        m: Some(sel.m),
        cut: hi,
        threshold,
        density: Some(density),
    };
    Ok((report, witness))
}

/// Runs [`verify_lemma1`] at every base cell. Points where neither branch
/// applies are recorded as informational rows.
pub fn verify_lemma1_all(setup: &Lemma1Setup) -> (LemmaReport, Vec<Lemma1Witness>) {
    let cells = base_cells(&setup.params);
    let outcomes: Vec<Result<(LemmaReport, Lemma1Witness)>> =
        cells.par_iter().map(|x| verify_lemma1(setup, x)).collect();
    let mut report = LemmaReport::new("lemma1").with_params(setup.params.describe());
    report.param(
        "grid",
        setup
            .grid
            .as_ref()
            .map_or("none".to_string(), |g| format!("2^{}", g.coefficients().resolution())),
    );
    let mut witnesses = Vec::new();
    let mut skipped = 0usize;
    for (x, out) in cells.iter().zip(outcomes) {
        match out {
            Ok((r, w)) => {
                report.extend(r);
                witnesses.push(w);
            }
            Err(e) => {
                skipped += 1;
                report.info("branch not checkable", "", "", format!("x={x}: {e}"));
            }
        }
    }
    report.info("base cells checked", witnesses.len(), cells.len(), format!("{skipped} not checkable"));
    (report, witnesses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::rat;

    fn setup(n: u32, c: u32) -> Lemma1Setup {
        Lemma1Setup::new(&ConstructionParams::new(n, c).unwrap(), 26).unwrap()
    }

    #[test]
    fn progression_counting() {
        let sel = select_m(&"3/16".parse().unwrap(), 2).unwrap();
        assert_eq!(sel.m, 2);
        assert_eq!(sel.p, BigUint::from(10u32));
        let lo = BigUint::from(512u32);
        let hi = BigUint::from(4096u32);
        let ls = progression_l(&sel, 2, &lo, &hi);
        assert_eq!(BigUint::from(ls.len()), progression_count(&sel.p, 2, &lo, &hi));
        assert_eq!(ls[0], BigUint::from(522u32));
        assert!(ls.iter().all(|l| (l - 10u32) % 16u32 == BigUint::zero()));
        let thetas: Vec<_> = (1..=4).map(|j| ConstructionParams::new(2, 3).unwrap().theta(j)).collect();
        for l in ls.iter().chain([&sel.p]) {
            assert!(thetas.iter().all(|t| walsh(l, t) == 1));
        }
        assert_eq!(progression_count(&sel.p, 2, &hi, &lo), BigUint::zero());
    }

    #[test]
    fn small_construction_is_consistent() {
        let s = setup(2, 2);
        let f = s.f();
        assert_eq!(f.atoms().len(), 1 + 2 * 4);
        let r = construction_report(s.params(), f, 26).unwrap();
        assert!(r.passed(), "{}", r.summary());
        let (all, witnesses) = verify_lemma1_all(&s);
        assert!(all.passed(), "{}", all.summary());
        assert!(witnesses.iter().any(|w| w.in_support));
        assert!(witnesses.iter().any(|w| !w.in_support));
    }

    #[test]
    fn support_branch_density() {
        let s = setup(2, 2);
        let (r, w) = verify_lemma1(&s, &"5/16".parse().unwrap()).unwrap();
        assert!(r.passed(), "{}", r.summary());
        assert!(w.in_support);
        assert!(w.density.unwrap() >= rat(1, 2));
    }
}

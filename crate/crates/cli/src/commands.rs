//! One function per subcommand. Each returns the tables it wrote and the
//! reports whose failures decide the exit status.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use num_bigint::{BigInt, BigUint, Sign};
use rayon::prelude::*;
use walsh_core::certified::Interval;
use walsh_core::counterexample::{
    build_fn, chain_check, construction_report, measure_en_bound_holds, verify_lemma1, verify_lemma1_all,
    verify_lemma2, ConstructionParams, Lemma1Setup, Lemma1Witness, Lemma2Mode, LemmaReport, Verdict,
};
use walsh_core::dyadic::DyadicPoint;
use walsh_core::fourier::{coefficients, exceed_density, strong_means, ExtReal, PhiSpec};
use walsh_core::rat::{fmt_rat, parse_rat, rat_to_f64, Rat};

use crate::config::FileConfig;
use crate::output::Table;
use crate::svg::{Plot, Series};

/// Ceiling on the number of rows a range-valued subcommand may emit.
pub const MAX_ROWS: u64 = 1 << 20;
const PREC: u32 = 128;

/// Parameters after merging flags over the config file.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub n: Option<u32>,
    pub c: u32,
    pub grid_cap: u32,
    pub samples: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl Resolved {
    pub fn merge(
        file: &FileConfig,
        n: Option<u32>,
        c: Option<u32>,
        grid_cap: Option<u32>,
        samples: Option<u64>,
        seed: u64,
        out: Option<PathBuf>,
    ) -> Self {
        Resolved {
            n: n.or(file.n),
            c: c.or(file.c).unwrap_or(10),
            grid_cap: grid_cap.or(file.grid_cap).unwrap_or(walsh_core::counterexample::DEFAULT_GRID_CAP),
            samples: samples.or(file.samples).unwrap_or(1000),
            seed,
            out,
        }
    }

    pub fn n(&self) -> Result<u32> {
        self.n.ok_or_else(|| anyhow!("--n is required (or n= in the config file)"))
    }

    fn params(&self) -> Result<ConstructionParams> {
        Ok(ConstructionParams::new(self.n()?, self.c)?)
    }

    /// The parameter echo every table starts with.
    fn header(&self, command: &str, grid: Option<u64>) -> Table {
        let mut t = Table::new(&[]);
        t.comment("walshdiv", command);
        t.comment("n", self.n.map_or("none".into(), |n| n.to_string()));
        t.comment("c", self.c);
        t.comment("seed", self.seed);
        t.comment("grid_resolution", grid.map_or("none".into(), |k| format!("2^{k}")));
        t
    }
}

/// What a subcommand found: assertion reports (for the exit status) and a
/// one-line-per-report summary.
#[derive(Default)]
pub struct Outcome {
    pub reports: Vec<LemmaReport>,
}

impl Outcome {
    fn with(report: LemmaReport) -> Self {
        Outcome { reports: vec![report] }
    }

    pub fn failures(&self) -> usize {
        self.reports.iter().map(|r| r.count(Verdict::Fail)).sum()
    }

    pub fn diagnostic(&self) -> Option<String> {
        self.reports.iter().find_map(|r| {
            r.first_failure().map(|a| {
                format!(
                    "first failed assertion [{}] {}: lhs {} vs rhs {}; witness: {}",
                    a.lemma,
                    a.assertion,
                    a.lhs,
                    a.rhs,
                    if a.witness.is_empty() { "-" } else { &a.witness }
                )
            })
        })
    }

    pub fn summary(&self) -> String {
        self.reports
            .iter()
            .map(|r| {
                format!(
                    "{}: {} passed, {} failed, {} informational\n",
                    r.lemma(),
                    r.count(Verdict::Pass),
                    r.count(Verdict::Fail),
                    r.count(Verdict::Info)
                )
            })
            .collect()
    }
}

fn with_header(mut head: Table, body: Table) -> Table {
    head.absorb(body);
    head
}

fn grid_level(params: &ConstructionParams, cap: u32) -> Option<u64> {
    (params.q_log2() <= cap as u64).then(|| params.q_log2())
}

pub fn lemma2(cfg: &Resolved, sample: bool, exhaustive_cap: u32) -> Result<Outcome> {
    let n = cfg.n()?;
    let mode = if sample {
        Lemma2Mode::Sample {
            count: cfg.samples,
            seed: cfg.seed,
        }
    } else {
        Lemma2Mode::Exhaustive
    };
    let report = verify_lemma2(n, mode, exhaustive_cap)?;
    let mut head = cfg.header("lemma2", Some(n as u64 + 2));
    head.comment("mode", if sample { format!("sample({})", cfg.samples) } else { "exhaustive".into() });
    with_header(head, Table::from_report(&report)).write(cfg.out.as_deref())?;
    Ok(Outcome::with(report))
}

/// `1 - 2 exp(-n/36)` as an interval.
fn measure_bound(n: u32) -> Interval {
    let e = Interval::from_rat(&Rat::new(BigInt::from(-(n as i64)), BigInt::from(36)), PREC).exp();
    Interval::from_int(1, PREC).sub(&e.mul_pow2(1))
}

pub fn measure_en(cfg: &Resolved, n_min: u32, n_max: u32) -> Result<Outcome> {
    if n_min == 0 || n_min > n_max {
        bail!("need 1 <= n-min <= n-max, got {n_min}..{n_max}");
    }
    let rows: Vec<(u32, Rat, Option<bool>)> = (n_min..=n_max)
        .into_par_iter()
        .map(|n| {
            let (m, holds) = measure_en_bound_holds(n);
            (n, m, holds)
        })
        .collect();
    let mut report = LemmaReport::new("measure-en");
    let mut table = Table::new(&[
        "n",
        "measure_exact",
        "measure_float",
        "bound_lo",
        "bound_hi",
        "margin_float",
        "verdict",
    ]);
    for (n, m, holds) in rows {
        let bound = measure_bound(n);
        let verdict = if n > 50 {
            report.check_certified("|E_n| > 1 - 2exp(-n/36)", fmt_rat(&m), &bound, holds, format!("n={n}"));
            match holds {
                Some(true) => "pass",
                _ => "fail",
            }
        } else {
            // the bound is only claimed beyond n = 50
            match holds {
                Some(true) => "info:holds",
                Some(false) => "info:fails",
                None => "info:undecided",
            }
        };
        table.push(vec![
            n.to_string(),
            fmt_rat(&m),
            format!("{:e}", rat_to_f64(&m)),
            bound.lo().display(20),
            bound.hi().display(20),
            format!("{:e}", rat_to_f64(&m) - bound.mid_f64()),
            verdict.into(),
        ]);
    }
    let mut head = cfg.header("measure-en", None);
    head.comment("n_range", format!("{n_min}..={n_max}"));
    with_header(head, table).write(cfg.out.as_deref())?;
    Ok(Outcome::with(report))
}

pub fn build_fn_cmd(cfg: &Resolved, coefficients_out: Option<PathBuf>) -> Result<Outcome> {
    let params = cfg.params()?;
    let f = build_fn(&params)?;
    let report = construction_report(&params, &f, cfg.grid_cap)?;
    let grid = grid_level(&params, cfg.grid_cap);
    let mut head = cfg.header("build-fn", grid);
    head.comment("gamma", params.gamma());
    head.comment("atoms", f.atoms().len());
    head.comment("q", format!("2^{}", params.q_log2()));
    if let Some(path) = coefficients_out {
        let k = grid.ok_or_else(|| {
            anyhow!(
                "q(n) = 2^{} exceeds the grid cap 2^{}; coefficients cannot be dumped",
                params.q_log2(),
                cfg.grid_cap
            )
        })?;
        let coeffs = coefficients(&f.render(k as u32, cfg.grid_cap)?);
        let mut table = Table::new(&["index", "value_exact", "value_float"]);
        for (i, v) in coeffs.numerators().iter().enumerate() {
            if v.sign() != Sign::NoSign {
                let v = Rat::new(v.clone(), coeffs.denominator().clone());
                table.push(vec![i.to_string(), fmt_rat(&v), format!("{:e}", rat_to_f64(&v))]);
            }
        }
        let mut chead = cfg.header("build-fn coefficients (nonzero only)", grid);
        chead.comment("nonzero", table.len());
        with_header(chead, table).write(Some(&path))?;
    }
    with_header(head, Table::from_report(&report)).write(cfg.out.as_deref())?;
    Ok(Outcome::with(report))
}

fn witness_table(witnesses: &[Lemma1Witness]) -> Table {
    let mut t = Table::new(&["x", "in_support", "m", "cut", "threshold", "density_exact", "density_float"]);
    for w in witnesses {
        t.push(vec![
            w.x.to_string(),
            w.in_support.to_string(),
            w.m.map_or(String::new(), |m| m.to_string()),
            w.cut.to_string(),
            fmt_rat(&w.threshold),
            w.density.as_ref().map_or(String::new(), fmt_rat),
            w.density.as_ref().map_or(String::new(), |d| format!("{:e}", rat_to_f64(d))),
        ]);
    }
    t
}

pub fn lemma1(cfg: &Resolved, x: Option<DyadicPoint>, witnesses_out: Option<PathBuf>) -> Result<Outcome> {
    let params = cfg.params()?;
    let setup = Lemma1Setup::new(&params, cfg.grid_cap)?;
    let (report, witnesses) = match &x {
        Some(x) => {
            let (r, w) = verify_lemma1(&setup, x)?;
            (r, vec![w])
        }
        None => verify_lemma1_all(&setup),
    };
    let grid = grid_level(&params, cfg.grid_cap);
    let mut head = cfg.header("lemma1", grid);
    head.comment("x", x.as_ref().map_or("all base cells".into(), |x| x.to_string()));
    if let Some(path) = witnesses_out {
        let mut whead = cfg.header("lemma1 witnesses", grid);
        whead.comment("x", x.as_ref().map_or("all base cells".into(), |x| x.to_string()));
        with_header(whead, witness_table(&witnesses)).write(Some(&path))?;
    }
    with_header(head, Table::from_report(&report)).write(cfg.out.as_deref())?;
    Ok(Outcome::with(report))
}

/// `S_1 … S_count` at `x`: from the grid when `q(n)` is renderable, otherwise
/// symbolically.
fn partial_sum_series(setup: &Lemma1Setup, x: &DyadicPoint, count: u64) -> Result<Vec<Rat>> {
    if count > MAX_ROWS * 4 {
        bail!("N = {count} exceeds the supported maximum {}", MAX_ROWS * 4);
    }
    match setup.grid() {
        Some(ps) if x.exponent() <= ps.coefficients().resolution() as u64 => Ok(ps.series(x, count)?),
        _ => (1..=count)
            .into_par_iter()
            .map(|l| setup.f().partial_sum(&BigUint::from(l), x).map_err(Into::into))
            .collect(),
    }
}

pub fn partial_sums(cfg: &Resolved, x: &DyadicPoint, l_min: u64, l_max: u64, step: u64) -> Result<Outcome> {
    if step == 0 || l_min > l_max {
        bail!("need l-min <= l-max and step >= 1");
    }
    if (l_max - l_min) / step + 1 > MAX_ROWS {
        bail!("more than {MAX_ROWS} rows requested; raise --step");
    }
    let params = cfg.params()?;
    let setup = Lemma1Setup::new(&params, cfg.grid_cap)?;
    let ls: Vec<u64> = (l_min..=l_max).step_by(step as usize).collect();
    let rows: Vec<(u64, Rat, Option<Rat>)> = ls
        .par_iter()
        .map(|&l| {
            let s = setup.f().partial_sum(&BigUint::from(l), x)?;
            let g = match setup.grid() {
                Some(ps) => ps.at(l, x).ok(),
                None => None,
            };
            Ok((l, s, g))
        })
        .collect::<Result<_>>()?;
    let mut report = LemmaReport::new("partial-sums");
    let mut table = Table::new(&["l", "S_l_exact", "S_l_float", "S_l_grid"]);
    for (l, s, g) in rows {
        if let Some(g) = &g {
            report.check("symbolic S_l = grid S_l", fmt_rat(&s), fmt_rat(g), &s == g, format!("x={x} l={l}"));
        }
        table.push(vec![
            l.to_string(),
            fmt_rat(&s),
            format!("{:e}", rat_to_f64(&s)),
            g.as_ref().map_or(String::new(), fmt_rat),
        ]);
    }
    let mut head = cfg.header("partial-sums", grid_level(&params, cfg.grid_cap));
    head.comment("x", x);
    head.comment("l_range", format!("{l_min}..={l_max} step {step}"));
    with_header(head, table).write(cfg.out.as_deref())?;
    Ok(Outcome::with(report))
}

fn ext_display(v: &ExtReal) -> String {
    match v {
        ExtReal::Finite(i) => i.lo().display(6),
        ExtReal::PosInfinity => "inf".into(),
    }
}

fn ext_bounds(v: &ExtReal) -> (String, String) {
    match v {
        ExtReal::Finite(i) => (i.lo().display(20), i.hi().display(20)),
        ExtReal::PosInfinity => ("inf".into(), "inf".into()),
    }
}

pub fn strong_mean(
    cfg: &Resolved,
    x: &DyadicPoint,
    phis: &[PhiSpec],
    ns: &[u64],
    threshold: Option<Rat>,
) -> Result<Outcome> {
    if phis.is_empty() || ns.is_empty() {
        bail!("need at least one --phi and one N");
    }
    if ns.contains(&0) {
        bail!("N must be positive");
    }
    let params = cfg.params()?;
    let setup = Lemma1Setup::new(&params, cfg.grid_cap)?;
    let threshold = threshold.unwrap_or_else(|| Rat::new(BigInt::from(params.n()), BigInt::from(40)));
    let count = *ns.iter().max().unwrap();
    let sums = partial_sum_series(&setup, x, count)?;

    let mut report = LemmaReport::new("strong-mean");
    let mut table = Table::new(&[
        "N",
        "phi",
        "mean_lo",
        "mean_hi",
        "mean_float",
        "threshold",
        "density_exact",
        "phi_threshold",
        "density_bound",
    ]);
    let sizes: Vec<usize> = ns.iter().map(|&n| n as usize).collect();
    let means: Vec<Vec<ExtReal>> = phis.iter().map(|phi| strong_means(&sums, phi, &sizes, PREC)).collect();
    for (i, &big_n) in ns.iter().enumerate() {
        let density = exceed_density(&sums, &threshold, big_n as usize);
        for (phi, phi_means) in phis.iter().zip(&means) {
            let mean = &phi_means[i];
            let phi_t = phi.eval(&threshold, PREC);
            let lower = phi_t.mul_rat(&density);
            let holds = lower.certainly_le(mean);
            report.check_certified(
                "density(|S| > threshold) * Phi(threshold) <= strong mean",
                ext_display(&lower),
                ext_display(mean),
                holds,
                format!("x={x} N={big_n} phi={phi}"),
            );
            let (lo, hi) = ext_bounds(mean);
            table.push(vec![
                big_n.to_string(),
                phi.to_string(),
                lo,
                hi,
                format!("{:e}", mean.to_f64()),
                fmt_rat(&threshold),
                fmt_rat(&density),
                ext_display(&phi_t),
                if holds == Some(true) { "pass" } else { "fail" }.into(),
            ]);
        }
    }
    let mut head = cfg.header("strong-mean", grid_level(&params, cfg.grid_cap));
    head.comment("x", x);
    head.comment("phi", phis.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" "));
    head.comment("N", ns.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "));
    with_header(head, table).write(cfg.out.as_deref())?;
    Ok(Outcome::with(report))
}

pub fn chain(cfg: &Resolved, n_min: u64, n_max: u64, k: u32, phi: &PhiSpec) -> Result<Outcome> {
    if n_min == 0 || n_min > n_max {
        bail!("need 1 <= n-min <= n-max");
    }
    if n_max - n_min >= MAX_ROWS {
        bail!("n range too long");
    }
    let reports: Vec<LemmaReport> = (n_min..=n_max).into_par_iter().map(|n| chain_check(n, k, phi)).collect();
    let mut head = cfg.header("chain-check", None);
    head.comment("n_range", format!("{n_min}..={n_max}"));
    head.comment("k", k);
    head.comment("phi", phi);
    // the n of each row goes into its witness
    let tagged: Vec<LemmaReport> = reports
        .iter()
        .map(|r| {
            let n = r.params().iter().find(|(key, _)| key == "n").map(|(_, v)| v.clone()).unwrap_or_default();
            let mut t = LemmaReport::new("chain");
            for a in r.rows() {
                let w = if a.witness.is_empty() { format!("n={n}") } else { format!("n={n} {}", a.witness) };
                match a.verdict {
                    Verdict::Info => t.info(a.assertion.clone(), &a.lhs, &a.rhs, w),
                    v => {
                        t.check(a.assertion.clone(), &a.lhs, &a.rhs, v == Verdict::Pass, w);
                    }
                }
            }
            t
        })
        .collect();
    let mut table = Table::from_report(&LemmaReport::new("chain"));
    for r in &tagged {
        table.extend_report(r);
    }
    with_header(head, table).write(cfg.out.as_deref())?;
    Ok(Outcome { reports: tagged })
}

fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    s.parse::<f64>().ok().or_else(|| parse_rat(s).ok().map(|r| rat_to_f64(&r)))
}

pub struct PlotArgs {
    pub input: PathBuf,
    pub x: String,
    pub y: String,
    pub group: Option<String>,
    pub log_y: bool,
    pub title: Option<String>,
}

pub fn plot(args: &PlotArgs, out: Option<PathBuf>) -> Result<Outcome> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("column {name:?} not in {}", headers.iter().collect::<Vec<_>>().join(",")))
    };
    let (xi, yi) = (col(&args.x)?, col(&args.y)?);
    let gi = args.group.as_deref().map(col).transpose()?;
    let mut series: Vec<Series> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let label = gi.map_or(args.y.clone(), |g| record[g].to_string());
        let parse = |i: usize| {
            parse_number(&record[i]).ok_or_else(|| anyhow!("row {}: {:?} is not a number", line + 1, &record[i]))
        };
        let point = (parse(xi)?, parse(yi)?);
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push(point),
            None => series.push(Series {
                label,
                points: vec![point],
            }),
        }
    }
    let plot = Plot {
        title: args.title.clone().unwrap_or_else(|| format!("{} vs {}", args.y, args.x)),
        x_label: args.x.clone(),
        y_label: args.y.clone(),
        log_y: args.log_y,
        series,
    };
    let svg = plot.render();
    match out {
        Some(p) => std::fs::write(&p, svg).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{svg}"),
    }
    Ok(Outcome::default())
}

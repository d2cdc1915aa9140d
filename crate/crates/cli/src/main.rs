//! `walshdiv`: runs the verifications of `walsh-core` and writes CSV reports
//! and SVG plots.
//!
//! Exit status: 0 when every asserted statement holds, 1 when one fails (the
//! first failure and its witness go to stderr), 2 on usage or input errors.

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use walsh_core::counterexample::DEFAULT_EXHAUSTIVE_CAP;
use walsh_core::dyadic::DyadicPoint;
use walsh_core::fourier::PhiSpec;
use walsh_core::rat::{parse_rat, Rat};

use commands::{Outcome, PlotArgs, Resolved};
use config::FileConfig;

/// Environment variable fixing the number of worker threads.
const WORKERS_ENV: &str = "WALSH_WORKERS";

#[derive(Parser)]
#[command(name = "walshdiv", version, about = "Exact verifier for Walsh strong-means divergence constructions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key=value parameter file (n, c, grid_cap, samples); flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for sampled modes, echoed in every header
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Output file (stdout when omitted)
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Suppress the summary on stderr
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Args, Clone, Default)]
struct Params {
    #[arg(long)]
    n: Option<u32>,
    /// Spectral exponent c in u_j = 2^{c(j+n)} (default 10)
    #[arg(long)]
    c: Option<u32>,
    /// Largest dense grid, as a power of two (default 26)
    #[arg(long)]
    grid_cap: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the E_n / selector / integral lemma
    Lemma2 {
        #[command(flatten)]
        params: Params,
        #[arg(long, value_parser = ["exhaustive", "sample"], default_value = "exhaustive")]
        mode: String,
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
        exhaustive_cap: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Table of |E_n| against 1 - 2exp(-n/36)
    MeasureEn {
        #[arg(long, default_value_t = 1)]
        n_min: u32,
        #[arg(long)]
        n_max: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Build f_n and check its certificates
    BuildFn {
        #[command(flatten)]
        params: Params,
        /// Also write the nonzero Walsh coefficients here
        #[arg(long)]
        coefficients: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Verify the partial-sum lemma at every base cell, or at one point
    Lemma1 {
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        x: Option<DyadicPoint>,
        /// Also write the per-point witnesses here
        #[arg(long)]
        witnesses: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// S_l f_n(x) over a range of l
    PartialSums {
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        x: DyadicPoint,
        #[arg(long, default_value_t = 1)]
        l_min: u64,
        #[arg(long)]
        l_max: u64,
        #[arg(long, default_value_t = 1)]
        step: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Strong Phi-means of the partial sums at x
    StrongMean {
        #[command(flatten)]
        params: Params,
        #[arg(long)]
        x: DyadicPoint,
        /// pow:p, exp:c or exppow:alpha; repeatable
        #[arg(long, required = true)]
        phi: Vec<PhiSpec>,
        #[arg(long = "N-list", value_delimiter = ',', required = true)]
        n_list: Vec<u64>,
        /// Exceedance threshold (default n/40)
        #[arg(long, value_parser = parse_threshold)]
        threshold: Option<Rat>,
        #[command(flatten)]
        common: Common,
    },
    /// Scalar constant chains, and the minimal n_k for Phi
    ChainCheck {
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        n_min: Option<u64>,
        #[arg(long)]
        n_max: Option<u64>,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value = "exppow:2")]
        phi: PhiSpec,
        #[command(flatten)]
        common: Common,
    },
    /// Plot columns of a CSV table as SVG polylines
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        /// Split rows into one series per value of this column
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        log_y: bool,
        #[arg(long)]
        title: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_threshold(s: &str) -> Result<Rat, String> {
    parse_rat(s).map_err(|e| e.to_string())
}

fn resolve(common: &Common, params: &Params, samples: Option<u64>) -> Result<Resolved> {
    let file = match &common.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    Ok(Resolved::merge(
        &file,
        params.n,
        params.c,
        params.grid_cap,
        samples,
        common.seed,
        common.out.clone(),
    ))
}

fn init_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let threads: usize = v.trim().parse().with_context(|| format!("{WORKERS_ENV}={v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(Outcome, bool)> {
    init_workers()?;
    Ok(match cli.command {
        Command::Lemma2 {
            params,
            mode,
            samples,
            exhaustive_cap,
            common,
        } => {
            let cfg = resolve(&common, &params, samples)?;
            (commands::lemma2(&cfg, mode == "sample", exhaustive_cap)?, common.quiet)
        }
        Command::MeasureEn { n_min, n_max, common } => {
            let cfg = resolve(&common, &Params::default(), None)?;
            (commands::measure_en(&cfg, n_min, n_max)?, common.quiet)
        }
        Command::BuildFn {
            params,
            coefficients,
            common,
        } => {
            let cfg = resolve(&common, &params, None)?;
            (commands::build_fn_cmd(&cfg, coefficients)?, common.quiet)
        }
        Command::Lemma1 {
            params,
            x,
            witnesses,
            common,
        } => {
            let cfg = resolve(&common, &params, None)?;
            (commands::lemma1(&cfg, x, witnesses)?, common.quiet)
        }
        Command::PartialSums {
            params,
            x,
            l_min,
            l_max,
            step,
            common,
        } => {
            let cfg = resolve(&common, &params, None)?;
            (commands::partial_sums(&cfg, &x, l_min, l_max, step)?, common.quiet)
        }
        Command::StrongMean {
            params,
            x,
            phi,
            n_list,
            threshold,
            common,
        } => {
            let cfg = resolve(&common, &params, None)?;
            (commands::strong_mean(&cfg, &x, &phi, &n_list, threshold)?, common.quiet)
        }
        Command::ChainCheck {
            n,
            n_min,
            n_max,
            k,
            phi,
            common,
        } => {
            let cfg = resolve(&common, &Params::default(), None)?;
            let (lo, hi) = match (n, n_min, n_max) {
                (Some(n), None, None) => (n, n),
                (None, Some(lo), Some(hi)) => (lo, hi),
                _ => anyhow::bail!("give either --n or both --n-min and --n-max"),
            };
            (commands::chain(&cfg, lo, hi, k, &phi)?, common.quiet)
        }
        Command::Plot {
            input,
            x,
            y,
            group,
            log_y,
            title,
            common,
        } => {
            let args = PlotArgs {
                input,
                x,
                y,
                group,
                log_y,
                title,
            };
            (commands::plot(&args, common.out)?, common.quiet)
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((outcome, quiet)) => {
            if !quiet {
                eprint!("{}", outcome.summary());
            }
            match outcome.diagnostic() {
                None => ExitCode::SUCCESS,
                Some(d) => {
                    eprintln!("walshdiv: {} failed assertion(s); {d}", outcome.failures());
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("walshdiv: error: {e:#}");
            ExitCode::from(2)
        }
    }
}

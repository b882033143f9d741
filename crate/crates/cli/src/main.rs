use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dppls_core::experiments::{
    self, BoundsQuery, CsvTable, ExperimentConfig, SampleSizes, DEFAULT_CONJECTURE_TS,
};
use dppls_core::{BasisFamily, Error, FeatureBasis, Scheme, TargetFunction};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "dppls",
    version,
    about = "Random designs for weighted least-squares approximation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probability of λ_min(Gʷ) ≥ 1 − δ over an (m, n) grid.
    StabilityMap(Common),
    /// RMS and 95% quantile of the relative L² error per (m, n, scheme).
    ErrorTable(ErrorArgs),
    /// Per-replicate ln relative errors.
    ErrorHist(ErrorArgs),
    /// Tails of λ_min⁻¹ under the projection DPP against i.i.d. sampling.
    ConjectureCheck(ConjectureArgs),
    /// One design as index,x,w rows.
    DumpDesign(Common),
    /// Chernoff constants, sample sizes and failure bounds.
    Bounds(BoundsArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value = "hermite")]
    basis: BasisFamily,
    /// Sampling schemes, comma separated.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    m: Vec<usize>,
    /// Absolute sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "n_mult")]
    n: Vec<usize>,
    /// Sample sizes as multiples of m, comma separated.
    #[arg(long, value_delimiter = ',')]
    n_mult: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.75)]
    delta: f64,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct ErrorArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "runge")]
    target: TargetFunction,
}

#[derive(Args)]
struct ConjectureArgs {
    #[command(flatten)]
    common: Common,
    /// Thresholds t for P(λ_min⁻¹ > t), comma separated.
    #[arg(long, value_delimiter = ',')]
    t: Vec<f64>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: Common,
    /// Target failure probability.
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// Grid size for the K constant.
    #[arg(long, default_value_t = dppls_core::bounds::DEFAULT_K_GRID)]
    grid: usize,
}

impl Common {
    fn config(&self, schemes: &[Scheme], ms: &[usize], mults: &[f64], replicates: usize) -> ExperimentConfig {
        let sizes = if !self.n.is_empty() {
            SampleSizes::Absolute(self.n.clone())
        } else if !self.n_mult.is_empty() {
            SampleSizes::Multiples(self.n_mult.clone())
        } else {
            SampleSizes::Multiples(mults.to_vec())
        };
        ExperimentConfig {
            basis: self.basis,
            schemes: or_default(&self.scheme, schemes),
            ms: or_default(&self.m, ms),
            sizes,
            alpha: self.alpha,
            delta: self.delta,
            replicates: self.replicates.unwrap_or(replicates),
            seed: self.seed,
            target: TargetFunction::runge(),
            workers: self.workers,
        }
    }

    fn single_m(&self, default: usize) -> Result<usize, Error> {
        match self.m.as_slice() {
            [] => Ok(default),
            [m] => Ok(*m),
            _ => Err(Error::InvalidConfig("exactly one --m value expected".into())),
        }
    }
}

fn or_default<T: Clone>(given: &[T], default: &[T]) -> Vec<T> {
    if given.is_empty() {
        default.to_vec()
    } else {
        given.to_vec()
    }
}

fn emit(table: &CsvTable, out: &Option<PathBuf>) -> anyhow::Result<()> {
    match out {
        Some(path) => table.save(path)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write_to(&mut lock)?;
            lock.flush().context("flushing standard output")?;
        }
    }
    Ok(())
}

const STABILITY_SCHEMES: [Scheme; 4] = [
    Scheme::IidMu,
    Scheme::IidChristoffel,
    Scheme::Volume,
    Scheme::RepeatedDpp,
];
const PAPER_MS: [usize; 5] = [10, 20, 30, 40, 50];

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::StabilityMap(c) => {
            let config = c.config(&STABILITY_SCHEMES, &[20], &[1.0, 1.5, 2.0, 3.0, 5.0, 10.0], 200);
            let cells = experiments::stability_map(&config)?;
            emit(&experiments::stability_table(&cells, config.seed)?, &c.out)
        }
        Command::ErrorTable(a) => {
            let mut config = a.common.config(&Scheme::ALL, &PAPER_MS, &[2.0], 1000);
            config.target = a.target;
            let samples = experiments::error_samples(&config)?;
            emit(&experiments::error_table(&samples, config.seed)?, &a.common.out)
        }
        Command::ErrorHist(a) => {
            let mut config = a.common.config(&Scheme::ALL, &[10], &[2.0], 1000);
            config.target = a.target;
            let samples = experiments::error_samples(&config)?;
            emit(
                &experiments::error_histogram_table(&samples, config.seed)?,
                &a.common.out,
            )
        }
        Command::ConjectureCheck(a) => {
            let c = &a.common;
            let basis = FeatureBasis::with_default_measure(c.basis, c.single_m(5)?)?;
            let ts = or_default(&a.t, &DEFAULT_CONJECTURE_TS);
            let report = experiments::conjecture_check(
                &basis,
                &ts,
                c.replicates.unwrap_or(10_000),
                c.seed,
                c.workers,
            )?;
            emit(&report.to_table(c.seed)?, &c.out)?;
            eprintln!("{} (empirical check only)", report.verdict());
            Ok(())
        }
        Command::DumpDesign(c) => {
            let scheme = match c.scheme.as_slice() {
                [s] => *s,
                _ => return Err(Error::InvalidConfig("exactly one --scheme expected".into()).into()),
            };
            let m = c.single_m(10)?;
            let n = match (c.n.as_slice(), c.n_mult.as_slice()) {
                ([n], []) => *n,
                ([], [k]) => (k * m as f64).ceil() as usize,
                ([], []) => m,
                _ => return Err(Error::InvalidConfig("exactly one --n or --n-mult expected".into()).into()),
            };
            let basis = FeatureBasis::with_default_measure(c.basis, m)?;
            let design = experiments::draw_design(scheme, &basis, n, c.alpha, c.delta, c.seed)?;
            emit(&experiments::design_table(&design)?, &c.out)
        }
        Command::Bounds(a) => {
            let c = &a.common;
            let n = match (c.n.as_slice(), c.n_mult.as_slice()) {
                ([], []) => None,
                ([n], []) => Some(*n),
                ([], [k]) => Some((k * c.single_m(20)? as f64).ceil() as usize),
                _ => return Err(Error::InvalidConfig("at most one --n or --n-mult expected".into()).into()),
            };
            let query = BoundsQuery {
                basis: c.basis,
                m: c.single_m(20)?,
                n,
                alpha: c.alpha,
                delta: c.delta,
                eta: a.eta,
                grid: a.grid,
            };
            emit(&experiments::bounds_table(&query)?, &c.out)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Error>().is_some_and(Error::is_validation) {
        EXIT_VALIDATION
    } else {
        EXIT_NUMERIC
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

//! Seeded, parallel Monte Carlo experiments producing CSV tables.
//!
//! Every replicate draws from its own [`RngStream`] derived from the
//! configuration seed, the experiment kind and the `(m, n, scheme)` cell, so
//! outputs do not depend on the number of worker threads.

mod table;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::basis::{BasisFamily, FeatureBasis};
use crate::bounds::{self, BoundScheme, ChernoffConstants, TheoryBound};
use crate::error::{Error, Result};
use crate::lsq::{self, EmpiricalGram};
use crate::rng::{mix_seed, RngStream};
use crate::sampler::{DesignSample, DesignSampler, Scheme, WeightFunction};

pub use table::CsvTable;

/// Relative errors above this (and failed fits) are recorded as this value.
pub const ERROR_CAP: f64 = 1e15;

/// Smallest replicate count accepted by [`conjecture_check`].
pub const MIN_CONJECTURE_REPLICATES: usize = 1000;

/// Largest dimension accepted by [`conjecture_check`].
pub const MAX_CONJECTURE_DIM: usize = 12;

/// Default thresholds for the tail comparison.
pub const DEFAULT_CONJECTURE_TS: [f64; 5] = [1.25, 1.5, 2.0, 4.0, 8.0];

const KIND_STABILITY: u64 = 1;
const KIND_ERROR: u64 = 2;
const KIND_CONJECTURE: u64 = 3;
const KIND_DUMP: u64 = 4;

/// A named scalar target `f`.
#[derive(Clone, Copy)]
pub struct TargetFunction {
    id: &'static str,
    f: fn(f64) -> f64,
}

fn runge(x: f64) -> f64 {
    1.0 / (1.0 + 2.0 * x * x)
}

impl TargetFunction {
    pub const IDS: [&'static str; 1] = ["runge"];

    /// `f(x) = (1 + 2x²)⁻¹`.
    pub fn runge() -> Self {
        Self {
            id: "runge",
            f: runge,
        }
    }

    pub fn id(&self) -> &'static str {
        self.id
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }
}

impl fmt::Debug for TargetFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("TargetFunction").field(&self.id).finish()
    }
}

impl PartialEq for TargetFunction {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl FromStr for TargetFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "runge" => Ok(Self::runge()),
            _ => Err(Error::InvalidConfig(format!("unknown target function '{s}'"))),
        }
    }
}

/// How sample sizes are chosen for each `m`.
#[derive(Debug, Clone, PartialEq)]
pub enum SampleSizes {
    Absolute(Vec<usize>),
    /// `n = ⌈k m⌉` for each multiplier `k`.
    Multiples(Vec<f64>),
}

impl SampleSizes {
    pub fn for_dim(&self, m: usize) -> Vec<usize> {
        match self {
            Self::Absolute(ns) => ns.clone(),
            Self::Multiples(ks) => ks.iter().map(|k| (k * m as f64).ceil() as usize).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub basis: BasisFamily,
    pub schemes: Vec<Scheme>,
    pub ms: Vec<usize>,
    pub sizes: SampleSizes,
    pub alpha: f64,
    pub delta: f64,
    pub replicates: usize,
    pub seed: u64,
    pub target: TargetFunction,
    pub workers: usize,
}

impl ExperimentConfig {
    /// Hermite basis, all schemes, `m ∈ {10, …, 50}`, `n ∈ {2m, 5m, 10m}`,
    /// `δ = 3/4`, the Runge-type target.
    pub fn new(basis: BasisFamily) -> Self {
        Self {
            basis,
            schemes: Scheme::ALL.to_vec(),
            ms: vec![10, 20, 30, 40, 50],
            sizes: SampleSizes::Multiples(vec![2.0, 5.0, 10.0]),
            alpha: 1.0,
            delta: 0.75,
            replicates: 1000,
            seed: 0,
            target: TargetFunction::runge(),
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.replicates == 0 {
            return invalid("replicates must be at least 1".into());
        }
        if self.workers == 0 {
            return invalid("workers must be at least 1".into());
        }
        if self.schemes.is_empty() {
            return invalid("no sampling scheme selected".into());
        }
        if self.ms.is_empty() || self.ms.contains(&0) {
            return invalid("m values must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return invalid(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if let SampleSizes::Multiples(ks) = &self.sizes {
            if ks.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
                return invalid("n multipliers must be positive".into());
            }
        }
        for &m in &self.ms {
            let ns = self.sizes.for_dim(m);
            if ns.is_empty() {
                return invalid("no sample sizes given".into());
            }
            for n in ns {
                for scheme in &self.schemes {
                    scheme.validate(m, n)?;
                }
            }
        }
        Ok(())
    }

    fn basis(&self, m: usize) -> Result<FeatureBasis> {
        FeatureBasis::with_default_measure(self.basis, m)
    }
}

/// Stream key for one experiment cell.
fn cell_key(kind: u64, m: usize, n: usize, tag: u64) -> u64 {
    [m as u64, n as u64, tag]
        .iter()
        .fold(kind, |k, &v| mix_seed(k, v))
}

/// Evaluates `task(r)` for `r = 0..replicates` on `workers` threads,
/// returning results in replicate order.
fn run_replicates<T, F>(workers: usize, replicates: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..replicates as u64).into_par_iter().map(&task).collect())
}

fn fmt_real(v: f64) -> String {
    format!("{v:e}")
}

/// Fraction of designs meeting `λ_min(Gʷ) ≥ 1 − δ` in one `(m, n, scheme)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCell {
    pub m: usize,
    pub n: usize,
    pub scheme: Scheme,
    pub p_hat: f64,
    pub replicates: usize,
    /// Replicates whose sampler or Gram computation failed.
    pub failures: usize,
}

pub fn stability_map(config: &ExperimentConfig) -> Result<Vec<StabilityCell>> {
    config.validate()?;
    if config.schemes.contains(&Scheme::RepeatedDppConditioned) {
        return Err(Error::InvalidConfig(
            "stability-map does not accept the conditioned scheme".into(),
        ));
    }
    let threshold = 1.0 - config.delta;
    let mut cells = Vec::new();
    for &m in &config.ms {
        let sampler = DesignSampler::new(config.basis(m)?)?;
        for n in config.sizes.for_dim(m) {
            for &scheme in &config.schemes {
                let key = cell_key(KIND_STABILITY, m, n, scheme.index());
                let outcomes = run_replicates(config.workers, config.replicates, |r| {
                    let mut rng = RngStream::for_replicate(config.seed, key, r);
                    let design = scheme.draw(&sampler, n, config.alpha, config.delta, &mut rng);
                    Ok(
                        match design.and_then(|d| EmpiricalGram::new(&d, sampler.basis())) {
                            Ok(g) => Some(g.lambda_min() >= threshold),
                            Err(_) => None,
                        },
                    )
                })?;
                let stable = outcomes.iter().filter(|o| **o == Some(true)).count();
                let failures = outcomes.iter().filter(|o| o.is_none()).count();
                cells.push(StabilityCell {
                    m,
                    n,
                    scheme,
                    p_hat: stable as f64 / config.replicates as f64,
                    replicates: config.replicates,
                    failures,
                });
            }
        }
    }
    Ok(cells)
}

pub fn stability_table(cells: &[StabilityCell], seed: u64) -> Result<CsvTable> {
    let mut t = CsvTable::new(["m", "n", "scheme", "p_hat", "replicates", "seed", "failures"]);
    for c in cells {
        t.push(vec![
            c.m.to_string(),
            c.n.to_string(),
            c.scheme.name().to_string(),
            c.p_hat.to_string(),
            c.replicates.to_string(),
            seed.to_string(),
            c.failures.to_string(),
        ])?;
    }
    Ok(t)
}

/// Smallest `n` among the cells of `scheme` at dimension `m` with
/// `p_hat ≥ level`, if any.
pub fn minimal_stable_n(cells: &[StabilityCell], scheme: Scheme, m: usize, level: f64) -> Option<usize> {
    cells
        .iter()
        .filter(|c| c.scheme == scheme && c.m == m && c.p_hat >= level)
        .map(|c| c.n)
        .min()
}

/// Projection of the target onto `V_m` with its exact errors.
#[derive(Debug, Clone, PartialEq)]
pub struct BestApproximation {
    pub coefficients: Vec<f64>,
    pub target_norm: f64,
    pub best_error: f64,
}

impl BestApproximation {
    pub fn compute(target: &TargetFunction, basis: &FeatureBasis) -> Result<Self> {
        let quad = basis
            .measure()
            .gauss_quadrature(lsq::default_quadrature_order(basis.dim()))?;
        let f = |x| target.eval(x);
        let coefficients = lsq::best_approximation(f, basis, &quad)?;
        let target_norm = lsq::l2_norm(f, basis, &quad)?;
        let best_error = lsq::l2_error(f, &coefficients, basis, &quad)?;
        Ok(Self {
            coefficients,
            target_norm,
            best_error,
        })
    }

    pub fn relative_best(&self) -> f64 {
        self.best_error / self.target_norm
    }

    /// `‖f − φᵀc‖ / ‖f‖`, using `‖f − φᵀc‖² = ‖f − P f‖² + ‖a − c‖²`.
    pub fn relative_error(&self, coefficients: &[f64]) -> f64 {
        let d2: f64 = self
            .coefficients
            .iter()
            .zip(coefficients)
            .map(|(a, c)| (a - c) * (a - c))
            .sum();
        (self.best_error * self.best_error + d2).sqrt() / self.target_norm
    }
}

/// Capped relative error of one fitted replicate.
fn replicate_error(
    scheme: Scheme,
    sampler: &DesignSampler,
    best: &BestApproximation,
    target: &TargetFunction,
    n: usize,
    config: &ExperimentConfig,
    rng: &mut RngStream,
) -> Result<(f64, bool)> {
    let design = scheme.draw(sampler, n, config.alpha, config.delta, rng)?;
    let values: Vec<f64> = design.points.iter().map(|&x| target.eval(x)).collect();
    match lsq::weighted_lsq_fit(&values, &design, sampler.basis()) {
        Ok(fit) => {
            let e = best.relative_error(&fit.coefficients);
            if e.is_finite() && e < ERROR_CAP {
                Ok((e, false))
            } else {
                Ok((ERROR_CAP, true))
            }
        }
        Err(Error::SingularDesign { .. } | Error::Numeric(_)) => Ok((ERROR_CAP, true)),
        Err(e) => Err(e),
    }
}

/// Relative errors of every replicate in one `(m, n, scheme)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSamples {
    pub m: usize,
    pub n: usize,
    pub scheme: Scheme,
    pub best: f64,
    pub errors: Vec<f64>,
    pub capped: usize,
}

impl ErrorSamples {
    /// `(mean e²)^{1/2}` over replicates.
    pub fn rms(&self) -> f64 {
        let s: f64 = self.errors.iter().map(|e| e * e).sum();
        (s / self.errors.len() as f64).sqrt()
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        quantile_type7(&self.errors, p)
    }
}

/// Linear-interpolation (type 7) empirical quantile.
pub fn quantile_type7(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("quantile level {p} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Runs the fitting experiment for every `(m, n, scheme)` of the config.
pub fn error_samples(config: &ExperimentConfig) -> Result<Vec<ErrorSamples>> {
    config.validate()?;
    let mut out = Vec::new();
    for &m in &config.ms {
        let basis = config.basis(m)?;
        let best = BestApproximation::compute(&config.target, &basis)?;
        let sampler = DesignSampler::new(basis)?;
        for n in config.sizes.for_dim(m) {
            for &scheme in &config.schemes {
                let key = cell_key(KIND_ERROR, m, n, scheme.index());
                let results = run_replicates(config.workers, config.replicates, |r| {
                    let mut rng = RngStream::for_replicate(config.seed, key, r);
                    replicate_error(scheme, &sampler, &best, &config.target, n, config, &mut rng)
                })?;
                out.push(ErrorSamples {
                    m,
                    n,
                    scheme,
                    best: best.relative_best(),
                    capped: results.iter().filter(|r| r.1).count(),
                    errors: results.into_iter().map(|r| r.0).collect(),
                });
            }
        }
    }
    Ok(out)
}

pub fn error_table(samples: &[ErrorSamples], seed: u64) -> Result<CsvTable> {
    let mut t = CsvTable::new([
        "m",
        "n",
        "scheme",
        "best",
        "rms_rel_error",
        "q95_rel_error",
        "replicates",
        "capped",
        "seed",
    ]);
    for s in samples {
        t.push(vec![
            s.m.to_string(),
            s.n.to_string(),
            s.scheme.name().to_string(),
            fmt_real(s.best),
            fmt_real(s.rms()),
            fmt_real(s.quantile(0.95)?),
            s.errors.len().to_string(),
            s.capped.to_string(),
            seed.to_string(),
        ])?;
    }
    Ok(t)
}

/// One row per replicate with `ln(‖f − f̂‖ / ‖f‖)`.
pub fn error_histogram_table(samples: &[ErrorSamples], seed: u64) -> Result<CsvTable> {
    let mut t = CsvTable::new(["m", "n", "scheme", "replicate", "log_rel_error", "capped", "seed"]);
    for s in samples {
        for (r, &e) in s.errors.iter().enumerate() {
            t.push(vec![
                s.m.to_string(),
                s.n.to_string(),
                s.scheme.name().to_string(),
                r.to_string(),
                fmt_real(e.ln()),
                u8::from(e >= ERROR_CAP).to_string(),
                seed.to_string(),
            ])?;
        }
    }
    Ok(t)
}

/// Tail probabilities of `λ_min(Gʷ)⁻¹` at one threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TailComparison {
    pub t: f64,
    pub dpp_tail: f64,
    pub iid_tail: f64,
    /// Binomial standard deviation of `dpp_tail − iid_tail`.
    pub sigma: f64,
}

impl TailComparison {
    pub fn consistent(&self) -> bool {
        self.dpp_tail <= self.iid_tail + 3.0 * self.sigma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConjectureReport {
    pub m: usize,
    pub replicates: usize,
    pub rows: Vec<TailComparison>,
}

impl ConjectureReport {
    /// `CONSISTENT` when every row satisfies `dpp ≤ iid + 3σ`, else `VIOLATION`.
    /// Either way this is an empirical observation, not a proof.
    pub fn verdict(&self) -> &'static str {
        if self.rows.iter().all(TailComparison::consistent) {
            "CONSISTENT"
        } else {
            "VIOLATION"
        }
    }

    pub fn to_table(&self, seed: u64) -> Result<CsvTable> {
        let mut t = CsvTable::new([
            "m",
            "t",
            "dpp_tail",
            "iid_tail",
            "sigma",
            "replicates",
            "seed",
            "row_consistent",
            "verdict",
        ]);
        for row in &self.rows {
            t.push(vec![
                self.m.to_string(),
                row.t.to_string(),
                row.dpp_tail.to_string(),
                row.iid_tail.to_string(),
                fmt_real(row.sigma),
                self.replicates.to_string(),
                seed.to_string(),
                row.consistent().to_string(),
                self.verdict().to_string(),
            ])?;
        }
        Ok(t)
    }
}

/// Compares `P(λ_min(Gʷ)⁻¹ > t)` under the projection DPP `γ_m` and under
/// `m` i.i.d. draws from `ν_m`, both with weight `w_m`.
pub fn conjecture_check(
    basis: &FeatureBasis,
    ts: &[f64],
    replicates: usize,
    seed: u64,
    workers: usize,
) -> Result<ConjectureReport> {
    let m = basis.dim();
    if m > MAX_CONJECTURE_DIM {
        return Err(Error::InvalidConfig(format!(
            "conjecture check supports m ≤ {MAX_CONJECTURE_DIM}, got {m}"
        )));
    }
    if replicates < MIN_CONJECTURE_REPLICATES {
        return Err(Error::InvalidConfig(format!(
            "conjecture check needs at least {MIN_CONJECTURE_REPLICATES} replicates, got {replicates}"
        )));
    }
    if workers == 0 {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    if ts.is_empty() || ts.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidConfig(
            "thresholds must be finite and non-empty".into(),
        ));
    }
    let sampler = DesignSampler::new(basis.clone())?;
    let inv_lambda = |design: Result<DesignSample>| -> Result<f64> {
        let g = EmpiricalGram::new(&design?, basis)?;
        let l = g.lambda_min();
        Ok(if l > 0.0 { 1.0 / l } else { f64::INFINITY })
    };
    let dpp_key = cell_key(KIND_CONJECTURE, m, m, 0);
    let dpp = run_replicates(workers, replicates, |r| {
        let mut rng = RngStream::for_replicate(seed, dpp_key, r);
        inv_lambda(sampler.sample_dpp(&mut rng))
    })?;
    let iid_key = cell_key(KIND_CONJECTURE, m, m, 1);
    let iid = run_replicates(workers, replicates, |r| {
        let mut rng = RngStream::for_replicate(seed, iid_key, r);
        inv_lambda(sampler.sample_iid(&WeightFunction::Christoffel, m, &mut rng))
    })?;
    let r = replicates as f64;
    let tail = |v: &[f64], t: f64| v.iter().filter(|&&x| x > t).count() as f64 / r;
    let rows = ts
        .iter()
        .map(|&t| {
            let (p, q) = (tail(&dpp, t), tail(&iid, t));
            TailComparison {
                t,
                dpp_tail: p,
                iid_tail: q,
                sigma: ((p * (1.0 - p) + q * (1.0 - q)) / r).sqrt(),
            }
        })
        .collect();
    Ok(ConjectureReport { m, replicates, rows })
}

/// Draws one design; `(seed, scheme, m, n)` determine it completely.
pub fn draw_design(
    scheme: Scheme,
    basis: &FeatureBasis,
    n: usize,
    alpha: f64,
    delta: f64,
    seed: u64,
) -> Result<DesignSample> {
    scheme.validate(basis.dim(), n)?;
    let sampler = DesignSampler::new(basis.clone())?;
    let key = cell_key(KIND_DUMP, basis.dim(), n, scheme.index());
    let mut rng = RngStream::for_replicate(seed, key, 0);
    scheme.draw(&sampler, n, alpha, delta, &mut rng)
}

/// Columns `index,x,w` with 17 significant digits, which parse back to the
/// identical `f64`.
pub fn design_table(design: &DesignSample) -> Result<CsvTable> {
    let mut t = CsvTable::new(["index", "x", "w"]);
    for (i, (x, w)) in design.points.iter().zip(&design.weights).enumerate() {
        t.push(vec![i.to_string(), format!("{x:.16e}"), format!("{w:.16e}")])?;
    }
    Ok(t)
}

/// Inputs of [`bounds_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsQuery {
    pub basis: BasisFamily,
    pub m: usize,
    pub n: Option<usize>,
    pub alpha: f64,
    pub delta: f64,
    pub eta: f64,
    pub grid: usize,
}

/// Chernoff constants, sample sizes and failure bounds as `quantity,value,note` rows.
pub fn bounds_table(q: &BoundsQuery) -> Result<CsvTable> {
    let basis = FeatureBasis::with_default_measure(q.basis, q.m)?;
    let cc = ChernoffConstants::new(q.delta)?;
    let mut t = CsvTable::new(["quantity", "value", "note"]);
    let mut row =
        |name: &str, value: String, note: &str| t.push(vec![name.to_string(), value, note.to_string()]);
    row("c_delta", fmt_real(cc.c_delta), "")?;
    row("d_delta", fmt_real(cc.d_delta), "")?;
    row(
        "iid_sample_size",
        bounds::iid_sample_size(q.m, q.delta, q.eta, q.alpha)?.to_string(),
        "natural log",
    )?;
    row(
        "volume_sample_size",
        bounds::volume_sample_size(q.m, q.delta, q.eta, q.alpha)?.to_string(),
        "natural log",
    )?;
    let w = WeightFunction::optimal(q.alpha)?;
    row(
        "k_constant",
        fmt_real(bounds::k_constant(&basis, &w, q.grid)?),
        "grid lower bound",
    )?;
    row(
        "k_constant_unit_weight",
        fmt_real(bounds::k_constant(&basis, &WeightFunction::Unit, q.grid)?),
        "grid lower bound",
    )?;
    if let Some(n) = q.n {
        for scheme in [
            BoundScheme::IidOptimal,
            BoundScheme::VolumeSampling,
            BoundScheme::RepeatedDpp,
        ] {
            if scheme == BoundScheme::VolumeSampling && n < q.m {
                continue;
            }
            let tb = TheoryBound::new(scheme, q.m, n, q.alpha, q.delta, q.eta)?;
            let note = if scheme == BoundScheme::RepeatedDpp {
                "conjecture-dependent"
            } else {
                ""
            };
            row(
                &format!("failure_bound_{}", scheme.name()),
                fmt_real(tb.predicted_failure_prob),
                note,
            )?;
            if scheme == BoundScheme::VolumeSampling {
                row("beta", fmt_real(tb.beta), "")?;
            }
        }
    }
    Ok(t)
}

//! Random designs: i.i.d. sampling from `wμ`, projection DPP, generalized
//! volume sampling, repeated DPP, and stability-conditioned sampling.
//!
//! [`DesignSampler`] precomputes everything that depends only on the basis:
//! a density grid over the effective support, the feature table `φ(p)` at
//! every grid point, and one inverse-CDF sampler per component `φ_i² μ` of
//! the Christoffel mixture. The DPP chain rule then only costs one dot
//! product per grid point and step.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::basis::{dot, squared_norm, FeatureBasis, RotatedBasisState};
use crate::error::{Error, Result};
use crate::lsq::EmpiricalGram;
use crate::measure::{DensityGrid, GridDensitySampler, ReferenceMeasure, DEFAULT_DENSITY_TOL};
use crate::rng::RngStream;

/// Mass tolerance for densities tabulated during sampling.
pub const SAMPLING_MASS_TOL: f64 = 1e-6;

/// Consecutive degenerate draws tolerated within one DPP step.
pub const MAX_DEGENERATE_RETRIES: usize = 16;

/// Default cap on whole-design redraws in conditioned sampling.
pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

/// Density `h` w.r.t. μ used as the second mixture component of a weight.
pub trait MixtureDensity: Send + Sync + fmt::Debug {
    fn density(&self, x: f64) -> f64;
    fn sample(&self, measure: &ReferenceMeasure, rng: &mut RngStream) -> f64;
}

/// `h ≡ 1`: the mixture's second component is μ itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitDensity;

impl MixtureDensity for UnitDensity {
    fn density(&self, _x: f64) -> f64 {
        1.0
    }

    fn sample(&self, measure: &ReferenceMeasure, rng: &mut RngStream) -> f64 {
        measure.sample(rng)
    }
}

/// Weight function `w` with `∫ w dμ = 1`; designs are drawn from `ν = wμ`
/// and least squares weights each point by `w(x)⁻¹`.
#[derive(Debug, Clone)]
pub enum WeightFunction {
    /// `w ≡ 1`.
    Unit,
    /// `w = w_m`.
    Christoffel,
    /// `w = α w_m + (1 − α) h` with `α ∈ (0, 1]`.
    Mixture { alpha: f64, h: Arc<dyn MixtureDensity> },
}

impl WeightFunction {
    /// `α w_m + (1 − α)` (the `h ≡ 1` mixture).
    pub fn mixture(alpha: f64) -> Result<Self> {
        Self::mixture_with(alpha, Arc::new(UnitDensity))
    }

    pub fn mixture_with(alpha: f64, h: Arc<dyn MixtureDensity>) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!(
                "mixture weight α must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(Self::Mixture { alpha, h })
    }

    /// Christoffel weight for `α = 1`, otherwise the `h ≡ 1` mixture.
    pub fn optimal(alpha: f64) -> Result<Self> {
        if alpha == 1.0 {
            Ok(Self::Christoffel)
        } else {
            Self::mixture(alpha)
        }
    }

    pub fn eval(&self, basis: &FeatureBasis, x: f64) -> f64 {
        match self {
            Self::Unit => 1.0,
            Self::Christoffel => basis.christoffel_density(x),
            Self::Mixture { alpha, h } => alpha * basis.christoffel_density(x) + (1.0 - alpha) * h.density(x),
        }
    }
}

/// `n` ordered design points with their weight values `w(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSample {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub sampler_id: String,
    pub seed: u64,
    pub stream: u64,
    /// Whole-design draws used (greater than one only for conditioned sampling).
    pub attempts: usize,
    /// Independent DPP blocks concatenated (repeated DPP), else zero or one.
    pub blocks: usize,
}

impl DesignSample {
    fn new(
        points: Vec<f64>,
        w: &WeightFunction,
        basis: &FeatureBasis,
        id: &str,
        rng: &RngStream,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDesign);
        }
        let weights = points.iter().map(|&x| w.eval(basis, x)).collect();
        Ok(Self {
            points,
            weights,
            sampler_id: id.to_string(),
            seed: rng.seed(),
            stream: rng.stream(),
            attempts: 1,
            blocks: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Design schemes exposed by the experiment harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// i.i.d. from μ, unweighted.
    IidMu,
    /// i.i.d. from `ν = wμ` with `w = w_m` (or the α-mixture).
    IidChristoffel,
    /// Volume sampling `γ_n^ν` (volume-rescaled for `ν = ν_m`).
    Volume,
    /// `⌈n/m⌉` independent projection DPP draws, truncated to `n` points.
    RepeatedDpp,
    /// Repeated DPP redrawn until `λ_min(Gʷ) ≥ 1 − δ`.
    RepeatedDppConditioned,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::IidMu,
        Scheme::IidChristoffel,
        Scheme::Volume,
        Scheme::RepeatedDpp,
        Scheme::RepeatedDppConditioned,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::IidMu => "iid-mu",
            Self::IidChristoffel => "iid-christoffel",
            Self::Volume => "volume",
            Self::RepeatedDpp => "repeated-dpp",
            Self::RepeatedDppConditioned => "repeated-dpp-cond",
        }
    }

    pub fn index(&self) -> u64 {
        *self as u64
    }

    /// Least-squares weight used with this scheme for mixture weight `alpha`.
    pub fn weight(&self, alpha: f64) -> Result<WeightFunction> {
        match self {
            Self::IidMu => Ok(WeightFunction::Unit),
            Self::IidChristoffel | Self::Volume => WeightFunction::optimal(alpha),
            Self::RepeatedDpp | Self::RepeatedDppConditioned => Ok(WeightFunction::Christoffel),
        }
    }

    /// Checks the scheme's preconditions on `(m, n)`.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::EmptyDesign);
        }
        if *self == Self::Volume && n < m {
            return Err(Error::Underdetermined { n, m });
        }
        Ok(())
    }

    /// One design of size `n`.
    pub fn draw(
        &self,
        sampler: &DesignSampler,
        n: usize,
        alpha: f64,
        delta: f64,
        rng: &mut RngStream,
    ) -> Result<DesignSample> {
        self.validate(sampler.basis().dim(), n)?;
        let w = self.weight(alpha)?;
        let mut design = match self {
            Self::IidMu | Self::IidChristoffel => sampler.sample_iid(&w, n, rng)?,
            Self::Volume => sampler.sample_volume(&w, n, rng)?,
            Self::RepeatedDpp => sampler.sample_repeated_dpp(n, rng)?,
            Self::RepeatedDppConditioned => sampler.sample_conditioned(
                |r| sampler.sample_repeated_dpp(n, r),
                delta,
                DEFAULT_MAX_ATTEMPTS,
                rng,
            )?,
        };
        design.sampler_id = self.name().to_string();
        Ok(design)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme '{s}'")))
    }
}

/// Basis-specific sampling tables.
#[derive(Debug, Clone)]
pub struct DesignSampler {
    basis: FeatureBasis,
    grid: DensityGrid,
    features: Vec<f64>,
    sq_norms: Vec<f64>,
    components: Vec<GridDensitySampler>,
}

impl DesignSampler {
    pub fn new(basis: FeatureBasis) -> Result<Self> {
        let m = basis.dim();
        let (lo, hi) = basis.effective_support();
        let grid = DensityGrid::refined(
            basis.measure(),
            lo,
            hi,
            &basis.breakpoints(),
            |x| basis.christoffel_density(x),
            DEFAULT_DENSITY_TOL,
        );
        let npts = grid.points().len();
        let mut features = vec![0.0; npts * m];
        for (row, &x) in features.chunks_exact_mut(m).zip(grid.points()) {
            basis.eval_into(x, row);
        }
        let sq_norms = features.chunks_exact(m).map(squared_norm).collect();
        let components = (0..m)
            .map(|i| {
                let values: Vec<f64> = features.chunks_exact(m).map(|row| row[i] * row[i]).collect();
                GridDensitySampler::from_values(&grid, &values, SAMPLING_MASS_TOL)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            basis,
            grid,
            features,
            sq_norms,
            components,
        })
    }

    pub fn basis(&self) -> &FeatureBasis {
        &self.basis
    }

    pub fn grid(&self) -> &DensityGrid {
        &self.grid
    }

    /// One draw from `ν_m = w_m μ`, as the uniform mixture of `φ_i² μ`.
    pub fn sample_christoffel(&self, rng: &mut RngStream) -> f64 {
        let i = rng.index(self.components.len());
        self.components[i].sample(rng)
    }

    /// One draw from `wμ` for a mixture weight: `ν_m` with probability `α`,
    /// `hμ` otherwise.
    pub fn sample_mixture_point(&self, w: &WeightFunction, rng: &mut RngStream) -> Result<f64> {
        match w {
            WeightFunction::Mixture { alpha, h } => {
                if rng.uniform() < *alpha {
                    Ok(self.sample_christoffel(rng))
                } else {
                    Ok(h.sample(self.basis.measure(), rng))
                }
            }
            _ => Err(Error::Domain(
                "sample_mixture_point needs a mixture weight".into(),
            )),
        }
    }

    /// One draw from `wμ`.
    pub fn sample_weighted(&self, w: &WeightFunction, rng: &mut RngStream) -> f64 {
        match w {
            WeightFunction::Unit => self.basis.measure().sample(rng),
            WeightFunction::Christoffel => self.sample_christoffel(rng),
            WeightFunction::Mixture { .. } => self.sample_mixture_point(w, rng).expect("mixture weight"),
        }
    }

    /// `n` i.i.d. draws from `wμ`.
    pub fn sample_iid(&self, w: &WeightFunction, n: usize, rng: &mut RngStream) -> Result<DesignSample> {
        if n == 0 {
            return Err(Error::EmptyDesign);
        }
        let points = (0..n).map(|_| self.sample_weighted(w, rng)).collect();
        let id = match w {
            WeightFunction::Unit => "iid-mu",
            _ => "iid-christoffel",
        };
        DesignSample::new(points, w, &self.basis, id, rng)
    }

    /// Points of one projection DPP draw `(x_1, …, x_m) ~ γ_m` via the chain
    /// rule: `x_1 ~ ν_m`, then `x_k` from the density
    /// `‖φ(x) − P_{W_{k−1}} φ(x)‖² / (m − k + 1)` w.r.t. μ.
    pub fn sample_dpp_points(&self, rng: &mut RngStream) -> Result<Vec<f64>> {
        let m = self.basis.dim();
        let mut state = RotatedBasisState::empty(m);
        let mut residual = self.sq_norms.clone();
        let mut points = Vec::with_capacity(m);
        let mut phi = vec![0.0; m];
        for k in 0..m {
            let step = if k == 0 {
                None
            } else {
                let scale = 1.0 / (m - k) as f64;
                let density: Vec<f64> = residual.iter().map(|r| r * scale).collect();
                Some(GridDensitySampler::from_values(
                    &self.grid,
                    &density,
                    SAMPLING_MASS_TOL,
                )?)
            };
            let mut accepted = None;
            for _ in 0..MAX_DEGENERATE_RETRIES {
                let x = match &step {
                    None => self.sample_christoffel(rng),
                    Some(s) => s.sample(rng),
                };
                self.basis.eval_into(x, &mut phi);
                match state.push_features(&phi, x) {
                    Ok(_) => {
                        accepted = Some(x);
                        break;
                    }
                    Err(Error::DegeneratePoint { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            let x = accepted.ok_or(Error::SamplerFailure {
                attempts: MAX_DEGENERATE_RETRIES,
            })?;
            points.push(x);
            if k + 1 < m {
                let v = state.vector(k);
                for (r, row) in residual.iter_mut().zip(self.features.chunks_exact(m)) {
                    let c = dot(v, row);
                    *r = (*r - c * c).max(0.0);
                }
            }
        }
        Ok(points)
    }

    /// One projection DPP design (`n = m`), weighted by `w_m`.
    pub fn sample_dpp(&self, rng: &mut RngStream) -> Result<DesignSample> {
        let points = self.sample_dpp_points(rng)?;
        let mut d = DesignSample::new(points, &WeightFunction::Christoffel, &self.basis, "dpp", rng)?;
        d.blocks = 1;
        Ok(d)
    }

    /// Generalized volume sampling `γ_n^ν` with `ν = wμ`: one DPP draw plus
    /// `n − m` i.i.d. draws from `ν`, uniformly permuted.
    pub fn sample_volume(&self, w: &WeightFunction, n: usize, rng: &mut RngStream) -> Result<DesignSample> {
        let m = self.basis.dim();
        if n < m {
            return Err(Error::Underdetermined { n, m });
        }
        let mut points = self.sample_dpp_points(rng)?;
        points.extend((m..n).map(|_| self.sample_weighted(w, rng)));
        points.shuffle(rng.inner());
        let mut d = DesignSample::new(points, w, &self.basis, "volume", rng)?;
        d.blocks = 1;
        Ok(d)
    }

    /// `⌈n/m⌉` independent DPP draws concatenated and truncated to `n`.
    pub fn sample_repeated_dpp(&self, n: usize, rng: &mut RngStream) -> Result<DesignSample> {
        if n == 0 {
            return Err(Error::EmptyDesign);
        }
        let m = self.basis.dim();
        let blocks = n.div_ceil(m);
        let mut points = Vec::with_capacity(blocks * m);
        for _ in 0..blocks {
            points.extend(self.sample_dpp_points(rng)?);
        }
        points.truncate(n);
        let mut d = DesignSample::new(
            points,
            &WeightFunction::Christoffel,
            &self.basis,
            "repeated-dpp",
            rng,
        )?;
        d.blocks = blocks;
        Ok(d)
    }

    /// Redraws whole designs from `inner` until `λ_min(Gʷ) ≥ 1 − δ`.
    pub fn sample_conditioned<F>(
        &self,
        mut inner: F,
        delta: f64,
        max_attempts: usize,
        rng: &mut RngStream,
    ) -> Result<DesignSample>
    where
        F: FnMut(&mut RngStream) -> Result<DesignSample>,
    {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!("δ must lie in (0, 1), got {delta}")));
        }
        let mut best = f64::NEG_INFINITY;
        for attempt in 1..=max_attempts {
            let mut design = inner(rng)?;
            let gram = EmpiricalGram::new(&design, &self.basis)?;
            if gram.lambda_min() >= 1.0 - delta {
                design.attempts = attempt;
                return Ok(design);
            }
            best = best.max(gram.lambda_min());
        }
        Err(Error::ConditioningFailure {
            attempts: max_attempts,
            best_lambda_min: best,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pwc(m: usize) -> DesignSampler {
        DesignSampler::new(FeatureBasis::piecewise_constant(m).unwrap()).unwrap()
    }

    fn cells(points: &[f64], m: usize) -> Vec<usize> {
        let mut c: Vec<usize> = points
            .iter()
            .map(|&x| ((x * m as f64).floor() as usize).min(m - 1))
            .collect();
        c.sort_unstable();
        c
    }

    #[test]
    fn dpp_on_piecewise_constant_fills_every_cell() {
        let s = pwc(4);
        let mut rng = RngStream::from_seed(9);
        for _ in 0..200 {
            let d = s.sample_dpp(&mut rng).unwrap();
            assert_eq!(cells(&d.points, 4), vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn dpp_with_one_feature_returns_one_point() {
        let s = DesignSampler::new(FeatureBasis::hermite(1).unwrap()).unwrap();
        let d = s.sample_dpp(&mut RngStream::from_seed(2)).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.weights, vec![1.0]);
    }

    #[test]
    fn volume_rejects_underdetermined() {
        let s = DesignSampler::new(FeatureBasis::legendre(3).unwrap()).unwrap();
        let err = s.sample_volume(&WeightFunction::Unit, 2, &mut RngStream::from_seed(1));
        assert_eq!(err, Err(Error::Underdetermined { n: 2, m: 3 }));
    }

    #[test]
    fn volume_has_n_points_and_matching_weights() {
        let b = FeatureBasis::legendre(3).unwrap();
        let s = DesignSampler::new(b.clone()).unwrap();
        let d = s
            .sample_volume(&WeightFunction::Christoffel, 7, &mut RngStream::from_seed(1))
            .unwrap();
        assert_eq!(d.len(), 7);
        for (x, w) in d.points.iter().zip(&d.weights) {
            assert_eq!(*w, b.christoffel_density(*x));
        }
    }

    #[test]
    fn repeated_dpp_blocks() {
        let s = pwc(4);
        let mut rng = RngStream::from_seed(5);
        let d = s.sample_repeated_dpp(8, &mut rng).unwrap();
        assert_eq!(d.blocks, 2);
        assert_eq!(cells(&d.points[..4], 4), vec![0, 1, 2, 3]);
        assert_eq!(cells(&d.points[4..], 4), vec![0, 1, 2, 3]);
        let d = s.sample_repeated_dpp(5, &mut rng).unwrap();
        assert_eq!((d.len(), d.blocks), (5, 2));
    }

    #[test]
    fn conditioned_accepts_identity_gram_immediately() {
        let s = pwc(4);
        let mut rng = RngStream::from_seed(5);
        for delta in [0.01, 0.5, 0.99] {
            let d = s
                .sample_conditioned(|r| s.sample_dpp(r), delta, 10, &mut rng)
                .unwrap();
            assert_eq!(d.attempts, 1);
        }
    }

    #[test]
    fn conditioned_zero_attempts_fails() {
        let s = pwc(4);
        let err = s
            .sample_conditioned(|r| s.sample_dpp(r), 0.5, 0, &mut RngStream::from_seed(1))
            .unwrap_err();
        assert!(matches!(err, Error::ConditioningFailure { attempts: 0, .. }));
    }

    #[test]
    fn conditioned_rejects_bad_delta() {
        let s = pwc(2);
        assert!(s
            .sample_conditioned(|r| s.sample_dpp(r), 1.0, 5, &mut RngStream::from_seed(1))
            .is_err());
    }

    #[test]
    fn mixture_alpha_one_is_christoffel() {
        let s = DesignSampler::new(FeatureBasis::legendre(4).unwrap()).unwrap();
        let w = WeightFunction::mixture(1.0).unwrap();
        let mut a = RngStream::from_seed(8);
        let mut b = RngStream::from_seed(8);
        for _ in 0..50 {
            // α = 1 consumes one extra uniform for the branch.
            let x = s.sample_mixture_point(&w, &mut a).unwrap();
            b.uniform();
            assert_eq!(x, s.sample_christoffel(&mut b));
        }
    }

    #[test]
    fn mixture_rejects_alpha_zero() {
        assert!(WeightFunction::mixture(0.0).is_err());
        assert!(WeightFunction::mixture(1.5).is_err());
    }

    #[test]
    fn mixture_weight_integrates_to_one() {
        let b = FeatureBasis::hermite(6).unwrap();
        let w = WeightFunction::mixture(0.3).unwrap();
        let rule = b.measure().gauss_quadrature(20).unwrap();
        assert!((rule.integrate(|x| w.eval(&b, x)) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("bogus".parse::<Scheme>().is_err());
    }

    #[test]
    fn designs_regenerate_bit_identically() {
        let s = DesignSampler::new(FeatureBasis::hermite(5).unwrap()).unwrap();
        for scheme in Scheme::ALL {
            let a = scheme
                .draw(&s, 11, 1.0, 0.75, &mut RngStream::new(42, 3))
                .unwrap();
            let b = scheme
                .draw(&s, 11, 1.0, 0.75, &mut RngStream::new(42, 3))
                .unwrap();
            assert_eq!(a, b, "{scheme}");
        }
    }
}

//! Reference probability measures on the real line.
//!
//! A [`ReferenceMeasure`] is either the uniform law on an interval or the
//! standard Gaussian. Besides density evaluation and i.i.d. sampling, each
//! measure provides Gauss quadrature rules ([`QuadratureRule`]) and an
//! *effective support* on which densities relative to the measure are
//! tabulated for inverse-CDF sampling ([`GridDensitySampler`]).

mod grid;
mod quadrature;

pub use grid::{DensityGrid, GridDensitySampler, DEFAULT_DENSITY_TOL, INITIAL_GRID_CELLS};
pub use quadrature::{max_quadrature_order, QuadratureRule, DEFAULT_MAX_QUAD_ORDER};

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A one-dimensional probability measure μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceMeasure {
    /// Uniform probability on `[a, b]`.
    UniformInterval { a: f64, b: f64 },
    /// N(0, 1).
    StandardGaussian,
}

impl ReferenceMeasure {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Domain(format!(
                "uniform interval needs a < b, got [{a}, {b}]"
            )));
        }
        Ok(Self::UniformInterval { a, b })
    }

    pub fn gaussian() -> Self {
        Self::StandardGaussian
    }

    /// Lebesgue density of μ at `x`; zero outside the support.
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Self::UniformInterval { a, b } => {
                if (a..=b).contains(&x) {
                    1.0 / (b - a)
                } else {
                    0.0
                }
            }
            Self::StandardGaussian => INV_SQRT_2PI * (-0.5 * x * x).exp(),
        }
    }

    /// Interval on which densities w.r.t. μ are tabulated, for a basis of
    /// dimension `m`. For the Gaussian this is `[-R, R]` with
    /// `R = max(12, sqrt(4m + 2) + 4)`; the mass beyond `R` is negligible for
    /// every Hermite-weighted density of dimension up to `m`.
    pub fn effective_support(&self, m: usize) -> (f64, f64) {
        match *self {
            Self::UniformInterval { a, b } => (a, b),
            Self::StandardGaussian => {
                let r = (12.0f64).max(((4 * m + 2) as f64).sqrt() + 4.0);
                (-r, r)
            }
        }
    }

    /// One draw from μ.
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match *self {
            Self::UniformInterval { a, b } => a + (b - a) * rng.uniform(),
            Self::StandardGaussian => StandardNormal.sample(rng.inner()),
        }
    }

    /// `n` independent draws from μ.
    pub fn sample_iid(&self, rng: &mut RngStream, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::EmptyDesign);
        }
        Ok((0..n).map(|_| self.sample(rng)).collect())
    }

    /// Gauss rule of order `q` for μ: Gauss–Legendre mapped to `[a, b]`, or
    /// probabilists' Gauss–Hermite. Weights sum to one.
    pub fn gauss_quadrature(&self, q: usize) -> Result<std::sync::Arc<QuadratureRule>> {
        quadrature::gauss_rule(self, q)
    }
}

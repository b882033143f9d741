//! Orthonormal feature maps and the inverse Christoffel density.

use crate::error::{Error, Result};
use crate::measure::ReferenceMeasure;

/// Family of an L²_μ-orthonormal basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisFamily {
    /// `√(2k+1) P_k` on a uniform interval.
    Legendre,
    /// Probabilists' Hermite `He_k / √(k!)` under N(0, 1).
    Hermite,
    /// `√m · 1[cell j]` on a uniform partition into `m` cells.
    PiecewiseConstant,
}

impl BasisFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Legendre => "legendre",
            Self::Hermite => "hermite",
            Self::PiecewiseConstant => "pwc",
        }
    }

    /// Measure the family is orthonormal against by default.
    pub fn default_measure(&self) -> ReferenceMeasure {
        match self {
            Self::Legendre => ReferenceMeasure::UniformInterval { a: -1.0, b: 1.0 },
            Self::Hermite => ReferenceMeasure::StandardGaussian,
            Self::PiecewiseConstant => ReferenceMeasure::UniformInterval { a: 0.0, b: 1.0 },
        }
    }
}

impl std::str::FromStr for BasisFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "legendre" => Ok(Self::Legendre),
            "hermite" => Ok(Self::Hermite),
            "pwc" | "piecewise-constant" => Ok(Self::PiecewiseConstant),
            other => Err(Error::InvalidConfig(format!("unknown basis family '{other}'"))),
        }
    }
}

/// Orthonormal basis `φ_1, …, φ_m` of `V_m` in `L²_μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBasis {
    family: BasisFamily,
    m: usize,
    measure: ReferenceMeasure,
}

impl FeatureBasis {
    pub fn new(family: BasisFamily, m: usize, measure: ReferenceMeasure) -> Result<Self> {
        if m == 0 {
            return Err(Error::Domain("basis dimension must be at least 1".into()));
        }
        let ok = matches!(
            (family, measure),
            (BasisFamily::Legendre, ReferenceMeasure::UniformInterval { .. })
                | (
                    BasisFamily::PiecewiseConstant,
                    ReferenceMeasure::UniformInterval { .. }
                )
                | (BasisFamily::Hermite, ReferenceMeasure::StandardGaussian)
        );
        if !ok {
            return Err(Error::InvalidConfig(format!(
                "{} basis is not orthonormal for {measure:?}",
                family.name()
            )));
        }
        Ok(Self { family, m, measure })
    }

    /// Basis of dimension `m` on the family's default measure.
    pub fn with_default_measure(family: BasisFamily, m: usize) -> Result<Self> {
        Self::new(family, m, family.default_measure())
    }

    pub fn legendre(m: usize) -> Result<Self> {
        Self::with_default_measure(BasisFamily::Legendre, m)
    }

    pub fn hermite(m: usize) -> Result<Self> {
        Self::with_default_measure(BasisFamily::Hermite, m)
    }

    pub fn piecewise_constant(m: usize) -> Result<Self> {
        Self::with_default_measure(BasisFamily::PiecewiseConstant, m)
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn measure(&self) -> &ReferenceMeasure {
        &self.measure
    }

    pub fn effective_support(&self) -> (f64, f64) {
        self.measure.effective_support(self.m)
    }

    /// Interior discontinuities of the features (cell boundaries for the
    /// piecewise-constant family).
    pub fn breakpoints(&self) -> Vec<f64> {
        match (self.family, self.measure) {
            (BasisFamily::PiecewiseConstant, ReferenceMeasure::UniformInterval { a, b }) => (1..self.m)
                .map(|j| a + (b - a) * j as f64 / self.m as f64)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// `φ(x)`.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.eval_into(x, &mut out);
        out
    }

    /// Writes `φ(x)` into `out` (length `m`).
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.m);
        match (self.family, self.measure) {
            (BasisFamily::Legendre, ReferenceMeasure::UniformInterval { a, b }) => {
                let t = (2.0 * x - a - b) / (b - a);
                legendre_normalized(t, out);
            }
            (BasisFamily::Hermite, _) => hermite_normalized(x, out),
            (BasisFamily::PiecewiseConstant, ReferenceMeasure::UniformInterval { a, b }) => {
                out.fill(0.0);
                if let Some(j) = self.cell_of(x, a, b) {
                    out[j] = (self.m as f64).sqrt();
                }
            }
            _ => unreachable!("family/measure pairing checked at construction"),
        }
    }

    // Half-open cells [(j−1)/m, j/m), last cell closed.
    fn cell_of(&self, x: f64, a: f64, b: f64) -> Option<usize> {
        if !(a..=b).contains(&x) {
            return None;
        }
        let j = ((x - a) / (b - a) * self.m as f64).floor() as usize;
        Some(j.min(self.m - 1))
    }

    /// Inverse Christoffel density `w_m(x) = ‖φ(x)‖² / m`.
    pub fn christoffel_density(&self, x: f64) -> f64 {
        let phi = self.eval(x);
        squared_norm(&phi) / self.m as f64
    }
}

/// `φ_k = √(2k+1) P_k(t)` for `k < out.len()`.
fn legendre_normalized(t: f64, out: &mut [f64]) {
    let (mut p_prev, mut p) = (0.0, 1.0);
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = ((2 * k + 1) as f64).sqrt() * p;
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * t * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
}

/// Normalized recurrence `φ_{k+1} = (x φ_k − √k φ_{k−1}) / √(k+1)`, which
/// equals `He_k / √(k!)` without ever forming a factorial.
fn hermite_normalized(x: f64, out: &mut [f64]) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = cur;
        let kf = k as f64;
        let next = (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt();
        prev = cur;
        cur = next;
    }
}

pub(crate) fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal frame `v_1, …, v_k` of `W_k = span{φ(x_1), …, φ(x_k)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedBasisState {
    m: usize,
    frame: Vec<f64>,
}

impl RotatedBasisState {
    pub fn empty(m: usize) -> Self {
        Self {
            m,
            frame: Vec::with_capacity(m * m),
        }
    }

    /// Number of conditioned points.
    pub fn len(&self) -> usize {
        self.frame.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.frame.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.frame[i * self.m..(i + 1) * self.m]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.frame.chunks_exact(self.m)
    }

    /// Rejection threshold on `‖φ(x) − P_W φ(x)‖²`.
    pub fn degeneracy_threshold(&self) -> f64 {
        1e-12 * self.m as f64
    }

    /// `‖φ − P_W φ‖²` for a precomputed feature vector.
    pub fn residual_of(&self, phi: &[f64]) -> f64 {
        let proj: f64 = self.vectors().map(|v| dot(v, phi).powi(2)).sum();
        (squared_norm(phi) - proj).max(0.0)
    }

    /// `‖φ(x) − P_{W_k} φ(x)‖²`.
    pub fn residual_feature_norm(&self, basis: &FeatureBasis, x: f64) -> f64 {
        self.residual_of(&basis.eval(x))
    }

    /// Appends the normalized residual of `φ(x_new)`.
    pub fn extend(&self, basis: &FeatureBasis, x_new: f64) -> Result<Self> {
        let mut next = self.clone();
        next.push_features(&basis.eval(x_new), x_new)?;
        Ok(next)
    }

    /// In-place variant of [`RotatedBasisState::extend`] taking `φ(x)`
    /// directly. Returns the new frame vector. Gram–Schmidt is applied twice.
    pub fn push_features(&mut self, phi: &[f64], x: f64) -> Result<&[f64]> {
        if phi.len() != self.m {
            return Err(Error::LengthMismatch {
                expected: self.m,
                got: phi.len(),
            });
        }
        let residual = self.residual_of(phi);
        if self.len() >= self.m || residual.is_nan() || residual < self.degeneracy_threshold() {
            return Err(Error::DegeneratePoint { x, residual });
        }
        let mut r = phi.to_vec();
        for _ in 0..2 {
            for v in self.frame.chunks_exact(self.m) {
                let c = dot(v, &r);
                r.iter_mut().zip(v).for_each(|(ri, vi)| *ri -= c * vi);
            }
        }
        let norm = squared_norm(&r).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::DegeneratePoint { x, residual });
        }
        self.frame.extend(r.iter().map(|ri| ri / norm));
        let k = self.len() - 1;
        Ok(self.vector(k))
    }
}

//! Empirical Gram matrices, weighted least-squares fits and exact-norm
//! error evaluation.

use nalgebra::{DMatrix, DVector};

use crate::basis::FeatureBasis;
use crate::error::{Error, Result};
use crate::measure::{max_quadrature_order, QuadratureRule};
use crate::sampler::DesignSample;

/// Designs whose Gram matrix has `λ_min` at or below this are unusable.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

/// Relative change between successive quadrature orders accepted as converged.
pub const QUADRATURE_REL_TOL: f64 = 1e-10;

/// `Gʷ = (1/n) Σ w(xᵢ)⁻¹ φ(xᵢ) φ(xᵢ)ᵀ` with its extreme eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGram {
    matrix: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl EmpiricalGram {
    pub fn new(design: &DesignSample, basis: &FeatureBasis) -> Result<Self> {
        Self::from_points(&design.points, &design.weights, basis)
    }

    pub fn from_points(points: &[f64], weights: &[f64], basis: &FeatureBasis) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyDesign);
        }
        if points.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                got: weights.len(),
            });
        }
        let m = basis.dim();
        let n = points.len() as f64;
        let mut matrix = DMatrix::<f64>::zeros(m, m);
        let mut phi = vec![0.0; m];
        for (&x, &w) in points.iter().zip(weights) {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Numeric(format!("weight w({x}) = {w} is not positive")));
            }
            basis.eval_into(x, &mut phi);
            let s = 1.0 / (w * n);
            for i in 0..m {
                let a = s * phi[i];
                for j in i..m {
                    matrix[(i, j)] += a * phi[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                matrix[(i, j)] = matrix[(j, i)];
            }
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature values in Gram matrix".into()));
        }
        let mut eigenvalues: Vec<f64> = matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        Ok(Self { matrix, eigenvalues })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    /// All eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// `tr((Gʷ)⁻¹)`; infinite for singular matrices.
    pub fn inverse_trace(&self) -> f64 {
        if self.lambda_min() <= 0.0 {
            return f64::INFINITY;
        }
        self.eigenvalues.iter().map(|l| 1.0 / l).sum()
    }

    /// `‖Gʷ − I‖_max`.
    pub fn identity_defect(&self) -> f64 {
        let m = self.matrix.nrows();
        (0..m)
            .flat_map(|i| (0..m).map(move |j| (i, j)))
            .map(|(i, j)| (self.matrix[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }
}

/// Coefficients of the empirical projection `P̂ f = φᵀ c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LsqFit {
    pub coefficients: Vec<f64>,
    pub lambda_min: f64,
    pub n: usize,
    pub m: usize,
    pub sampler_id: String,
    pub attempts: usize,
}

impl LsqFit {
    pub fn eval(&self, basis: &FeatureBasis, x: f64) -> f64 {
        crate::basis::dot(&basis.eval(x), &self.coefficients)
    }
}

/// Minimizes `(1/n) Σ w(xᵢ)⁻¹ (f(xᵢ) − φ(xᵢ)ᵀc)²` by Householder QR of the
/// row-scaled design matrix.
pub fn weighted_lsq_fit(f_values: &[f64], design: &DesignSample, basis: &FeatureBasis) -> Result<LsqFit> {
    let n = design.len();
    if f_values.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: f_values.len(),
        });
    }
    let gram = EmpiricalGram::new(design, basis)?;
    let lambda_min = gram.lambda_min();
    if lambda_min.is_nan() || lambda_min <= SINGULAR_THRESHOLD {
        return Err(Error::SingularDesign { lambda_min });
    }
    let m = basis.dim();
    let mut a = DMatrix::<f64>::zeros(n, m);
    let mut b = DVector::<f64>::zeros(n);
    let mut phi = vec![0.0; m];
    for (i, (&x, &w)) in design.points.iter().zip(&design.weights).enumerate() {
        let s = w.sqrt().recip();
        basis.eval_into(x, &mut phi);
        for j in 0..m {
            a[(i, j)] = s * phi[j];
        }
        b[i] = s * f_values[i];
    }
    let qr = a.qr();
    let qtb = qr.q().transpose() * &b;
    let coefficients = qr
        .r()
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Numeric("triangular factor is singular".into()))?;
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("non-finite least-squares coefficients".into()));
    }
    Ok(LsqFit {
        coefficients: coefficients.iter().copied().collect(),
        lambda_min,
        n,
        m,
        sampler_id: design.sampler_id.clone(),
        attempts: design.attempts,
    })
}

/// `‖f‖_n = ((1/n) Σ w(xᵢ)⁻¹ f(xᵢ)²)^{1/2}`.
pub fn empirical_seminorm(f_values: &[f64], design: &DesignSample) -> Result<f64> {
    if f_values.len() != design.len() {
        return Err(Error::LengthMismatch {
            expected: design.len(),
            got: f_values.len(),
        });
    }
    if design.is_empty() {
        return Err(Error::EmptyDesign);
    }
    let s: f64 = f_values.iter().zip(&design.weights).map(|(f, w)| f * f / w).sum();
    Ok((s / design.len() as f64).sqrt())
}

/// Coefficient-wise mean of several fits.
pub fn averaged_estimator(fits: &[LsqFit]) -> Result<Vec<f64>> {
    let first = fits.first().ok_or(Error::EmptyAggregate)?;
    let m = first.coefficients.len();
    let mut mean = vec![0.0; m];
    for fit in fits {
        if fit.coefficients.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                got: fit.coefficients.len(),
            });
        }
        mean.iter_mut().zip(&fit.coefficients).for_each(|(a, c)| *a += c);
    }
    let r = fits.len() as f64;
    mean.iter_mut().for_each(|a| *a /= r);
    Ok(mean)
}

/// Starting order of the adaptive quadrature for dimension `m`.
pub fn default_quadrature_order(m: usize) -> usize {
    64.max(2 * m)
}

/// Runs `eval` on Gauss rules of doubling order, starting at `start`, until
/// two successive results agree to `QUADRATURE_REL_TOL` relative to `scale`.
fn doubling<T, E, S>(basis: &FeatureBasis, start: usize, eval: E, change: S) -> Result<T>
where
    E: Fn(&QuadratureRule) -> T,
    S: Fn(&T, &T) -> f64,
{
    let cap = max_quadrature_order();
    let mut q = start.max(basis.dim() + 1);
    if q > cap {
        return Err(Error::UnsupportedOrder { order: q, max: cap });
    }
    let mut current = eval(&*basis.measure().gauss_quadrature(q)?);
    loop {
        let next_q = 2 * q;
        if next_q > cap {
            return Err(Error::Accuracy {
                order: q,
                change: f64::NAN,
            });
        }
        let next = eval(&*basis.measure().gauss_quadrature(next_q)?);
        let delta = change(&current, &next);
        if delta <= QUADRATURE_REL_TOL {
            return Ok(next);
        }
        if next_q * 2 > cap {
            return Err(Error::Accuracy {
                order: next_q,
                change: delta,
            });
        }
        current = next;
        q = next_q;
    }
}

fn project(f: &dyn Fn(f64) -> f64, basis: &FeatureBasis, rule: &QuadratureRule) -> Vec<f64> {
    let m = basis.dim();
    let mut a = vec![0.0; m];
    let mut phi = vec![0.0; m];
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let fx = w * f(x);
        basis.eval_into(x, &mut phi);
        a.iter_mut().zip(&phi).for_each(|(ai, p)| *ai += fx * p);
    }
    a
}

fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Coefficients `aᵢ = ∫ f φᵢ dμ` of the orthogonal projection onto `V_m`,
/// starting from `quad` and doubling the order until converged.
pub fn best_approximation<F: Fn(f64) -> f64>(
    f: F,
    basis: &FeatureBasis,
    quad: &QuadratureRule,
) -> Result<Vec<f64>> {
    doubling(
        basis,
        quad.order(),
        |rule| project(&f, basis, rule),
        |a, b| {
            let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            let scale = vec_norm(b);
            if scale == 0.0 {
                vec_norm(&diff)
            } else {
                vec_norm(&diff) / scale
            }
        },
    )
}

/// `‖f − Σ aᵢ φᵢ‖` in `L²_μ`, with the same adaptive order check.
pub fn l2_error<F: Fn(f64) -> f64>(
    f: F,
    coefficients: &[f64],
    basis: &FeatureBasis,
    quad: &QuadratureRule,
) -> Result<f64> {
    if coefficients.len() != basis.dim() {
        return Err(Error::LengthMismatch {
            expected: basis.dim(),
            got: coefficients.len(),
        });
    }
    let m = basis.dim();
    // (‖f − g‖², ‖f‖²) under one rule
    let eval = |rule: &QuadratureRule| {
        let mut phi = vec![0.0; m];
        let (mut err, mut norm) = (0.0, 0.0);
        for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
            basis.eval_into(x, &mut phi);
            let fx = f(x);
            let r = fx - crate::basis::dot(&phi, coefficients);
            err += w * r * r;
            norm += w * fx * fx;
        }
        (err, norm)
    };
    let (err2, _) = doubling(basis, quad.order(), eval, |a, b| {
        let scale = b.0.max(b.1);
        if scale == 0.0 {
            0.0
        } else {
            (a.0 - b.0).abs() / scale
        }
    })?;
    Ok(err2.max(0.0).sqrt())
}

/// `‖f‖` in `L²_μ`.
pub fn l2_norm<F: Fn(f64) -> f64>(f: F, basis: &FeatureBasis, quad: &QuadratureRule) -> Result<f64> {
    l2_error(f, &vec![0.0; basis.dim()], basis, quad)
}

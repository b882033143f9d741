use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::ReferenceMeasure;
use crate::error::{Error, Result};

/// Default cap on Gauss rule orders; overridden by `DPPLS_MAX_QUAD_ORDER`.
pub const DEFAULT_MAX_QUAD_ORDER: usize = 2048;

/// Largest quadrature order the library will build.
pub fn max_quadrature_order() -> usize {
    std::env::var("DPPLS_MAX_QUAD_ORDER")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(DEFAULT_MAX_QUAD_ORDER)
}

/// A probability quadrature rule: `∫ f dμ ≈ Σ wᵢ f(xᵢ)` with `Σ wᵢ = 1`,
/// exact for polynomials of degree `≤ 2q − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

type CacheKey = (u8, u64, u64, usize);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<QuadratureRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub(super) fn gauss_rule(measure: &ReferenceMeasure, q: usize) -> Result<Arc<QuadratureRule>> {
    let max = max_quadrature_order();
    if q == 0 || q > max {
        return Err(Error::UnsupportedOrder { order: q, max });
    }
    let key = match *measure {
        ReferenceMeasure::UniformInterval { a, b } => (0, a.to_bits(), b.to_bits(), q),
        ReferenceMeasure::StandardGaussian => (1, 0, 0, q),
    };
    if let Some(rule) = cache().lock().unwrap().get(&key) {
        return Ok(rule.clone());
    }
    let rule = Arc::new(build(measure, q));
    cache().lock().unwrap().insert(key, rule.clone());
    Ok(rule)
}

// Nodes: eigenvalues of the Jacobi matrix (Golub–Welsch), polished by
// Newton on the degree-q orthonormal polynomial. Weights: reciprocal
// Christoffel sums 1 / Σ_{k<q} p_k(x)², evaluated with a rescaled recurrence
// so that large Hermite nodes neither overflow nor lose relative accuracy.
fn build(measure: &ReferenceMeasure, q: usize) -> QuadratureRule {
    let family = match measure {
        ReferenceMeasure::UniformInterval { .. } => Family::Legendre,
        ReferenceMeasure::StandardGaussian => Family::Hermite,
    };
    let off_diag: Vec<f64> = (1..q)
        .map(|k| {
            let kf = k as f64;
            match family {
                Family::Legendre => kf / (4.0 * kf * kf - 1.0).sqrt(),
                Family::Hermite => kf.sqrt(),
            }
        })
        .collect();
    let mut nodes = tridiagonal_eigenvalues(vec![0.0; q], &off_diag);
    nodes.sort_by(f64::total_cmp);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let step = recurrence(family, *x, q).newton_step;
            if step.is_finite() {
                *x -= step;
            }
        }
    }
    // Both families are symmetric about the origin.
    for i in 0..q / 2 {
        let j = q - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
    }
    if q % 2 == 1 {
        nodes[q / 2] = 0.0;
    }
    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| (-recurrence(family, x, q).log_christoffel_sum).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    if let ReferenceMeasure::UniformInterval { a, b } = *measure {
        for x in nodes.iter_mut() {
            *x = 0.5 * (a + b) + 0.5 * (b - a) * *x;
        }
    }
    QuadratureRule {
        nodes,
        weights,
        order: q,
    }
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `diag` and
/// sub-diagonal `off` by implicit QL with Wilkinson shifts.
fn tridiagonal_eigenvalues(mut d: Vec<f64>, off: &[f64]) -> Vec<f64> {
    let n = d.len();
    if n == 1 {
        return d;
    }
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(off);
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l || iterations == 64 {
                break;
            }
            iterations += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d
}

#[derive(Clone, Copy)]
enum Family {
    Legendre,
    Hermite,
}

struct RecurrenceValues {
    /// ln Σ_{k<q} p_k(x)² for the orthonormal polynomials.
    log_christoffel_sum: f64,
    /// p_q(x) / p_q'(x).
    newton_step: f64,
}

fn recurrence(family: Family, x: f64, q: usize) -> RecurrenceValues {
    const BIG: f64 = 1e100;
    let mut log_scale = 0.0;
    let mut sum = 0.0;
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..q {
        let kf = k as f64;
        let next = match family {
            Family::Legendre => {
                sum += (2.0 * kf + 1.0) * cur * cur;
                ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0)
            }
            Family::Hermite => {
                sum += cur * cur;
                (x * cur - kf.sqrt() * prev) / (kf + 1.0).sqrt()
            }
        };
        prev = cur;
        cur = next;
        if cur.abs() > BIG {
            prev /= BIG;
            cur /= BIG;
            sum /= BIG * BIG;
            log_scale += BIG.ln();
        }
    }
    let qf = q as f64;
    let newton_step = match family {
        // P_q' = q (x P_q − P_{q−1}) / (x² − 1)
        Family::Legendre => cur * (x * x - 1.0) / (qf * (x * cur - prev)),
        // φ_q' = √q φ_{q−1}
        Family::Hermite => cur / (qf.sqrt() * prev),
    };
    RecurrenceValues {
        log_christoffel_sum: sum.ln() + 2.0 * log_scale,
        newton_step,
    }
}

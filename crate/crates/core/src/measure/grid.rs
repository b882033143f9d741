//! Inverse-CDF sampling of densities relative to a [`ReferenceMeasure`].
//!
//! A [`DensityGrid`] partitions the effective support into cells and carries
//! four Gauss–Lobatto points per cell (exact for degree-5 integrands). Cell
//! masses come from that rule; inside a cell the cumulative is a monotone
//! (Fritsch–Carlson limited) cubic Hermite interpolant that matches the cell
//! mass and the endpoint densities, and draws invert it by safeguarded Newton.

use super::ReferenceMeasure;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Number of uniform cells before adaptive refinement.
pub const INITIAL_GRID_CELLS: usize = 2048;

/// Default mass tolerance when certifying that a function is a density.
pub const DEFAULT_DENSITY_TOL: f64 = 1e-8;

const MAX_REFINE_DEPTH: u32 = 12;

const LOBATTO_NODES: [f64; 4] = [
    0.0,
    0.276_393_202_250_021,   // (1 − 1/√5)/2
    0.723_606_797_749_978_9, // (1 + 1/√5)/2
    1.0,
];
const LOBATTO_WEIGHTS: [f64; 4] = [1.0 / 12.0, 5.0 / 12.0, 5.0 / 12.0, 1.0 / 12.0];

/// Cell partition of an interval with per-cell Lobatto points.
///
/// Point `4j + t` is the `t`-th Lobatto point of cell `j`. The right endpoint
/// of each cell is evaluated one ulp inside the cell so half-open
/// piecewise-constant densities are tabulated with their in-cell value.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    edges: Vec<f64>,
    points: Vec<f64>,
    weights: Vec<f64>,
    rho: Vec<f64>,
}

impl DensityGrid {
    /// `INITIAL_GRID_CELLS` uniform cells on `[lo, hi]`, split additionally at
    /// each interior breakpoint.
    pub fn uniform(measure: &ReferenceMeasure, lo: f64, hi: f64, breakpoints: &[f64]) -> Self {
        Self::from_edges(measure, initial_edges(lo, hi, breakpoints))
    }

    /// Like [`DensityGrid::uniform`], then bisects every cell whose Lobatto
    /// mass estimate of `g` changes by more than `tol / INITIAL_GRID_CELLS`
    /// when the cell is halved.
    pub fn refined<G: Fn(f64) -> f64>(
        measure: &ReferenceMeasure,
        lo: f64,
        hi: f64,
        breakpoints: &[f64],
        g: G,
        tol: f64,
    ) -> Self {
        let coarse = initial_edges(lo, hi, breakpoints);
        let cell_tol = tol / INITIAL_GRID_CELLS as f64;
        let mass = |l: f64, r: f64| lobatto_mass(measure, &g, l, r);
        let mut edges = vec![coarse[0]];
        for w in coarse.windows(2) {
            let whole = mass(w[0], w[1]);
            refine_cell(&mass, w[0], w[1], whole, 0, cell_tol, &mut edges);
        }
        Self::from_edges(measure, edges)
    }

    /// Grid from an explicit strictly increasing edge list.
    pub fn from_edges(measure: &ReferenceMeasure, edges: Vec<f64>) -> Self {
        assert!(edges.len() >= 2, "grid needs at least one cell");
        assert!(edges.windows(2).all(|w| w[0] < w[1]), "grid edges must increase");
        let cells = edges.len() - 1;
        let mut points = Vec::with_capacity(4 * cells);
        let mut weights = Vec::with_capacity(4 * cells);
        let mut rho = Vec::with_capacity(4 * cells);
        for w in edges.windows(2) {
            let (l, r) = (w[0], w[1]);
            let h = r - l;
            for t in 0..4 {
                let x = match t {
                    0 => l,
                    3 => r.next_down().max(l),
                    _ => l + LOBATTO_NODES[t] * h,
                };
                let d = measure.density(x);
                points.push(x);
                rho.push(d);
                weights.push(LOBATTO_WEIGHTS[t] * h * d);
            }
        }
        Self {
            edges,
            points,
            weights,
            rho,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// All tabulation points, four per cell.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn tabulate<G: Fn(f64) -> f64>(&self, g: G) -> Vec<f64> {
        self.points.iter().map(|&x| g(x)).collect()
    }

    /// `∫ g dμ` over the whole grid for tabulated values of `g`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

fn initial_edges(lo: f64, hi: f64, breakpoints: &[f64]) -> Vec<f64> {
    assert!(lo < hi, "empty support [{lo}, {hi}]");
    let n = INITIAL_GRID_CELLS;
    let mut edges: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    edges[n] = hi;
    edges.extend(breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
    edges.sort_by(f64::total_cmp);
    let min_gap = (hi - lo) * 1e-12;
    edges.dedup_by(|b, a| (*b - *a).abs() <= min_gap);
    edges
}

fn lobatto_mass<G: Fn(f64) -> f64>(measure: &ReferenceMeasure, g: &G, l: f64, r: f64) -> f64 {
    let h = r - l;
    (0..4)
        .map(|t| {
            let x = l + LOBATTO_NODES[t] * h;
            LOBATTO_WEIGHTS[t] * h * measure.density(x) * g(x)
        })
        .sum()
}

fn refine_cell<M: Fn(f64, f64) -> f64>(
    mass: &M,
    l: f64,
    r: f64,
    whole: f64,
    depth: u32,
    cell_tol: f64,
    edges: &mut Vec<f64>,
) {
    let mid = 0.5 * (l + r);
    let left = mass(l, mid);
    let right = mass(mid, r);
    if depth < MAX_REFINE_DEPTH && (left + right - whole).abs() > cell_tol {
        refine_cell(mass, l, mid, left, depth + 1, cell_tol, edges);
        refine_cell(mass, mid, r, right, depth + 1, cell_tol, edges);
    } else {
        edges.push(r);
    }
}

/// Sampler for the probability `g·μ` built from a tabulated density.
#[derive(Debug, Clone)]
pub struct GridDensitySampler {
    edges: Vec<f64>,
    cumulative: Vec<f64>,
    left_density: Vec<f64>,
    right_density: Vec<f64>,
    mass: f64,
}

impl GridDensitySampler {
    /// Tabulates `g` on an adaptive grid over the measure's default effective
    /// support and certifies `|∫ g dμ − 1| ≤ tol`.
    pub fn build<G: Fn(f64) -> f64>(g: G, measure: &ReferenceMeasure, tol: f64) -> Result<Self> {
        Self::build_on(g, measure, measure.effective_support(1), tol)
    }

    pub fn build_on<G: Fn(f64) -> f64>(
        g: G,
        measure: &ReferenceMeasure,
        support: (f64, f64),
        tol: f64,
    ) -> Result<Self> {
        let grid = DensityGrid::refined(measure, support.0, support.1, &[], &g, tol);
        let values = grid.tabulate(&g);
        Self::from_values(&grid, &values, tol)
    }

    /// Builds a sampler from values of `g` at `grid.points()`.
    pub fn from_values(grid: &DensityGrid, values: &[f64], tol: f64) -> Result<Self> {
        if values.len() != grid.points.len() {
            return Err(Error::LengthMismatch {
                expected: grid.points.len(),
                got: values.len(),
            });
        }
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| v.is_nan() || **v < 0.0) {
            if v.is_nan() {
                return Err(Error::Numeric(format!("NaN density at x = {}", grid.points[i])));
            }
            return Err(Error::NegativeDensity {
                x: grid.points[i],
                value: v,
            });
        }
        let cells = grid.cell_count();
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for j in 0..cells {
            let m: f64 = (0..4).map(|t| grid.weights[4 * j + t] * values[4 * j + t]).sum();
            acc += m;
            cumulative.push(acc);
        }
        let mass = acc;
        if !mass.is_finite() || (mass - 1.0).abs() > tol {
            return Err(Error::NotADensity { mass, tol });
        }
        for c in cumulative.iter_mut() {
            *c /= mass;
        }
        cumulative[cells] = 1.0;
        let left_density = (0..cells)
            .map(|j| grid.rho[4 * j] * values[4 * j] / mass)
            .collect();
        let right_density = (0..cells)
            .map(|j| grid.rho[4 * j + 3] * values[4 * j + 3] / mass)
            .collect();
        Ok(Self {
            edges: grid.edges.clone(),
            cumulative,
            left_density,
            right_density,
            mass,
        })
    }

    /// Mass of the tabulated density before normalization.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.quantile(rng.uniform())
    }

    /// Inverse of the interpolated cumulative at `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let cells = self.edges.len() - 1;
        let u = u.clamp(0.0, 1.0);
        let j = self
            .cumulative
            .partition_point(|&c| c <= u)
            .saturating_sub(1)
            .min(cells - 1);
        let (alpha, beta, mass) = self.cell_shape(j);
        if mass <= 0.0 {
            return self.edges[j];
        }
        let y = ((u - self.cumulative[j]) / mass).clamp(0.0, 1.0);
        let s = invert_cubic(alpha, beta, y);
        let (l, r) = (self.edges[j], self.edges[j + 1]);
        (l + s * (r - l)).clamp(l, r.next_down().max(l))
    }

    /// Interpolated cumulative distribution at `x`.
    pub fn cdf(&self, x: f64) -> f64 {
        let cells = self.edges.len() - 1;
        if x <= self.edges[0] {
            return 0.0;
        }
        if x >= self.edges[cells] {
            return 1.0;
        }
        let j = self.edges.partition_point(|&e| e <= x) - 1;
        let (alpha, beta, mass) = self.cell_shape(j);
        let s = (x - self.edges[j]) / (self.edges[j + 1] - self.edges[j]);
        self.cumulative[j] + mass * cubic(alpha, beta, s)
    }

    fn cell_shape(&self, j: usize) -> (f64, f64, f64) {
        let mass = self.cumulative[j + 1] - self.cumulative[j];
        if mass <= 0.0 {
            return (1.0, 1.0, 0.0);
        }
        let h = self.edges[j + 1] - self.edges[j];
        let mut alpha = h * self.left_density[j] / mass;
        let mut beta = h * self.right_density[j] / mass;
        let norm = alpha.hypot(beta);
        if norm > 3.0 {
            alpha *= 3.0 / norm;
            beta *= 3.0 / norm;
        }
        (alpha, beta, mass)
    }
}

// Normalized cubic Hermite with H(0) = 0, H(1) = 1, H'(0) = α, H'(1) = β.
fn cubic(alpha: f64, beta: f64, s: f64) -> f64 {
    s * (alpha + s * ((3.0 - 2.0 * alpha - beta) + s * (alpha + beta - 2.0)))
}

fn cubic_slope(alpha: f64, beta: f64, s: f64) -> f64 {
    alpha + s * (2.0 * (3.0 - 2.0 * alpha - beta) + 3.0 * s * (alpha + beta - 2.0))
}

fn invert_cubic(alpha: f64, beta: f64, y: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut s = y;
    for _ in 0..100 {
        let f = cubic(alpha, beta, s) - y;
        if f.abs() <= 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let d = cubic_slope(alpha, beta, s);
        let newton = s - f / d;
        s = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-16 {
            break;
        }
    }
    s
}

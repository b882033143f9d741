#![allow(dead_code)]

/// Orthonormal Legendre features on U(−1, 1) from explicit polynomials.
pub fn legendre(m: usize, x: f64) -> Vec<f64> {
    let p = [
        1.0,
        x,
        (3.0 * x * x - 1.0) / 2.0,
        (5.0 * x.powi(3) - 3.0 * x) / 2.0,
        (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0,
        (63.0 * x.powi(5) - 70.0 * x.powi(3) + 15.0 * x) / 8.0,
    ];
    assert!(m <= p.len());
    (0..m).map(|k| ((2 * k + 1) as f64).sqrt() * p[k]).collect()
}

pub fn christoffel(m: usize, x: f64) -> f64 {
    legendre(m, x).iter().map(|v| v * v).sum::<f64>() / m as f64
}

/// CDF of `g(x) dx / 2` on [−1, 1] by composite Simpson on a fine mesh,
/// returned as (mesh, cumulative) for linear interpolation.
pub struct MeshCdf {
    xs: Vec<f64>,
    cum: Vec<f64>,
}

impl MeshCdf {
    pub fn new(g: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Self {
        let h = (hi - lo) / cells as f64;
        let mut xs = vec![lo];
        let mut cum = vec![0.0];
        for i in 0..cells {
            let a = lo + i as f64 * h;
            let b = a + h;
            let s = h / 6.0 * (g(a) + 4.0 * g(0.5 * (a + b)) + g(b));
            xs.push(b);
            cum.push(cum[i] + s);
        }
        let total = *cum.last().unwrap();
        cum.iter_mut().for_each(|c| *c /= total);
        Self { xs, cum }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= *self.xs.last().unwrap() {
            return 1.0;
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.cum[i] + t * (self.cum[i + 1] - self.cum[i])
    }
}

/// Kolmogorov–Smirnov distance of a sample against a CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at level 0.1%.
pub fn ks_critical_001(n: usize) -> f64 {
    1.949 / (n as f64).sqrt()
}

/// Two-sample KS distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

mod common;

use common::*;
use dppls_core::lsq::{self, EmpiricalGram};
use dppls_core::{DesignSampler, FeatureBasis, RngStream, WeightFunction};

fn legendre_sampler(m: usize) -> DesignSampler {
    DesignSampler::new(FeatureBasis::legendre(m).unwrap()).unwrap()
}

#[test]
fn christoffel_draws_follow_nu_m() {
    let m = 5;
    let s = legendre_sampler(m);
    let mut rng = RngStream::new(101, 0);
    let xs: Vec<f64> = (0..10_000).map(|_| s.sample_christoffel(&mut rng)).collect();
    let oracle = MeshCdf::new(|x| christoffel(m, x), -1.0, 1.0, 20_000);
    let d = ks_statistic(&xs, |x| oracle.cdf(x));
    assert!(d < ks_critical_001(xs.len()), "KS {d}");
}

#[test]
fn every_dpp_coordinate_follows_nu_m() {
    for m in [2, 3, 5] {
        let s = legendre_sampler(m);
        let oracle = MeshCdf::new(|x| christoffel(m, x), -1.0, 1.0, 20_000);
        let mut rng = RngStream::new(202, m as u64);
        let draws: Vec<Vec<f64>> = (0..4000)
            .map(|_| s.sample_dpp_points(&mut rng).unwrap())
            .collect();
        for k in 0..m {
            let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
            let d = ks_statistic(&col, |x| oracle.cdf(x));
            assert!(d < ks_critical_001(col.len()), "m = {m}, coordinate {k}: KS {d}");
        }
    }
}

/// Cell probability of the m = 2 Legendre DPP, density 3(x − y)²/2 on μ ⊗ μ.
fn pair_mass(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let i2 = |lo: f64, hi: f64| (hi.powi(3) - lo.powi(3)) / 3.0;
    let i1 = |lo: f64, hi: f64| (hi * hi - lo * lo) / 2.0;
    0.375 * (i2(a, b) * (d - c) + i2(c, d) * (b - a) - 2.0 * i1(a, b) * i1(c, d))
}

#[test]
fn dpp_pair_law_chi_square() {
    let s = legendre_sampler(2);
    let mut rng = RngStream::new(303, 0);
    let bins = 10;
    let reps = 50_000;
    let mut counts = vec![0usize; bins * bins];
    let cell = |x: f64| (((x + 1.0) / 2.0 * bins as f64) as usize).min(bins - 1);
    for _ in 0..reps {
        let p = s.sample_dpp_points(&mut rng).unwrap();
        counts[cell(p[0]) * bins + cell(p[1])] += 1;
    }
    let edge = |i: usize| -1.0 + 2.0 * i as f64 / bins as f64;
    let mut chi2 = 0.0;
    let mut total = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let p = pair_mass(edge(i), edge(i + 1), edge(j), edge(j + 1));
            total += p;
            let e = p * reps as f64;
            chi2 += (counts[i * bins + j] as f64 - e).powi(2) / e;
        }
    }
    assert!((total - 1.0).abs() < 1e-12);
    // 99 degrees of freedom, 0.1% upper quantile.
    assert!(chi2 < 148.23, "chi2 {chi2}");
}

#[test]
fn volume_coordinates_are_exchangeable() {
    let m = 3;
    let n = 7;
    let alpha = 0.5;
    let s = legendre_sampler(m);
    let w = WeightFunction::mixture(alpha).unwrap();
    let mut rng = RngStream::new(404, 0);
    let draws: Vec<Vec<f64>> = (0..5000)
        .map(|_| s.sample_volume(&w, n, &mut rng).unwrap().points)
        .collect();
    let frac = m as f64 / n as f64;
    let oracle = MeshCdf::new(
        |x| frac * christoffel(m, x) + (1.0 - frac) * (alpha * christoffel(m, x) + 1.0 - alpha),
        -1.0,
        1.0,
        20_000,
    );
    for k in [0, n / 2, n - 1] {
        let col: Vec<f64> = draws.iter().map(|d| d[k]).collect();
        let d = ks_statistic(&col, |x| oracle.cdf(x));
        assert!(d < ks_critical_001(col.len()), "coordinate {k}: KS {d}");
    }
    let first: Vec<f64> = draws.iter().map(|d| d[0]).collect();
    let last: Vec<f64> = draws.iter().map(|d| d[n - 1]).collect();
    let two = ks_two_sample(&first, &last);
    assert!(two < 1.949 * (2.0 / 5000.0f64).sqrt(), "two-sample KS {two}");
}

#[test]
fn mixture_draws_follow_their_density() {
    let m = 4;
    let alpha = 0.3;
    let s = legendre_sampler(m);
    let w = WeightFunction::mixture(alpha).unwrap();
    let mut rng = RngStream::new(505, 0);
    let xs = s.sample_iid(&w, 10_000, &mut rng).unwrap().points;
    let oracle = MeshCdf::new(|x| alpha * christoffel(m, x) + 1.0 - alpha, -1.0, 1.0, 20_000);
    let d = ks_statistic(&xs, |x| oracle.cdf(x));
    assert!(d < ks_critical_001(xs.len()), "KS {d}");
}

#[test]
fn mean_gram_is_identity() {
    let m = 3;
    let basis = FeatureBasis::legendre(m).unwrap();
    let s = DesignSampler::new(basis.clone()).unwrap();
    let mut rng = RngStream::new(606, 0);
    let mut iid = Vec::new();
    let mut dpp = Vec::new();
    for _ in 0..1000 {
        let d = s.sample_iid(&WeightFunction::Christoffel, 200, &mut rng).unwrap();
        iid.push(EmpiricalGram::new(&d, &basis).unwrap().matrix().clone());
        let d = s.sample_repeated_dpp(2 * m, &mut rng).unwrap();
        dpp.push(EmpiricalGram::new(&d, &basis).unwrap().matrix().clone());
    }
    for grams in [&iid, &dpp] {
        for i in 0..m {
            for j in 0..m {
                let entries: Vec<f64> = grams.iter().map(|g| g[(i, j)]).collect();
                let (mean, se) = mean_and_se(&entries);
                let target = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (mean - target).abs() < 3.0 * se.max(1e-12),
                    "({i},{j}): {mean} ± {se}"
                );
            }
        }
    }
}

#[test]
fn seminorm_is_unbiased() {
    let basis = FeatureBasis::hermite(6).unwrap();
    let s = DesignSampler::new(basis.clone()).unwrap();
    let f = |x: f64| 1.0 / (1.0 + 2.0 * x * x);
    let quad = basis.measure().gauss_quadrature(64).unwrap();
    let norm2 = lsq::l2_norm(f, &basis, &quad).unwrap().powi(2);
    let mut rng = RngStream::new(707, 0);
    let mut vals = Vec::new();
    for _ in 0..4000 {
        let d = s.sample_iid(&WeightFunction::Christoffel, 12, &mut rng).unwrap();
        let fv: Vec<f64> = d.points.iter().map(|&x| f(x)).collect();
        vals.push(lsq::empirical_seminorm(&fv, &d).unwrap().powi(2));
    }
    let (mean, se) = mean_and_se(&vals);
    assert!((mean - norm2).abs() < 4.0 * se, "{mean} ± {se} vs {norm2}");
}

#[test]
fn small_volume_inverse_gram_identity() {
    let (m, n) = (3, 4);
    let basis = FeatureBasis::hermite(m).unwrap();
    let s = DesignSampler::new(basis.clone()).unwrap();
    let mut rng = RngStream::new(808, 0);
    let traces: Vec<f64> = (0..4000)
        .map(|_| {
            let d = s
                .sample_volume(&WeightFunction::Christoffel, n, &mut rng)
                .unwrap();
            EmpiricalGram::new(&d, &basis).unwrap().inverse_trace()
        })
        .collect();
    let (mean, se) = mean_and_se(&traces);
    let target = (m * n) as f64 / (n - m + 1) as f64;
    assert!((mean - target).abs() < 4.0 * se, "{mean} ± {se} vs {target}");
}

#[test]
fn conditioned_dpp_needs_few_attempts() {
    let m = 10;
    let s = DesignSampler::new(FeatureBasis::hermite(m).unwrap()).unwrap();
    let mut rng = RngStream::new(909, 0);
    let mut total = 0;
    for _ in 0..100 {
        let d = s
            .sample_conditioned(|r| s.sample_repeated_dpp(2 * m, r), 0.75, 1000, &mut rng)
            .unwrap();
        let g = EmpiricalGram::new(&d, s.basis()).unwrap();
        assert!(g.lambda_min() >= 0.25);
        total += d.attempts;
    }
    assert!(
        (total as f64 / 100.0) < 10.0,
        "mean attempts {}",
        total as f64 / 100.0
    );
}

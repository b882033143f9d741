use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dppls_core::lsq::{self, EmpiricalGram};
use dppls_core::{DesignSampler, FeatureBasis, RngStream, WeightFunction};
use std::hint::black_box;

fn runge(x: f64) -> f64 {
    1.0 / (1.0 + 2.0 * x * x)
}

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("sample");
    for m in [5, 10, 20] {
        let sampler = DesignSampler::new(FeatureBasis::hermite(m).unwrap()).unwrap();
        let mut rng = RngStream::new(1, 0);
        group.bench_with_input(BenchmarkId::new("dpp", m), &m, |b, _| {
            b.iter(|| sampler.sample_dpp(&mut rng).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("iid_christoffel_2m", m), &m, |b, &m| {
            b.iter(|| {
                sampler
                    .sample_iid(&WeightFunction::Christoffel, 2 * m, &mut rng)
                    .unwrap()
            })
        });
    }
    group.bench_function("sampler_tables_hermite_20", |b| {
        b.iter(|| DesignSampler::new(FeatureBasis::hermite(black_box(20)).unwrap()).unwrap())
    });
    group.finish();
}

fn fitting(c: &mut Criterion) {
    let m = 20;
    let basis = FeatureBasis::hermite(m).unwrap();
    let sampler = DesignSampler::new(basis.clone()).unwrap();
    let mut rng = RngStream::new(2, 0);
    let design = sampler.sample_repeated_dpp(2 * m, &mut rng).unwrap();
    let values: Vec<f64> = design.points.iter().map(|&x| runge(x)).collect();
    c.bench_function("gram_hermite_20x40", |b| {
        b.iter(|| EmpiricalGram::new(black_box(&design), &basis).unwrap())
    });
    c.bench_function("fit_hermite_20x40", |b| {
        b.iter(|| lsq::weighted_lsq_fit(black_box(&values), &design, &basis).unwrap())
    });
    let quad = basis.measure().gauss_quadrature(64).unwrap();
    c.bench_function("best_approximation_hermite_20", |b| {
        b.iter(|| lsq::best_approximation(runge, &basis, black_box(&quad)).unwrap())
    });
}

criterion_group!(benches, sampling, fitting);
criterion_main!(benches);

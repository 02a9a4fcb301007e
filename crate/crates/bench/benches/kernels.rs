use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use frap_core::frap::{frap_simulate, FrapPriors, FrapSampler, GpHyper, McmcConfig, Trend};
use frap_core::longmem::{fgn_cov_matrix, sample_fgn};
use frap_core::mcmc::{SignConstraint, TruncatedMvnGibbs};
use frap_core::mmpp::mmpp_loglik;
use frap_core::rng::seeded;
use frap_core::{BinaryPanel, HurstCoeff, MmppParams, TimeGrid};
use nalgebra::DVector;

fn h(v: f64) -> HurstCoeff {
    HurstCoeff::new(v).unwrap()
}

fn fgn(c: &mut Criterion) {
    let mut g = c.benchmark_group("fgn");
    for n in [90, 180, 512] {
        g.bench_with_input(BenchmarkId::new("cholesky_factor", n), &n, |b, &n| {
            b.iter(|| fgn_cov_matrix(n, h(0.75)).unwrap())
        });
        let cov = fgn_cov_matrix(n, h(0.75)).unwrap();
        let mut rng = seeded(1);
        g.bench_with_input(BenchmarkId::new("cholesky_draw", n), &n, |b, _| {
            b.iter(|| cov.sample(&mut rng))
        });
    }
    let mut rng = seeded(2);
    g.bench_function("circulant_2^15", |b| {
        b.iter(|| sample_fgn(1 << 15, h(0.75), &mut rng).unwrap())
    });
    g.finish();
}

fn tmvn(c: &mut Criterion) {
    let mut g = c.benchmark_group("tmvn_sweep");
    for n in [90, 180] {
        let cov = fgn_cov_matrix(n, h(0.75)).unwrap();
        let gibbs = TruncatedMvnGibbs::from_precision(cov.precision()).unwrap();
        let z: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let constraint = SignConstraint::from_binary(&z);
        let mean = DVector::zeros(n);
        let mut state = constraint.interior_point(1.0);
        let mut rng = seeded(3);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| gibbs.sweep(&mean, &constraint, &mut state, 1, &mut rng).unwrap())
        });
    }
    g.finish();
}

fn mmpp(c: &mut Criterion) {
    let params = MmppParams::two_state(0.1, 0.2, 0.3, 2.0).unwrap();
    let rows: Vec<Vec<u8>> = (0..10)
        .map(|r| (0..180).map(|i| u8::from((i * 7 + r) % 5 < 2)).collect())
        .collect();
    let panel = BinaryPanel::on_unit_grid(rows).unwrap();
    c.bench_function("mmpp_loglik_10x180", |b| {
        b.iter(|| mmpp_loglik(&panel, &params).unwrap())
    });
}

fn sampler_step(c: &mut Criterion) {
    let grid = TimeGrid::unit(90);
    let f = Trend::F3.on_grid(&grid);
    let panel = frap_simulate(&grid, &f, h(0.75), 0.1, 25, &mut seeded(4)).unwrap();
    let mut sampler = FrapSampler::new(
        &panel,
        FrapPriors::default(),
        GpHyper::default(),
        McmcConfig::default(),
    )
    .unwrap();
    let mut rng = seeded(5);
    c.bench_function("frap_step_25x90", |b| b.iter(|| sampler.step(&mut rng).unwrap()));
}

criterion_group!(benches, fgn, tmvn, mmpp, sampler_step);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nodeiso_core::quadrature::{expected_r2_quadrature, QuadratureSpec};
use nodeiso_core::simulator::{run_monte_carlo_with, Execution};
use nodeiso_core::{build_beta_table, expected_r2, ChannelParams, DiversityScheme, SimConfig};

fn closed_forms(c: &mut Criterion) {
    let p = ChannelParams::default().with_m(4).with_sigma(2.0);
    let mut g = c.benchmark_group("closed_form");
    for scheme in [DiversityScheme::None, DiversityScheme::Mrc(4), DiversityScheme::Sc(4)] {
        g.bench_function(scheme.to_string(), |b| b.iter(|| expected_r2(black_box(&p), scheme).unwrap()));
    }
    g.bench_function("beta_table(m=6,M=6)", |b| b.iter(|| build_beta_table(black_box(6), 6).unwrap()));
    g.finish();
}

fn quadrature(c: &mut Criterion) {
    let spec = QuadratureSpec::default();
    let mut g = c.benchmark_group("quadrature");
    for sigma in [0.0, 2.0] {
        let p = ChannelParams::default().with_m(2).with_sigma(sigma);
        g.bench_function(format!("sc(M=2) sigma={sigma}"), |b| {
            b.iter(|| expected_r2_quadrature(black_box(&p), DiversityScheme::Sc(2), &spec).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let p = ChannelParams::default().with_m(2);
    let mut config = SimConfig::new(p, DiversityScheme::Mrc(2), 0.01);
    config.runs = 50;
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    g.bench_function("50 runs, lambda=0.01", |b| {
        b.iter(|| run_monte_carlo_with(black_box(&config), Execution::Serial).unwrap())
    });
    g.finish();
}

criterion_group!(benches, closed_forms, quadrature, simulation);
criterion_main!(benches);

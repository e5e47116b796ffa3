use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flexidx::exec::Execution;
use flexidx::flexindex::{flexibility_index_with, flexibility_test_with};
use flexidx::model::{parse_model, SystemModel, UncertaintySet};
use flexidx::montecarlo::estimate_sf_with;
use std::hint::black_box;
use std::path::PathBuf;

fn model(name: &str) -> SystemModel {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(format!("{name}.json"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("estimate_sf_20k");
    g.sample_size(10);
    for name in ["simple_beta0", "hx_beta5"] {
        let m = model(name);
        for (label, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(label, name), &m, |b, m| {
                b.iter(|| estimate_sf_with(black_box(m), 20_000, 7, exec).unwrap())
            });
        }
    }
    g.finish();
}

fn candidates(c: &mut Criterion) {
    let mut g = c.benchmark_group("candidate_evaluation");
    let m = model("hx_beta5");
    for (label, exec) in MODES {
        g.bench_function(BenchmarkId::new(label, "index_ellipsoid"), |b| {
            b.iter(|| {
                flexibility_index_with(black_box(&m), &UncertaintySet::Ellipsoid, exec).unwrap()
            })
        });
        g.bench_function(BenchmarkId::new(label, "test_ellipsoid"), |b| {
            b.iter(|| {
                flexibility_test_with(black_box(&m), &UncertaintySet::Ellipsoid, 4.0, exec).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, monte_carlo, candidates);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tenspca::decomp::{tensor_pca_with, PowerOpts};
use tenspca::synth::{gen_rank4, parse_config, run_benchmark_with};
use tenspca::{Execution, SeededRng};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn monte_carlo(c: &mut Criterion) {
    let cfg =
        parse_config("experiment = rank1\nd = 30\nlambda = 4,5\nruns = 16\nseed = 1").unwrap();
    let mut group = c.benchmark_group("run_benchmark");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("rank1_d30", name), |b| {
            b.iter(|| run_benchmark_with(&cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn decomposition(c: &mut Criterion) {
    let (x, _) = gen_rank4((400, 10, 13), 8.0, 1.0, &mut SeededRng::new(2)).unwrap();
    let opts = PowerOpts::default();
    let mut group = c.benchmark_group("tensor_pca");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("rank4_400x10x13", name), |b| {
            b.iter(|| tensor_pca_with(&x, 4, &opts, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, monte_carlo, decomposition);
criterion_main!(benches);

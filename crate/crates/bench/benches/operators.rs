use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mskinetic::fisher::fisher_total;
use mskinetic::grid::grad_v;
use mskinetic_bench::{boltzmann, landau, state};

fn collision(c: &mut Criterion) {
    let mut group = c.benchmark_group("q_total");
    group.sample_size(10);
    for n in [16, 24] {
        let fields = state(n);
        let op = boltzmann(n, 16);
        group.bench_with_input(BenchmarkId::new("boltzmann", n), &fields, |b, f| b.iter(|| op.q_total(black_box(f))));
        let op = landau(n);
        group.bench_with_input(BenchmarkId::new("landau", n), &fields, |b, f| b.iter(|| op.q_total(black_box(f))));
    }
    group.finish();
}

fn diagnostics(c: &mut Criterion) {
    let fields = state(32);
    c.bench_function("grad_v n=32", |b| b.iter(|| grad_v(black_box(&fields[0]))));
    c.bench_function("fisher_total n=32", |b| b.iter(|| fisher_total(black_box(&fields))));
}

criterion_group!(benches, collision, diagnostics);
criterion_main!(benches);

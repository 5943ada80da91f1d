use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wxo_bench::objective_cloud;
use wxo_core::evolve::{hypervolume_2d, non_dominated_sort};

fn selection(c: &mut Criterion) {
    let mut group = c.benchmark_group("selection");
    for n in [40, 200, 1000] {
        let objs = objective_cloud(n, 11);
        let pts: Vec<[f64; 2]> = objs.iter().map(|o| [o[0], o[1]]).collect();
        group.bench_with_input(BenchmarkId::new("non_dominated_sort", n), &n, |b, _| {
            b.iter(|| non_dominated_sort(&objs))
        });
        group.bench_with_input(BenchmarkId::new("hypervolume_2d", n), &n, |b, _| {
            b.iter(|| hypervolume_2d(&pts, [2.0, 2.0]))
        });
    }
    group.finish();
}

criterion_group!(benches, selection);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wxo_bench::speckled;
use wxo_core::fem::{pnorm_sensitivity, solve_displacement, ElasticModel, LoadCase};
use wxo_core::grid::GridSpec;

fn fem(c: &mut Criterion) {
    let mut group = c.benchmark_group("fem");
    group.sample_size(10);
    for (nx, ny) in [(24, 12), (50, 25), (100, 50)] {
        let grid = GridSpec::new(nx, ny, 2.0, 1.0).unwrap();
        let model = ElasticModel::new(grid);
        let bc = LoadCase::cracked_plate().materialize(&grid).unwrap();
        let density = speckled(grid, 3);
        let label = format!("{nx}x{ny}");
        group.bench_with_input(BenchmarkId::new("solve", &label), &nx, |b, _| {
            b.iter(|| solve_displacement(&model, &density, &bc).unwrap())
        });
        group.bench_with_input(
            BenchmarkId::new("pnorm_sensitivity", &label),
            &nx,
            |b, _| b.iter(|| pnorm_sensitivity(&model, &density, &bc, 8.0).unwrap()),
        );
    }
    group.finish();
}

criterion_group!(benches, fem);
criterion_main!(benches);

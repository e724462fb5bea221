use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use bdt_bench::{baseline_equity, published_lattice};
use bdt_core::{
    price_zcb, price_zcb_const, solve_ptilde, OutOfRangePolicy, PricingPolicy, ThetaRate,
};

fn bench_price_node_dependent(c: &mut Criterion) {
    let policy = PricingPolicy::new(OutOfRangePolicy::Clamp, ThetaRate::Node).unwrap();
    let equity = baseline_equity();
    let mut group = c.benchmark_group("price_zcb_node");
    group.sample_size(10);
    for years in [1usize, 10, 30] {
        let steps = years * 252;
        let lattice = published_lattice(steps);
        group.bench_with_input(BenchmarkId::from_parameter(years), &steps, |b, &steps| {
            b.iter(|| price_zcb(&lattice, &equity, black_box(steps), &policy).unwrap())
        });
    }
    group.finish();
}

fn bench_price_const(c: &mut Criterion) {
    let lattice = published_lattice(7560);
    c.bench_function("price_zcb_const_30y", |b| {
        b.iter(|| price_zcb_const(&lattice, black_box(0.5), 7560).unwrap())
    });
}

fn bench_solve(c: &mut Criterion) {
    let lattice = published_lattice(1260);
    let target = price_zcb_const(&lattice, 0.55, 1260).unwrap();
    let mut group = c.benchmark_group("solve_ptilde");
    group.sample_size(10);
    group.bench_function("5y", |b| {
        b.iter(|| solve_ptilde(&lattice, black_box(target), 1260, 1e-12).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_price_node_dependent, bench_price_const, bench_solve);
criterion_main!(benches);

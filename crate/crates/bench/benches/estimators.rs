use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cse_bench::case;
use cse_core::{assemble_gain, assemble_kkt, factor_solve, run, EstimatorConfig, EstimatorKind, StateVector, WirtingerSystem};
use std::hint::black_box;

fn estimators(c: &mut Criterion) {
    let mut group = c.benchmark_group("estimate");
    group.sample_size(20);
    for instance in ["A", "C", "D"] {
        let case = case(118, instance);
        for kind in EstimatorKind::ALL {
            group.bench_function(BenchmarkId::new(kind.name(), format!("118_{instance}")), |bench| {
                bench.iter(|| {
                    run(kind, &case.grid, black_box(&case.measurements), &case.constraints, &EstimatorConfig::default())
                        .unwrap()
                })
            });
        }
    }
    group.finish();
}

fn linear_algebra(c: &mut Criterion) {
    let mut group = c.benchmark_group("cec_iteration");
    group.sample_size(10);
    for nodes in [118, 1888] {
        let case = case(nodes, "A");
        let flat = StateVector::flat(case.grid.n());
        let sys = WirtingerSystem::build(&case.grid, &flat, &case.measurements, Some(&case.constraints)).unwrap();
        group.bench_function(BenchmarkId::new("assemble_gain", nodes), |bench| {
            bench.iter(|| assemble_gain(&sys.weights, &sys.r, &sys.hx, &sys.hxbar).unwrap())
        });
        let gain = assemble_gain(&sys.weights, &sys.r, &sys.hx, &sys.hxbar).unwrap();
        let kkt = assemble_kkt(&gain, &sys.constraints).unwrap();
        group.bench_function(BenchmarkId::new("factor_solve", nodes), |bench| {
            bench.iter(|| factor_solve(black_box(&kkt), Default::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, estimators, linear_algebra);
criterion_main!(benches);

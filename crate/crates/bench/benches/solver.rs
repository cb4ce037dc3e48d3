use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use structinfo::balance::{analyze_pair, PairSolvers};
use structinfo::solver::RecordingPlan;
use structinfo_bench::fig2_truncated;

fn solver(c: &mut Criterion) {
    let study = fig2_truncated(2000);
    let solver = study.solver_for(&study.model.field).unwrap();
    c.bench_function("leapfrog 3480 cells x 2000 levels", |b| {
        b.iter(|| black_box(solver.run(&RecordingPlan::sensors_only()).unwrap()))
    });
    c.bench_function("leapfrog with energy trace", |b| {
        b.iter(|| black_box(solver.run(&RecordingPlan::sensors_only().with_energy()).unwrap()))
    });
}

fn stream(c: &mut Criterion) {
    let study = fig2_truncated(2000);
    let prepared = study.prepare(&study.config.variations[0]).unwrap();
    let e_f = study.normalization_energy(&prepared).unwrap();
    let ctx = study.context(&prepared, e_f).unwrap();
    let plan = study.stream_plan(&prepared, &ctx).unwrap();
    let solvers = PairSolvers {
        reference: &prepared.reference_solver,
        plus: &prepared.plus_solver,
        minus: &prepared.minus_solver,
    };
    let mut group = c.benchmark_group("information balance");
    group.sample_size(10);
    group.bench_function("position pair, 2000 levels", |b| {
        b.iter(|| black_box(analyze_pair(&solvers, &ctx, &plan).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, solver, stream);
criterion_main!(benches);

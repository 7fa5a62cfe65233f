use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use losslab_bench::{loaded_scenario, meta, model, workload, P_D, P_S};
use losslab_core::thermo::solve_suction_chamber;
use losslab_core::{analyze, synthesize, Geometry};

const GRIDS: [usize; 2] = [720, 3600];

fn bench_analyze(c: &mut Criterion) {
    let mut g = c.benchmark_group("analyze");
    for n in GRIDS {
        let w = workload(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| analyze(black_box(&w.config), black_box(&w.trace)).unwrap())
        });
    }
    g.finish();
}

fn bench_suction_solver(c: &mut Criterion) {
    let mut g = c.benchmark_group("suction_solver");
    for n in GRIDS {
        let w = workload(n);
        let t_in = w.trace.meta.t_s + 10.0;
        g.bench_with_input(BenchmarkId::from_parameter(n), &w, |b, w| {
            b.iter(|| {
                solve_suction_chamber(black_box(&w.trace), &w.config.geometry, &w.config.model, &w.config.solver, t_in)
                    .unwrap()
            })
        });
    }
    g.finish();
}

fn bench_synth(c: &mut Criterion) {
    let sc = loaded_scenario();
    let geom = Geometry::reference();
    let m = model();
    let run = meta(120.0);
    c.bench_function("synthesize/3600", |b| {
        b.iter(|| synthesize(&geom, &m, &run, P_S, P_D, black_box(&sc), 3600).unwrap())
    });
}

criterion_group!(benches, bench_analyze, bench_suction_solver, bench_synth);
criterion_main!(benches);

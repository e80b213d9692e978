//! Sequential vs parallel execution: the d-dimensional kernel within one
//! sub-step, the deterministic 2-d kernel, and Monte Carlo over independent
//! trials. Build with `--no-default-features` to see the fallback alone.

use bml::dynamics::{step_deterministic, DDimStepper};
use bml::par::Exec;
use bml::percolation::{estimate_cycle_prob, SkewTorusSpec};
use bml::renorm::{estimate_good_prob, GoodEdgeMode, RenormEdge, RenormParams};
use bml::{sample_initial, InitialLaw, TorusGrid};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const EXECS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn grid(dims: &[usize], p: f64) -> TorusGrid {
    sample_initial(dims, &InitialLaw::new(p, 0.5, dims.len()).unwrap(), 1.into()).unwrap()
}

fn substeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("substeps");
    for dims in [vec![512, 512], vec![64, 64, 64]] {
        let label = format!("{dims:?}");
        let start = grid(&dims, 0.3);
        for (name, exec) in EXECS {
            group.bench_with_input(BenchmarkId::new(format!("ddim-{name}"), &label), &start, |b, start| {
                let mut g = start.clone();
                let mut stepper = DDimStepper::new(exec);
                let mut t = 0;
                b.iter(|| {
                    t += 1;
                    stepper.step(&mut g, t)
                });
            });
        }
    }
    let start = grid(&[512, 512], 0.3);
    group.bench_function("2d-in-place", |b| {
        let mut g = start.clone();
        let mut t = 0;
        b.iter(|| {
            t += 1;
            step_deterministic(&mut g, t)
        });
    });
    group.finish();
}

fn trials(c: &mut Criterion) {
    let mut group = c.benchmark_group("trials");
    group.sample_size(10);
    let params = RenormParams::new(20, 2).unwrap();
    let edge = RenormEdge::east([0, 0]);
    let torus = SkewTorusSpec::new([6, -3], [-2, 4], 8).unwrap();
    for (name, exec) in EXECS {
        group.bench_function(BenchmarkId::new("good-edge", name), |b| {
            b.iter(|| estimate_good_prob(0.97, &params, &edge, 64, 3.into(), GoodEdgeMode::Sweep, exec).unwrap())
        });
        group.bench_function(BenchmarkId::new("skew-cycle", name), |b| {
            b.iter(|| estimate_cycle_prob(&torus, 0.8, 64, 3.into(), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, substeps, trials);
criterion_main!(benches);

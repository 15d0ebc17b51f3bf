use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hilbert_sgm::decomposition::unbiasedness_check;
use hilbert_sgm::experiments::{sec9_decompose, Preset, Sec9Setup};
use hilbert_sgm::{gen_synthetic_abs, AnchorSet, Execution, KernelSpec, SpaceSpec, StepSchedule, TrainingSet};

#[cfg(feature = "parallel")]
fn modes() -> Vec<Execution> {
    vec![Execution::Sequential, Execution::Parallel]
}

#[cfg(not(feature = "parallel"))]
fn modes() -> Vec<Execution> {
    vec![Execution::Sequential]
}

fn label(exec: Execution) -> &'static str {
    if exec.is_parallel() {
        "parallel"
    } else {
        "sequential"
    }
}

fn gram(c: &mut Criterion) {
    let kernel = KernelSpec::gaussian(0.2).unwrap();
    let mut group = c.benchmark_group("gram");
    for m in [500, 2000] {
        let points = gen_synthetic_abs(m, 1, 1.0).unwrap().into_parts().0;
        for exec in modes() {
            group.bench_with_input(BenchmarkId::new(label(exec), m), &points, |b, p| {
                b.iter(|| AnchorSet::with_execution(kernel, p.clone(), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn decompose_trials(c: &mut Criterion) {
    let setup = Sec9Setup {
        passes: 10,
        trials: 16,
        ..Sec9Setup::default()
    };
    let mut group = c.benchmark_group("decompose");
    group.sample_size(10);
    for exec in modes() {
        group.bench_function(label(exec), |b| {
            b.iter(|| sec9_decompose(Preset::Sec9Minibatch, &setup, exec).unwrap())
        });
    }
    group.finish();
}

fn unbiasedness(c: &mut Criterion) {
    let m = 16;
    let (points, targets) = gen_synthetic_abs(m, 21, 1.0).unwrap().into_parts();
    let space = SpaceSpec::Kernel {
        kernel: KernelSpec::gaussian(0.2).unwrap(),
    };
    let train = TrainingSet::new(points, targets, space).unwrap();
    let schedule = StepSchedule::constant(1.0 / (8.0 * m as f64), 1.0).unwrap();
    let mut group = c.benchmark_group("unbiasedness");
    group.sample_size(10);
    for exec in modes() {
        group.bench_function(label(exec), |b| {
            b.iter(|| unbiasedness_check(&train, &schedule, 1, 64, 4000, 22, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gram, decompose_trials, unbiasedness);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use loadcast::ann::{error_jacobian, init_weights};
use loadcast::train::train_lm;
use loadcast::{NetworkShape, TrainConfig};
use loadcast_bench::{day_dataset, seconds_dataset};

fn jacobian(c: &mut Criterion) {
    let mut group = c.benchmark_group("jacobian");
    for hidden in [1usize, 10, 30] {
        let (ds, _) = seconds_dataset(1, 1000);
        let net = init_weights(&NetworkShape::new(&[1, 2], &[hidden]), 7).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(hidden), &hidden, |b, _| {
            b.iter(|| error_jacobian(black_box(&net), &ds, 0..ds.len()).unwrap())
        });
    }
    group.finish();
}

fn forward(c: &mut Criterion) {
    let (ds, _) = seconds_dataset(2, 1000);
    let net = init_weights(&NetworkShape::new(&[1, 2], &[10, 10]), 7).unwrap();
    c.bench_function("forward_rows/998x[10,10]", |b| {
        b.iter(|| net.forward_rows(black_box(&ds.inputs)).unwrap())
    });
}

fn levenberg_marquardt(c: &mut Criterion) {
    let (ds, splits) = day_dataset(3, &[1, 2]);
    let net = init_weights(&NetworkShape::new(&[1, 2], &[10]), 11).unwrap();
    let config = TrainConfig::default();
    c.bench_function("train_lm/day-requests[10]", |b| {
        b.iter(|| train_lm(black_box(&net), &ds, &splits, &config).unwrap())
    });
}

criterion_group!(benches, jacobian, forward, levenberg_marquardt);
criterion_main!(benches);

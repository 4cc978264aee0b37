use std::hint::black_box;

use bnl_core::dataset::{generate, Dataset, Task};
use bnl_core::neural::{batch_gradients, train, Network, TrainConfig, WeightInit};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn dataset(n: u32, count: usize) -> Dataset {
    generate(n, Task::Nonlinearity, count, 4).unwrap()
}

fn encoder(n: u32, base: usize) -> Network {
    let mut net = Network::encoder(1 << n, base).unwrap();
    net.init_params(WeightInit::UniformScaled, 1);
    net
}

fn forward(c: &mut Criterion) {
    let mut g = c.benchmark_group("encoder_forward");
    for (n, base) in [(3u32, 32usize), (4, 64)] {
        let net = encoder(n, base);
        let (x, _) = dataset(n, 256).to_matrices();
        g.bench_with_input(BenchmarkId::new("batch256", n), &x, |b, x| {
            b.iter(|| net.forward_batch(black_box(x), 256).unwrap())
        });
    }
    g.finish();
}

fn gradients(c: &mut Criterion) {
    let net = encoder(4, 64);
    let (x, t) = dataset(4, 32).to_matrices();
    c.bench_function("encoder_gradients/batch32", |b| {
        b.iter(|| batch_gradients(&net, black_box(&x), black_box(&t), 32).unwrap())
    });
}

fn epoch(c: &mut Criterion) {
    let data = dataset(4, 1024);
    let cfg = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    c.bench_function("encoder_epoch/n4_1024", |b| {
        b.iter_batched(
            || encoder(4, 64),
            |mut net| train(&mut net, &data, &cfg).unwrap(),
            criterion::BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, forward, gradients, epoch);
criterion_main!(benches);

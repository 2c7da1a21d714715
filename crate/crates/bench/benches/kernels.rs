use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;
use xmodal::translation::{tower_forward, TowerParams, HIDDEN_DIM, JOINT_DIM};
use xmodal::{contrastive_batch_loss, fit_forest, fit_pca, retrieve_top_k, EmbeddingMatrix, ForestConfig, LabeledData};
use xmodal_bench::{cyclic_labels, uniform, uniform_f32};

fn loss(c: &mut Criterion) {
    let mut group = c.benchmark_group("contrastive_loss");
    for batch in [256usize, 1024] {
        let a = uniform(batch, JOINT_DIM, 1);
        let v = uniform(batch, JOINT_DIM, 2);
        group.throughput(Throughput::Elements((batch * batch) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(batch), &batch, |b, &batch| {
            b.iter(|| contrastive_batch_loss(black_box(&a), black_box(&v), batch, JOINT_DIM, 1.0).unwrap())
        });
    }
    group.finish();
}

fn forward(c: &mut Criterion) {
    let mut group = c.benchmark_group("tower_forward");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for in_dim in [1024usize, 2048] {
        let tower = TowerParams::glorot(in_dim, HIDDEN_DIM, JOINT_DIM, &mut rng);
        let x = uniform(1, in_dim, 4);
        group.bench_with_input(BenchmarkId::from_parameter(in_dim), &in_dim, |b, _| {
            b.iter(|| tower_forward(&tower, black_box(&x)).unwrap())
        });
    }
    group.finish();
}

fn top_k(c: &mut Criterion) {
    let pool = EmbeddingMatrix::new(JOINT_DIM, uniform_f32(504, JOINT_DIM, 5)).unwrap();
    let query = uniform_f32(1, JOINT_DIM, 6);
    c.bench_function("retrieve_top_30_of_504", |b| {
        b.iter(|| retrieve_top_k(black_box(&query), &pool, 30).unwrap())
    });
}

fn forest(c: &mut Criterion) {
    let (n, dim, classes) = (1800, JOINT_DIM, 18);
    let data = LabeledData {
        dim,
        features: uniform_f32(n, dim, 7),
        labels: cyclic_labels(n, classes),
    };
    let cfg = ForestConfig {
        n_trees: 10,
        ..ForestConfig::default()
    };
    let mut group = c.benchmark_group("forest");
    group.sample_size(10);
    group.bench_function("fit_10_trees_1800x128", |b| b.iter(|| fit_forest(black_box(&data), classes, &cfg).unwrap()));
    group.finish();
}

fn pca(c: &mut Criterion) {
    let x = EmbeddingMatrix::new(1024, uniform_f32(2000, 1024, 8)).unwrap();
    let mut group = c.benchmark_group("pca");
    group.sample_size(10);
    group.bench_function("fit_128_of_2000x1024", |b| b.iter(|| fit_pca(black_box(&x), 128).unwrap()));
    group.finish();
}

criterion_group!(benches, loss, forward, top_k, forest, pca);
criterion_main!(benches);

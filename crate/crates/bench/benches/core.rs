use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use styleinfuse::augment::topk_similar;
use styleinfuse::bayes::{nuts_sample, synthetic_data, FnDensity, NutsConfig, Posterior, Prior, SyntheticSpec};
use styleinfuse::features::{build_matrix, shortest_hamiltonian_path};
use styleinfuse::synth::{fixture, FixtureSpec};
use styleinfuse::FeatureRegistry;

fn points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn posterior_gradient(c: &mut Criterion) {
    let data = synthetic_data(&SyntheticSpec { seed: 1, ..Default::default() }, Prior::default());
    let post = Posterior::new(&data, Prior::default()).unwrap();
    let x = vec![0.1; post.layout().dim()];
    let mut grad = vec![0.0; x.len()];
    c.bench_function("log_posterior_and_gradient_500_pairs", |b| b.iter(|| post.eval(black_box(&x), Some(&mut grad))));
}

fn nuts_short_run(c: &mut Criterion) {
    let target = FnDensity::new(2, |x: &[f64], g: &mut [f64]| {
        let (a, b) = (x[0], x[1]);
        let k = 1.0 / (1.0 - 0.81);
        g[0] = -k * (a - 0.9 * b);
        g[1] = -k * (b - 0.9 * a);
        -0.5 * k * (a * a - 1.8 * a * b + b * b)
    });
    let config = NutsConfig { chains: 1, warmup: 200, samples: 200, seed: 3, ..Default::default() };
    let mut group = c.benchmark_group("nuts");
    group.sample_size(20);
    group.bench_function("bivariate_normal_400_iterations", |b| b.iter(|| nuts_sample(&target, &config).unwrap()));
    group.finish();
}

fn feature_extraction(c: &mut Criterion) {
    let f = fixture(&FixtureSpec::default()).unwrap();
    let reg = FeatureRegistry::new(["length", "flesch", "ttr", "speed", "circuitousness"]).unwrap();
    let mut group = c.benchmark_group("features");
    group.sample_size(20);
    group.bench_function("fixture_matrix", |b| b.iter(|| build_matrix(&f.corpus, &reg, true).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [6, 10, 14] {
        let pts = points(&mut rng, n, 8);
        group.bench_with_input(BenchmarkId::new("hamiltonian_path", n), &pts, |b, p| b.iter(|| shortest_hamiltonian_path(p)));
    }
    group.finish();
}

fn top_k(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pool: Vec<(String, Vec<f64>)> = points(&mut rng, 5000, 64).into_iter().enumerate().map(|(i, v)| (format!("d{i}"), v)).collect();
    let q = points(&mut rng, 1, 64).remove(0);
    c.bench_function("topk_5_of_5000_dim_64", |b| b.iter(|| topk_similar(black_box(&q), &pool, 5).unwrap()));
}

criterion_group!(benches, posterior_gradient, nuts_short_run, feature_extraction, top_k);
criterion_main!(benches);

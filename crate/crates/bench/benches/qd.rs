use criterion::{criterion_group, criterion_main, Criterion};
use mechmap::engine::Simulator;
use mechmap::mechanics::extract_mechanics;
use mechmap::qd::{evaluate_seeded, fitness, mutate, random_level, RunConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn qd(c: &mut Criterion) {
    let desc = mechmap_bench::zelda();
    let sim = Simulator::new(desc.clone());
    let catalog = extract_mechanics(&desc);
    let config = RunConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let level = random_level(&desc, &mut rng);
    let alphabet = desc.tile_alphabet();

    c.bench_function("fitness_12x10", |b| b.iter(|| fitness(&level, 0.25, alphabet.len())));
    c.bench_function("mutate_12x10", |b| b.iter(|| mutate(&level, 0.5, &alphabet, &mut rng)));
    let mut group = c.benchmark_group("evaluate");
    group.sample_size(10);
    group.bench_function("zelda_level", |b| b.iter(|| evaluate_seeded(&sim, &catalog, &level, &config, 9).unwrap()));
    group.finish();
}

criterion_group!(benches, qd);
criterion_main!(benches);

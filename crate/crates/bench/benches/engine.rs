use criterion::{criterion_group, criterion_main, Criterion};
use mechmap::agents::{Agent, AgentConfig, IdleAgent, TreeSearchAgent};
use mechmap::engine::{Action, Simulator};
use mechmap::qd::random_level;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn engine(c: &mut Criterion) {
    let desc = mechmap_bench::zelda();
    let sim = Simulator::new(desc.clone());
    let level = random_level(&desc, &mut ChaCha8Rng::seed_from_u64(1));
    let state = sim.init_state(&level, 1).unwrap();

    c.bench_function("zelda_step_nil", |b| {
        b.iter_batched_ref(|| state.clone(), |s| sim.step(s, Action::Nil), criterion::BatchSize::SmallInput)
    });
    c.bench_function("zelda_idle_episode_70", |b| b.iter(|| sim.run_episode(&level, &mut IdleAgent, 70, 3).unwrap()));
    let mut agent = TreeSearchAgent::new(AgentConfig::default());
    c.bench_function("zelda_tree_search_decision", |b| b.iter(|| agent.act(&sim, &state)));
}

criterion_group!(benches, engine);
criterion_main!(benches);

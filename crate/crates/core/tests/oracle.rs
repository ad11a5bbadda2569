use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use mechmap::agents::{Agent, AgentConfig, AgentKind, TreeSearchAgent};
use mechmap::engine::{Action, GameState, Simulator, Status};
use mechmap::gdl::{parse_game, parse_level, GameDescription, Level};
use mechmap::mechanics::extract_mechanics;
use mechmap::qd::{evaluate_seeded, Evolution, RunConfig};

const DRIFT3: &str = "\
game drift3
grid 3x3
SpriteSet:
avatar avatar-mover
dart missile dir=right cooldown=2
InteractionSet:
dart EOS killSprite label=exit
avatar dart killSprite label=hit
TerminationSet:
sprite-counter stype=avatar limit=0 loss
timeout ticks=4 win
LevelMapping:
. =
A = avatar
m = dart
";

fn drift3_config() -> RunConfig {
    RunConfig {
        t_ideal: 4,
        max_ticks: 6,
        agent: AgentConfig { kind: AgentKind::Idle, ..AgentConfig::default() },
        ..RunConfig::default()
    }
}

#[test]
fn evolution_recovers_enumerated_cell_optima() {
    let desc = Arc::new(parse_game(DRIFT3).unwrap());
    let config = drift3_config();
    let sim = Simulator::new(desc.clone());
    let catalog = extract_mechanics(&desc);

    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    for avatar in 0..9 {
        for mask in 0u32..(1 << 8) {
            let mut tiles = vec![b'.'; 9];
            tiles[avatar] = b'A';
            for (bit, idx) in (0..9).filter(|&i| i != avatar).enumerate() {
                if mask & (1 << bit) != 0 {
                    tiles[idx] = b'm';
                }
            }
            let r = evaluate_seeded(&sim, &catalog, &Level::from_tiles(3, 3, tiles), &config, 0).unwrap().result;
            if r.feasible(config.threshold) {
                let slot = best.entry(r.vector.to_string()).or_insert(f64::INFINITY);
                *slot = slot.min(r.fitness);
            }
        }
    }
    assert_eq!(best.len(), 4, "every cell is reachable on this board: {best:?}");

    let mut evo = Evolution::new(desc, RunConfig { iterations: 100, ..config }, 1).unwrap();
    evo.run(|_| {}).unwrap();
    let elites: Vec<_> = evo.archive().elites().collect();
    assert_eq!(elites.len(), best.len());
    for (key, elite) in elites {
        assert_eq!(elite.eval.fitness, best[&key.to_string()], "cell {key}");
    }
}

fn small_zelda() -> Arc<GameDescription> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../games/zelda.game");
    let text = std::fs::read_to_string(path).unwrap().replace("grid 12x10", "grid 3x3");
    Arc::new(parse_game(&text).unwrap())
}

fn value(state: &GameState, depth: u32, c: &AgentConfig) -> f64 {
    let mut v = state.score as f64 - depth as f64 * c.depth_penalty;
    match state.status {
        Status::Win => v += c.win_bonus,
        Status::Loss => v -= c.loss_penalty,
        Status::Running => {}
    }
    v
}

/// Best value over every action sequence of at most `depth` steps.
fn brute_force(sim: &Simulator, state: &GameState, depth: u32, at: u32, c: &AgentConfig) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for a in Action::ALL {
        let (next, _) = sim.advance(state, a);
        let mut v = value(&next, at + 1, c);
        if next.is_running() && at + 1 < depth {
            v = v.max(brute_force(sim, &next, depth, at + 1, c));
        }
        best = best.max(v);
    }
    best
}

#[test]
fn exhaustive_search_agrees_with_brute_force() {
    let desc = small_zelda();
    let sim = Simulator::new(desc.clone());
    let horizon = 3;
    let config = AgentConfig { node_budget: 6 + 36 + 216, horizon, explore: false, ..AgentConfig::default() };
    for text in ["A+g\n...\n...\n", ".A.\n+.g\n...\n", "g..\n.w.\n.+A\n", "+..\n.A.\n..g\n"] {
        let level = parse_level(text, &desc).unwrap();
        let state = sim.init_state(&level, 0).unwrap();
        let optimum = brute_force(&sim, &state, horizon, 0, &config);
        let action = TreeSearchAgent::new(config.clone()).act(&sim, &state);
        let (next, _) = sim.advance(&state, action);
        let mut via = value(&next, 1, &config);
        if next.is_running() {
            via = via.max(brute_force(&sim, &next, horizon, 1, &config));
        }
        assert_eq!(via, optimum, "level\n{text}chose {action}");
    }
}

#[test]
fn agent_next_to_door_with_key_wins() {
    let desc = small_zelda();
    let sim = Simulator::new(desc.clone());
    let level = parse_level("A+g\n...\n...\n", &desc).unwrap();
    let mut state = sim.init_state(&level, 0).unwrap();
    sim.step(&mut state, Action::Right);
    assert_eq!(sim.resource(&state, "key"), 1);
    let action = TreeSearchAgent::new(AgentConfig::default()).act(&sim, &state);
    assert_eq!(action, Action::Right);
    sim.step(&mut state, action);
    assert_eq!(state.status, Status::Win);
}

#[test]
fn zelda_fixture_wins_with_key_and_door() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../games/zelda.game");
    let desc = Arc::new(parse_game(&std::fs::read_to_string(path).unwrap()).unwrap());
    let level = parse_level(
        "wwwwwwwwwwww\nw..........w\nw.A+.g.....w\nw..........w\nw..........w\n\
         w..........w\nw..........w\nw..........w\nw..........w\nwwwwwwwwwwww\n",
        &desc,
    )
    .unwrap();
    let sim = Simulator::new(desc.clone());
    let catalog = extract_mechanics(&desc);
    let r = evaluate_seeded(&sim, &catalog, &level, &RunConfig::default(), 1).unwrap().result;
    assert!(r.win);
    let labels = r.vector.labels(&catalog);
    assert!(labels.contains(&"getkey") && labels.contains(&"touchgoal"), "{labels:?}");
    assert_eq!(r.c, r.p + r.e);
}

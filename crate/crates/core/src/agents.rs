//! Playing agents: the do-nothing agent used by the idle constraint, and a
//! budgeted best-first search agent used for evaluation.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{Action, GameEvent, GameState, Simulator, Status};

pub trait Agent {
    /// Chooses the next action. Must not mutate `state`.
    fn act(&mut self, sim: &Simulator, state: &GameState) -> Action;
}

/// Never presses anything.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdleAgent;

impl Agent for IdleAgent {
    fn act(&mut self, _sim: &Simulator, _state: &GameState) -> Action {
        Action::Nil
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AgentKind {
    Idle,
    TreeSearch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub kind: AgentKind,
    /// Child states generated per decision.
    pub node_budget: usize,
    /// Maximum lookahead depth.
    pub horizon: u32,
    pub win_bonus: f64,
    pub loss_penalty: f64,
    /// Value subtracted per tick of depth.
    pub depth_penalty: f64,
    /// Wander when the search finds nothing better than the current score.
    pub explore: bool,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            kind: AgentKind::TreeSearch,
            node_budget: 500,
            horizon: 20,
            win_bonus: 1e4,
            loss_penalty: 1e4,
            depth_penalty: 0.01,
            explore: true,
            seed: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.node_budget < 1 {
            return Err("agent node_budget must be at least 1".into());
        }
        if self.horizon < 1 {
            return Err("agent horizon must be at least 1".into());
        }
        for (name, v) in
            [("win_bonus", self.win_bonus), ("loss_penalty", self.loss_penalty), ("depth_penalty", self.depth_penalty)]
        {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("agent {name} must be a non-negative number"));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> AgentConfig {
        AgentConfig { seed, ..self.clone() }
    }

    pub fn build(&self) -> Box<dyn Agent + Send> {
        match self.kind {
            AgentKind::Idle => Box::new(IdleAgent),
            AgentKind::TreeSearch => Box::new(TreeSearchAgent::new(self.clone())),
        }
    }
}

/// Best-first search over action sequences using the simulator as a
/// forward model.
///
/// Node value is `score + win_bonus·win − loss_penalty·loss − depth·depth_penalty`.
/// The agent returns the first action of the best generated node, ties going
/// to the earliest generated (fixed action order). With `explore` set and no
/// node improving on the current score, it instead takes a random safe step,
/// seeded by `(seed, tick)` so the choice is a pure function of config and state.
#[derive(Clone, Debug)]
pub struct TreeSearchAgent {
    config: AgentConfig,
}

struct Node {
    state: Option<GameState>,
    depth: u32,
    first: Action,
    value: f64,
    score: i64,
    status: Status,
}

#[derive(PartialEq)]
struct Priority(f64);

impl Eq for Priority {}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl TreeSearchAgent {
    pub fn new(config: AgentConfig) -> TreeSearchAgent {
        TreeSearchAgent { config }
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    fn value(&self, state: &GameState, depth: u32) -> f64 {
        let c = &self.config;
        let mut v = state.score as f64 - depth as f64 * c.depth_penalty;
        match state.status {
            Status::Win => v += c.win_bonus,
            Status::Loss => v -= c.loss_penalty,
            Status::Running => {}
        }
        v
    }

    fn search(&self, sim: &Simulator, state: &GameState) -> Vec<Node> {
        let c = &self.config;
        let mut nodes = vec![Node {
            state: Some(state.clone()),
            depth: 0,
            first: Action::Nil,
            value: f64::NEG_INFINITY,
            score: state.score,
            status: state.status,
        }];
        let mut frontier = BinaryHeap::new();
        frontier.push((Priority(0.0), Reverse(0usize)));
        let mut events: Vec<GameEvent> = Vec::new();
        let mut generated = 0;
        while generated < c.node_budget {
            let Some((_, Reverse(idx))) = frontier.pop() else { break };
            let parent = nodes[idx].state.take().expect("frontier nodes keep their state");
            let depth = nodes[idx].depth + 1;
            for action in Action::ALL {
                if generated >= c.node_budget {
                    break;
                }
                let mut child = parent.clone();
                events.clear();
                sim.step_into(&mut child, action, &mut events);
                let value = self.value(&child, depth);
                let first = if idx == 0 { action } else { nodes[idx].first };
                let expandable = child.is_running() && depth < c.horizon;
                if expandable {
                    frontier.push((Priority(value), Reverse(nodes.len())));
                }
                nodes.push(Node {
                    score: child.score,
                    status: child.status,
                    state: expandable.then_some(child),
                    depth,
                    first,
                    value,
                });
                generated += 1;
            }
        }
        nodes
    }
}

impl Agent for TreeSearchAgent {
    fn act(&mut self, sim: &Simulator, state: &GameState) -> Action {
        if !state.is_running() {
            return Action::Nil;
        }
        let nodes = self.search(sim, state);
        let mut best: Option<&Node> = None;
        for n in &nodes[1..] {
            if best.is_none_or(|b| n.value > b.value) {
                best = Some(n);
            }
        }
        let Some(best) = best else { return Action::Nil };

        let progress = best.status == Status::Win || best.score > state.score;
        if progress || !self.config.explore {
            return best.first;
        }

        let safe = |a: Action| nodes[1..].iter().any(|n| n.first == a && n.status != Status::Loss);
        let candidates: Vec<Action> = Action::ALL[1..].iter().copied().filter(|&a| safe(a)).collect();
        if candidates.is_empty() {
            return best.first;
        }
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.config.seed ^ u64::from(state.tick).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        // keep heading the same way half of the time
        if let Some(avatar) = sim.avatar(state) {
            let ahead = Action::from_direction(avatar.orientation);
            if candidates.contains(&ahead) && rng.random_bool(0.5) {
                return ahead;
            }
        }
        candidates[rng.random_range(0..candidates.len())]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdl::{parse_game, parse_level};
    use std::sync::Arc;

    const GAME: &str = "\
game pick
grid 5x3
SpriteSet:
wall immovable
key resource limit=1
door portal-goal
avatar avatar-shooter stype=sword use_resource=key
sword flicker lifetime=1
InteractionSet:
avatar wall stepBack label=stepback
key avatar collectResource score=1 label=getkey
door avatar killSprite if=key>=1 score=1 label=touchgoal
TerminationSet:
sprite-counter stype=avatar limit=0 loss
sprite-counter stype=door limit=0 win
LevelMapping:
. =
w = wall
+ = key
g = door
A = avatar
";

    fn setup(level: &str) -> (Simulator, GameState) {
        let desc = Arc::new(parse_game(GAME).unwrap());
        let lvl = parse_level(level, &desc).unwrap();
        let sim = Simulator::new(desc);
        let st = sim.init_state(&lvl, 0).unwrap();
        (sim, st)
    }

    #[test]
    fn idle_always_nil() {
        let (sim, st) = setup(".....\n.A+g.\n.....\n");
        assert_eq!(IdleAgent.act(&sim, &st), Action::Nil);
    }

    #[test]
    fn walks_to_key_then_door() {
        let (sim, mut st) = setup(".....\n.A+g.\n.....\n");
        let mut agent = TreeSearchAgent::new(AgentConfig::default());
        let snapshot = st.clone();
        let a = agent.act(&sim, &st);
        assert_eq!(st, snapshot, "act must not mutate the state");
        assert_eq!(a, Action::Right);
        sim.step(&mut st, a);
        assert_eq!(sim.resource(&st, "key"), 1);
        let a = agent.act(&sim, &st);
        assert_eq!(a, Action::Right);
        let ev = sim.step(&mut st, a);
        assert_eq!(st.status, Status::Win);
        assert!(ev.iter().any(|e| matches!(e.kind, crate::engine::EventKind::Collision { rule: 2 })));
    }

    #[test]
    fn deterministic_for_same_state_and_seed() {
        let (sim, st) = setup(".....\n.A...\n....g\n");
        let cfg = AgentConfig { seed: 42, ..AgentConfig::default() };
        let a = TreeSearchAgent::new(cfg.clone()).act(&sim, &st);
        let b = TreeSearchAgent::new(cfg).act(&sim, &st);
        assert_eq!(a, b);
    }

    #[test]
    fn without_exploration_ties_go_to_nil() {
        let (sim, st) = setup(".....\n.A...\n....g\n");
        let cfg = AgentConfig { explore: false, ..AgentConfig::default() };
        assert_eq!(TreeSearchAgent::new(cfg).act(&sim, &st), Action::Nil);
    }
}

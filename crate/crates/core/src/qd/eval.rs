use rand::Rng;
use thiserror::Error;

use super::{constraint_e, constraint_p, fitness, is_feasible, RunConfig};
use crate::agents::IdleAgent;
use crate::engine::{EngineError, PlayTrace, Simulator, Status};
use crate::gdl::Level;
use crate::mechanics::{vector_from_trace, MechanicCatalog, MechanicVector, MechanicsError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Mechanics(#[from] MechanicsError),
}

/// Scores of one level.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub win: bool,
    /// Tick of the win, if any.
    pub t_win: Option<u32>,
    /// Final tick of a non-winning episode.
    pub t_survival: Option<u32>,
    pub score: i64,
    pub idle_pass: u32,
    pub idle_total: u32,
    pub p: f64,
    pub e: f64,
    pub c: f64,
    pub fitness: f64,
    pub vector: MechanicVector,
    /// Seed from which every episode of this evaluation was derived.
    pub seed: u64,
}

impl EvalResult {
    pub fn feasible(&self, threshold: f64) -> bool {
        is_feasible(self, threshold)
    }
}

/// A result together with the evaluation agent's playthrough.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub result: EvalResult,
    pub trace: PlayTrace,
}

/// SplitMix64 finalizer over `seed + stream`, giving independent seeds for
/// the agent episode, the agent itself and each idle run.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws an evaluation seed from `rng` and evaluates with it.
pub fn evaluate<R: Rng + ?Sized>(
    sim: &Simulator,
    catalog: &MechanicCatalog,
    level: &Level,
    config: &RunConfig,
    rng: &mut R,
) -> Result<Evaluation, EvalError> {
    evaluate_seeded(sim, catalog, level, config, rng.random())
}

/// Plays one agent episode and `idle_runs` idle episodes, all derived from
/// `seed`. An idle run fails only when the game is lost before `t_ideal`.
pub fn evaluate_seeded(
    sim: &Simulator,
    catalog: &MechanicCatalog,
    level: &Level,
    config: &RunConfig,
    seed: u64,
) -> Result<Evaluation, EvalError> {
    let mut agent = config.agent.with_seed(derive_seed(seed, 1)).build();
    let trace = sim.run_episode(level, agent.as_mut(), config.max_ticks, derive_seed(seed, 0))?;
    let vector = vector_from_trace(&trace, catalog)?;
    let win = trace.final_status == Status::Win;
    let (t_win, t_survival) = if win { (Some(trace.final_tick), None) } else { (None, Some(trace.final_tick)) };

    let mut idle_pass = 0;
    for i in 0..config.idle_runs {
        let run = sim.run_episode(level, &mut IdleAgent, config.t_ideal, derive_seed(seed, 2 + u64::from(i)))?;
        if !(run.final_status == Status::Loss && run.final_tick < config.t_ideal) {
            idle_pass += 1;
        }
    }

    let t_ideal = f64::from(config.t_ideal);
    let p = constraint_p(win, f64::from(t_win.unwrap_or(0)), f64::from(t_survival.unwrap_or(0)), t_ideal);
    let e = constraint_e(idle_pass, config.idle_runs);
    let alphabet = sim.description().tile_alphabet().len();
    let result = EvalResult {
        win,
        t_win,
        t_survival,
        score: trace.score,
        idle_pass,
        idle_total: config.idle_runs,
        p,
        e,
        c: p + e,
        fitness: fitness(level, config.w, alphabet),
        vector,
        seed,
    };
    Ok(Evaluation { result, trace })
}

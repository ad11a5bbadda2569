//! Level generation that searches for levels covering different
//! combinations of game mechanics.
//!
//! - [`gdl`]: game description language and level text format.
//! - [`engine`]: deterministic tile-based simulator.
//! - [`mechanics`]: mechanic catalogs and trace-to-vector mapping.
//! - [`agents`]: idle and tree-search players.
//! - [`qd`]: constrained MAP-Elites archive and evolution loop.

pub mod agents;
pub mod engine;
pub mod gdl;
pub mod mechanics;
pub mod qd;

pub use agents::{Agent, AgentConfig, AgentKind, IdleAgent, TreeSearchAgent};
pub use engine::{Action, GameEvent, GameState, PlayTrace, Simulator, Status};
pub use gdl::{parse_game, parse_level, serialize_level, GameDescription, Level};
pub use mechanics::{extract_mechanics, vector_from_trace, MechanicCatalog, MechanicVector};
pub use qd::{Archive, EvalResult, Evolution, RunConfig};

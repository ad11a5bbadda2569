//! Shared fixtures for the benchmarks in `benches/`.

use std::sync::Arc;

use mechmap::gdl::{parse_game, GameDescription};

pub const ZELDA: &str = include_str!("../../../games/zelda.game");

pub fn zelda() -> Arc<GameDescription> {
    Arc::new(parse_game(ZELDA).expect("shipped game parses"))
}

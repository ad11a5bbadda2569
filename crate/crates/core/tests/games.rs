use std::path::PathBuf;

use mechmap::gdl::{parse_game, serialize_level, validate_level, GameDescription};
use mechmap::mechanics::extract_mechanics;
use mechmap::qd::random_level;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn load(name: &str) -> GameDescription {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../games").join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_game(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn zelda_catalog() {
    let cat = extract_mechanics(&load("zelda.game"));
    assert_eq!(
        cat.labels(),
        ["space-nokey", "space-withkey", "stepback", "kill-nokey", "kill-withkey", "sword-kill", "getkey", "touchgoal"]
    );
}

#[test]
fn solarfox_catalog() {
    let cat = extract_mechanics(&load("solarfox.game"));
    assert_eq!(
        cat.labels(),
        [
            "hit-wall",
            "hit-enemyground",
            "hit-avatar",
            "touch-powerblib",
            "spawn-more",
            "change-blib",
            "overlap-blib",
            "get-blib",
            "reverse-direction",
            "enemy-shoot"
        ]
    );
}

#[test]
fn plants_catalog() {
    let cat = extract_mechanics(&load("plants.game"));
    assert_eq!(cat.labels(), ["space", "hit-wall", "kill-plant", "zombie-goal", "pea-hit", "tomb-block", "make-plant"]);
}

#[test]
fn shipped_games_round_trip_and_generate() {
    for name in ["zelda.game", "solarfox.game", "plants.game", "drift.game"] {
        let desc = load(name);
        assert_eq!(parse_game(&desc.to_string()).unwrap(), desc, "{name}");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let l = random_level(&desc, &mut rng);
            validate_level(&l, &desc).unwrap_or_else(|e| panic!("{name}: {e}\n{}", serialize_level(&l)));
        }
    }
}

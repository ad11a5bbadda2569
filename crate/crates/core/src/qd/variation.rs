use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::gdl::{GameDescription, Level};

/// Re-rolls one random tile to a random alphabet character, then keeps going
/// with probability `continue_prob`. Returns the mutant and the number of
/// tiles re-rolled (at least one; geometric with mean `1/(1−continue_prob)`).
pub fn mutate_counted<R: Rng + ?Sized>(
    level: &Level,
    continue_prob: f64,
    alphabet: &[u8],
    rng: &mut R,
) -> (Level, usize) {
    assert!(!alphabet.is_empty(), "empty alphabet");
    assert!((0.0..1.0).contains(&continue_prob), "continue_prob must lie in [0, 1)");
    let mut out = level.clone();
    let n = out.tiles().len();
    let mut trials = 0;
    loop {
        let idx = rng.random_range(0..n);
        let ch = alphabet[rng.random_range(0..alphabet.len())];
        out.set_index(idx, ch);
        trials += 1;
        if !rng.random_bool(continue_prob) {
            break;
        }
    }
    (out, trials)
}

pub fn mutate<R: Rng + ?Sized>(level: &Level, continue_prob: f64, alphabet: &[u8], rng: &mut R) -> Level {
    mutate_counted(level, continue_prob, alphabet, rng).0
}

/// Forces exactly one avatar tile. A missing avatar replaces a random floor
/// tile (any tile when there is no floor); surplus avatars become floor,
/// keeping one chosen at random.
pub fn repair_avatar<R: Rng + ?Sized>(level: &mut Level, desc: &GameDescription, rng: &mut R) {
    let avatar = desc.avatar_char();
    let floor = desc.floor_char();
    let avatars: Vec<usize> = positions(level, avatar);
    match avatars.len() {
        1 => {}
        0 => {
            let floors = positions(level, floor);
            let idx = if floors.is_empty() {
                rng.random_range(0..level.tiles().len())
            } else {
                floors[rng.random_range(0..floors.len())]
            };
            level.set_index(idx, avatar);
        }
        n => {
            let keep = avatars[rng.random_range(0..n)];
            for idx in avatars {
                if idx != keep {
                    level.set_index(idx, floor);
                }
            }
        }
    }
}

fn positions(level: &Level, ch: u8) -> Vec<usize> {
    level.tiles().iter().enumerate().filter(|(_, &t)| t == ch).map(|(i, _)| i).collect()
}

/// Samples a level from the game's template: optional border ring, weighted
/// interior tiles, and exactly one avatar placed uniformly in the interior.
pub fn random_level<R: Rng + ?Sized>(desc: &GameDescription, rng: &mut R) -> Level {
    let template = desc.level_template();
    let (w, h) = (desc.width, desc.height);
    let chars: Vec<u8> = template.weights.iter().map(|&(c, _)| c).collect();
    let dist = WeightedIndex::new(template.weights.iter().map(|&(_, p)| p))
        .expect("template weights are validated at parse time");
    let mut level = Level::filled(w, h, desc.floor_char());
    let inset = match template.border {
        Some(_) if w > 2 && h > 2 => 1,
        _ => 0,
    };
    let mut interior = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let edge = x < inset || y < inset || x + inset >= w || y + inset >= h;
            if edge {
                level.set(x, y, template.border.expect("inset implies a border"));
            } else {
                level.set(x, y, chars[dist.sample(rng)]);
                interior.push(y * w + x);
            }
        }
    }
    let spot = interior[rng.random_range(0..interior.len())];
    level.set_index(spot, desc.avatar_char());
    level
}

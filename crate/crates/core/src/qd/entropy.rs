use crate::gdl::Level;

fn normalized_entropy(counts: &[usize], total: usize, symbols: usize) -> f64 {
    if total == 0 || symbols < 2 {
        return 0.0;
    }
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.log2()
        })
        .sum();
    // a single-symbol sum is -0.0; report it as plain zero
    if h <= 0.0 {
        return 0.0;
    }
    (h / (symbols as f64).log2()).min(1.0)
}

/// Shannon entropy of the tile distribution, normalized by `log2(alphabet_size)`.
pub fn tile_entropy(level: &Level, alphabet_size: usize) -> f64 {
    assert!(alphabet_size >= 2, "alphabet needs at least two symbols");
    let mut counts = [0usize; 256];
    for &t in level.tiles() {
        counts[t as usize] += 1;
    }
    normalized_entropy(&counts, level.tiles().len(), alphabet_size)
}

const BUCKETS: usize = 5;

/// Entropy of local sameness. Each tile scores the share of its in-bounds
/// von Neumann neighbours holding the same character; shares are binned into
/// five buckets (`floor(4r)`, so only r = 1 reaches the top bucket) and the
/// bucket distribution's entropy is normalized by `log2(5)`.
pub fn derivative_entropy(level: &Level) -> f64 {
    let (w, h) = (level.width(), level.height());
    let mut counts = [0usize; BUCKETS];
    for y in 0..h {
        for x in 0..w {
            let here = level.get(x, y);
            let (mut same, mut total) = (0usize, 0usize);
            let mut look = |nx: usize, ny: usize| {
                total += 1;
                if level.get(nx, ny) == here {
                    same += 1;
                }
            };
            if x > 0 {
                look(x - 1, y);
            }
            if x + 1 < w {
                look(x + 1, y);
            }
            if y > 0 {
                look(x, y - 1);
            }
            if y + 1 < h {
                look(x, y + 1);
            }
            // a 1x1 grid has no neighbours; count it as fully uniform
            let bucket = (4 * same).checked_div(total).map_or(BUCKETS - 1, |b| b.min(BUCKETS - 1));
            counts[bucket] += 1;
        }
    }
    normalized_entropy(&counts, w * h, BUCKETS)
}

/// `w·H(tiles) + (1−w)·H(derivative)`; lower is better.
pub fn fitness(level: &Level, w: f64, alphabet_size: usize) -> f64 {
    tile_entropy(level, alphabet_size) * w + derivative_entropy(level) * (1.0 - w)
}

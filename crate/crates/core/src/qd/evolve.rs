use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    evaluate_seeded, mutate, random_level, repair_avatar, Archive, Chromosome, EvalError, Lineage, Placement, RunConfig,
};
use crate::engine::Simulator;
use crate::gdl::{GameDescription, Level};
use crate::mechanics::{extract_mechanics, MechanicVector};

/// An unevaluated offspring.
#[derive(Clone, Debug)]
pub struct Offspring {
    pub level: Level,
    pub lineage: Lineage,
    pub seed: u64,
}

/// Builds one batch: `round(batch_size·random_fraction)` random levels, the
/// rest mutants of a uniformly chosen cell's elite or best infeasible member.
/// An empty archive yields a fully random batch. Evaluation seeds are drawn
/// here, in batch order, so results do not depend on evaluation scheduling.
pub fn next_generation<R: Rng + ?Sized>(
    archive: &Archive,
    desc: &GameDescription,
    config: &RunConfig,
    generation: u32,
    rng: &mut R,
) -> Vec<Offspring> {
    let alphabet = desc.tile_alphabet();
    let keys: Vec<&MechanicVector> = archive.cells().keys().collect();
    let n_random = if keys.is_empty() { config.batch_size } else { config.random_count() };
    let mut batch = Vec::with_capacity(config.batch_size);
    for i in 0..config.batch_size {
        if i < n_random {
            let level = random_level(desc, rng);
            batch.push(Offspring { level, lineage: Lineage::Random, seed: rng.random() });
            continue;
        }
        let key = keys[rng.random_range(0..keys.len())];
        let cell = &archive.cells()[key];
        let want_elite = rng.random_bool(config.elite_parent_prob);
        let (parent, from_elite) = match (want_elite, &cell.elite, cell.best_infeasible()) {
            (true, Some(e), _) => (e, true),
            (false, _, Some(x)) => (x, false),
            (_, Some(e), None) => (e, true),
            (_, None, Some(x)) => (x, false),
            (_, None, None) => unreachable!("archive cells are never empty"),
        };
        let mut level = mutate(&parent.level, config.mutation_continue_prob, &alphabet, rng);
        repair_avatar(&mut level, desc, rng);
        let lineage = Lineage::Mutant { parent_cell: key.clone(), from_elite, generation };
        batch.push(Offspring { level, lineage, seed: rng.random() });
    }
    batch
}

/// Per-generation summary.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerationStats {
    pub generation: u32,
    pub elite_count: usize,
    pub normalized_elite_count: f64,
    pub populated_cells: usize,
    pub mean_elite_fitness: Option<f64>,
    /// Mean constraint score of this generation's batch.
    pub mean_c: f64,
    pub evaluations: u64,
    pub placements: Vec<Placement>,
}

/// A running evolution: archive, master RNG and evaluation pool.
pub struct Evolution {
    sim: Simulator,
    config: RunConfig,
    archive: Archive,
    rng: ChaCha8Rng,
    generation: u32,
    evaluations: u64,
    pool: rayon::ThreadPool,
}

impl Evolution {
    /// `threads` sets the evaluation pool size; results do not depend on it.
    pub fn new(desc: Arc<GameDescription>, config: RunConfig, threads: usize) -> Result<Evolution, String> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().map_err(|e| e.to_string())?;
        let catalog = extract_mechanics(&desc);
        let archive = Archive::new(catalog, config.threshold, config.infeasible_cap);
        Ok(Evolution {
            sim: Simulator::new(desc),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            config,
            archive,
            generation: 0,
            evaluations: 0,
            pool,
        })
    }

    pub fn archive(&self) -> &Archive {
        &self.archive
    }

    pub fn into_archive(self) -> Archive {
        self.archive
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    /// Breeds, evaluates (in parallel) and inserts (in batch order) one batch.
    pub fn step(&mut self) -> Result<GenerationStats, EvalError> {
        self.generation += 1;
        let batch =
            next_generation(&self.archive, self.sim.description(), &self.config, self.generation, &mut self.rng);
        let (sim, config, catalog) = (&self.sim, &self.config, self.archive.catalog());
        let results: Vec<_> = self.pool.install(|| {
            batch
                .par_iter()
                .map(|o| evaluate_seeded(sim, catalog, &o.level, config, o.seed).map(|ev| ev.result))
                .collect()
        });
        let mut placements = Vec::with_capacity(batch.len());
        let mut c_sum = 0.0;
        for (o, r) in batch.into_iter().zip(results) {
            let eval = r?;
            c_sum += eval.c;
            self.evaluations += 1;
            placements.push(self.archive.insert(Chromosome { level: o.level, eval, lineage: o.lineage }));
        }
        Ok(GenerationStats {
            generation: self.generation,
            elite_count: self.archive.elite_count(),
            normalized_elite_count: self.archive.normalized_elite_count(),
            populated_cells: self.archive.populated_cells(),
            mean_elite_fitness: self.archive.mean_elite_fitness(),
            mean_c: c_sum / placements.len() as f64,
            evaluations: self.evaluations,
            placements,
        })
    }

    /// Runs the configured number of generations, reporting each.
    pub fn run(&mut self, mut observe: impl FnMut(&GenerationStats)) -> Result<(), EvalError> {
        while self.generation < self.config.iterations {
            let stats = self.step()?;
            observe(&stats);
        }
        Ok(())
    }
}

/// Single-threaded convenience wrapper around [`Evolution`].
pub fn evolve(desc: Arc<GameDescription>, config: RunConfig) -> Result<Archive, String> {
    let mut evo = Evolution::new(desc, config, 1)?;
    evo.run(|_| {}).map_err(|e| e.to_string())?;
    Ok(evo.into_archive())
}

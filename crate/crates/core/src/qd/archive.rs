use std::collections::BTreeMap;

use super::EvalResult;
use crate::gdl::Level;
use crate::mechanics::{MechanicCatalog, MechanicVector};

/// Where a chromosome came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Lineage {
    Random,
    Mutant { parent_cell: MechanicVector, from_elite: bool, generation: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chromosome {
    pub level: Level,
    pub eval: EvalResult,
    pub lineage: Lineage,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cell {
    pub elite: Option<Chromosome>,
    /// Sorted by constraint score, best first.
    pub infeasible: Vec<Chromosome>,
}

impl Cell {
    pub fn best_infeasible(&self) -> Option<&Chromosome> {
        self.infeasible.first()
    }
}

/// Outcome of an insertion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placement {
    NewElite,
    ReplacedElite,
    /// Feasible but no better than the current elite.
    RejectedElite,
    /// Kept in the infeasible population at this rank.
    Infeasible {
        rank: usize,
    },
    /// Infeasible and ranked below the population cap.
    DroppedInfeasible,
}

#[derive(Clone, Debug)]
pub struct Archive {
    catalog: MechanicCatalog,
    threshold: f64,
    infeasible_cap: usize,
    cells: BTreeMap<MechanicVector, Cell>,
}

impl Archive {
    pub fn new(catalog: MechanicCatalog, threshold: f64, infeasible_cap: usize) -> Archive {
        assert!(infeasible_cap >= 1, "infeasible_cap must be at least 1");
        Archive { catalog, threshold, infeasible_cap, cells: BTreeMap::new() }
    }

    pub fn catalog(&self) -> &MechanicCatalog {
        &self.catalog
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn infeasible_cap(&self) -> usize {
        self.infeasible_cap
    }

    /// Cells holding at least one chromosome, in vector order.
    pub fn cells(&self) -> &BTreeMap<MechanicVector, Cell> {
        &self.cells
    }

    pub fn cell(&self, key: &MechanicVector) -> Option<&Cell> {
        self.cells.get(key)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn populated_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn elites(&self) -> impl Iterator<Item = (&MechanicVector, &Chromosome)> {
        self.cells.iter().filter_map(|(k, c)| c.elite.as_ref().map(|e| (k, e)))
    }

    pub fn elite_count(&self) -> usize {
        self.elites().count()
    }

    /// Elite count divided by the number of possible cells.
    pub fn normalized_elite_count(&self) -> f64 {
        self.elite_count() as f64 / self.catalog.cell_count()
    }

    pub fn mean_elite_fitness(&self) -> Option<f64> {
        let n = self.elite_count();
        (n > 0).then(|| self.elites().map(|(_, e)| e.eval.fitness).sum::<f64>() / n as f64)
    }

    /// Adds a chromosome to the cell of its mechanic vector. A feasible one
    /// replaces the elite when its fitness is strictly lower; an infeasible
    /// one joins the ranked population, ties going behind earlier arrivals.
    pub fn insert(&mut self, chromosome: Chromosome) -> Placement {
        assert_eq!(chromosome.eval.vector.len(), self.catalog.len(), "vector length must match the catalog");
        let feasible = chromosome.eval.feasible(self.threshold);
        let cap = self.infeasible_cap;
        let cell = self.cells.entry(chromosome.eval.vector.clone()).or_default();
        if feasible {
            let placement = match &cell.elite {
                None => Placement::NewElite,
                Some(e) if chromosome.eval.fitness < e.eval.fitness => Placement::ReplacedElite,
                Some(_) => return Placement::RejectedElite,
            };
            cell.elite = Some(chromosome);
            return placement;
        }
        let c = chromosome.eval.c;
        let rank = cell.infeasible.partition_point(|x| x.eval.c >= c);
        if rank >= cap {
            // a fresh cell is never left empty: cap >= 1 means rank 0 always fits
            return Placement::DroppedInfeasible;
        }
        cell.infeasible.insert(rank, chromosome);
        cell.infeasible.truncate(cap);
        Placement::Infeasible { rank }
    }

    /// Structural checks: cell keys match member vectors, elites are
    /// feasible, infeasible members are infeasible, sorted and within the
    /// cap, and no cell is empty.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (key, cell) in &self.cells {
            if key.len() != self.catalog.len() {
                return Err(format!("cell {key}: key length {} != {}", key.len(), self.catalog.len()));
            }
            if cell.elite.is_none() && cell.infeasible.is_empty() {
                return Err(format!("cell {key} is empty"));
            }
            if let Some(e) = &cell.elite {
                if &e.eval.vector != key {
                    return Err(format!("cell {key}: elite has vector {}", e.eval.vector));
                }
                if !e.eval.feasible(self.threshold) {
                    return Err(format!("cell {key}: elite is infeasible"));
                }
            }
            if cell.infeasible.len() > self.infeasible_cap {
                return Err(format!("cell {key}: {} infeasible > cap {}", cell.infeasible.len(), self.infeasible_cap));
            }
            for (i, x) in cell.infeasible.iter().enumerate() {
                if &x.eval.vector != key {
                    return Err(format!("cell {key}: infeasible #{i} has vector {}", x.eval.vector));
                }
                if x.eval.feasible(self.threshold) {
                    return Err(format!("cell {key}: infeasible #{i} is feasible"));
                }
                if i > 0 && cell.infeasible[i - 1].eval.c < x.eval.c {
                    return Err(format!("cell {key}: infeasible population out of order at #{i}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdl::parse_game;
    use crate::mechanics::extract_mechanics;

    fn catalog() -> MechanicCatalog {
        let desc = parse_game(
            "game t\ngrid 3x3\nSpriteSet:\navatar avatar-mover\nwall immovable\n\
             InteractionSet:\navatar wall stepBack\nTerminationSet:\n\
             sprite-counter stype=avatar limit=0 loss\nLevelMapping:\n. =\nA = avatar\nw = wall\n",
        )
        .unwrap();
        extract_mechanics(&desc)
    }

    fn chrom(bits: &str, p: f64, e: f64, fitness: f64) -> Chromosome {
        Chromosome {
            level: Level::filled(3, 3, b'.'),
            eval: EvalResult {
                win: true,
                t_win: Some(1),
                t_survival: None,
                score: 0,
                idle_pass: 5,
                idle_total: 5,
                p,
                e,
                c: p + e,
                fitness,
                vector: bits.parse().unwrap(),
                seed: 0,
            },
            lineage: Lineage::Random,
        }
    }

    #[test]
    fn elite_replacement_needs_strictly_lower_fitness() {
        let mut a = Archive::new(catalog(), 0.1, 3);
        assert_eq!(a.insert(chrom("1", 1.0, 1.0, 0.5)), Placement::NewElite);
        assert_eq!(a.insert(chrom("1", 1.0, 1.0, 0.5)), Placement::RejectedElite);
        assert_eq!(a.insert(chrom("1", 1.0, 1.0, 0.4)), Placement::ReplacedElite);
        assert_eq!(a.elite_count(), 1);
        assert_eq!(a.normalized_elite_count(), 0.5);
        a.check_invariants().unwrap();
    }

    #[test]
    fn infeasible_population_is_ranked_and_capped() {
        let mut a = Archive::new(catalog(), 0.1, 3);
        assert_eq!(a.insert(chrom("0", 0.05, 1.0, 0.1)), Placement::Infeasible { rank: 0 });
        assert_eq!(a.insert(chrom("0", 0.5, 0.4, 0.1)), Placement::Infeasible { rank: 1 });
        assert_eq!(a.insert(chrom("0", 0.2, 0.4, 0.1)), Placement::Infeasible { rank: 2 });
        assert_eq!(a.insert(chrom("0", 0.05, 1.0, 0.1)), Placement::Infeasible { rank: 1 });
        assert_eq!(a.insert(chrom("0", 0.0, 0.2, 0.1)), Placement::DroppedInfeasible);
        let cell = a.cell(&"0".parse().unwrap()).unwrap();
        assert_eq!(cell.infeasible.len(), 3);
        assert!(cell.elite.is_none());
        a.check_invariants().unwrap();
    }
}

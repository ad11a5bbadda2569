//! Constrained MAP-Elites over mechanic vectors.
//!
//! Each archive cell is keyed by the binary vector of mechanics the
//! evaluation agent triggered. A cell keeps one feasible elite (lowest
//! entropy fitness wins) and a bounded infeasible population ranked by
//! constraint score, so infeasible levels keep evolving toward feasibility.

mod archive;
mod constraint;
mod entropy;
mod eval;
mod evolve;
mod variation;

pub use archive::{Archive, Cell, Chromosome, Lineage, Placement};
pub use constraint::{constraint_e, constraint_p, is_feasible};
pub use entropy::{derivative_entropy, fitness, tile_entropy};
pub use eval::{derive_seed, evaluate, evaluate_seeded, EvalError, EvalResult, Evaluation};
pub use evolve::{evolve, next_generation, Evolution, GenerationStats, Offspring};
pub use variation::{mutate, mutate_counted, random_level, repair_avatar};

use crate::agents::AgentConfig;

/// Parameters of one evolution run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub batch_size: usize,
    /// Share of each batch drawn from the random generator.
    pub random_fraction: f64,
    /// Probability of mutating a cell's elite rather than its best infeasible.
    pub elite_parent_prob: f64,
    pub threshold: f64,
    pub t_ideal: u32,
    pub idle_runs: u32,
    pub idle_pass_needed: u32,
    /// Weight of raw tile entropy against derivative entropy.
    pub w: f64,
    pub mutation_continue_prob: f64,
    /// Tick budget of an evaluation-agent episode.
    pub max_ticks: u32,
    pub iterations: u32,
    pub infeasible_cap: usize,
    pub seed: u64,
    pub agent: AgentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            batch_size: 50,
            random_fraction: 0.2,
            elite_parent_prob: 0.5,
            threshold: 0.1,
            t_ideal: 70,
            idle_runs: 5,
            idle_pass_needed: 3,
            w: 0.25,
            mutation_continue_prob: 0.5,
            max_ticks: 80,
            iterations: 500,
            infeasible_cap: 20,
            seed: 0,
            agent: AgentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.batch_size < 1 {
            return Err("batch_size must be at least 1".into());
        }
        for (name, v) in
            [("random_fraction", self.random_fraction), ("elite_parent_prob", self.elite_parent_prob), ("w", self.w)]
        {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(0.0..1.0).contains(&self.mutation_continue_prob) {
            return Err("mutation_continue_prob must lie in [0, 1)".into());
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return Err("threshold must be a non-negative number".into());
        }
        if self.idle_runs < 1 {
            return Err("idle_runs must be at least 1".into());
        }
        // the idle score switches to 1 once half of the runs pass
        if self.idle_pass_needed != self.idle_runs.div_ceil(2) {
            return Err(format!(
                "idle_pass_needed must be {} for {} idle runs",
                self.idle_runs.div_ceil(2),
                self.idle_runs
            ));
        }
        if self.max_ticks < 1 || self.t_ideal < 1 {
            return Err("max_ticks and t_ideal must be at least 1".into());
        }
        if self.infeasible_cap < 1 {
            return Err("infeasible_cap must be at least 1".into());
        }
        self.agent.validate()
    }

    /// Number of random levels per batch.
    pub fn random_count(&self) -> usize {
        (self.batch_size as f64 * self.random_fraction).round() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
        assert_eq!(RunConfig::default().random_count(), 10);
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = RunConfig { random_fraction: 1.5, ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let bad = RunConfig { idle_pass_needed: 2, ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let bad = RunConfig { batch_size: 0, ..RunConfig::default() };
        assert!(bad.validate().is_err());
        let bad = RunConfig { mutation_continue_prob: 1.0, ..RunConfig::default() };
        assert!(bad.validate().is_err());
    }
}

//! Command implementations behind the `mechmap` binary.

pub mod config;
pub mod persist;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mechmap::engine::Simulator;
use mechmap::gdl::{parse_game, parse_level, GameDescription, Level};
use mechmap::mechanics::{extract_mechanics, MechanicCatalog};
use mechmap::qd::{evaluate_seeded, EvalResult, Evolution, RunConfig};
use thiserror::Error;

pub use config::{load_config, parse_config, render_config, RunFile};
pub use persist::{ActionsFile, VerifyReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub(crate) fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub(crate) fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn load_game(path: &Path) -> Result<GameDescription, CliError> {
    parse_game(&read(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

pub fn load_level(path: &Path, desc: &GameDescription) -> Result<Level, CliError> {
    parse_level(&read(path)?, desc).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// `key=value` report of one evaluation.
pub fn format_result(result: &EvalResult, catalog: &MechanicCatalog, threshold: f64) -> String {
    let opt = |v: Option<u32>| v.map_or("-".to_string(), |t| t.to_string());
    let mut out = String::new();
    let _ = write!(
        out,
        "p={}\ne={}\nc={}\nfitness={}\nfeasible={}\nwin={}\nt_win={}\nt_survival={}\nscore={}\n\
         idle_pass={}\nidle_total={}\nvector={}\nmechanics={}\nseed={}\n",
        result.p,
        result.e,
        result.c,
        result.fitness,
        result.feasible(threshold),
        result.win,
        opt(result.t_win),
        opt(result.t_survival),
        result.score,
        result.idle_pass,
        result.idle_total,
        result.vector,
        result.vector.labels(catalog).join(","),
        result.seed,
    );
    out
}

pub struct EvalOptions<'a> {
    pub game: &'a Path,
    pub level: &'a Path,
    pub seed: u64,
    pub config: Option<&'a Path>,
    pub actions_out: Option<&'a Path>,
    pub trace_out: Option<&'a Path>,
}

/// Evaluates one level and returns the report.
pub fn cmd_eval(opts: &EvalOptions) -> Result<String, CliError> {
    let run = match opts.config {
        Some(p) => load_config(p)?.run,
        None => RunConfig::default(),
    };
    let desc = Arc::new(load_game(opts.game)?);
    let level = load_level(opts.level, &desc)?;
    let catalog = extract_mechanics(&desc);
    let sim = Simulator::new(desc.clone());
    let ev = evaluate_seeded(&sim, &catalog, &level, &run, opts.seed).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(p) = opts.actions_out {
        write(p, &ActionsFile::from_trace(&ev.trace).render())?;
    }
    if let Some(p) = opts.trace_out {
        write(p, &sim.format_trace(&ev.trace))?;
    }
    Ok(format!("game={}\n{}", desc.name, format_result(&ev.result, &catalog, run.threshold)))
}

/// Replays a recorded action file and returns the event log.
pub fn cmd_replay(game: &Path, level: &Path, actions: &Path) -> Result<String, CliError> {
    let desc = Arc::new(load_game(game)?);
    let level = load_level(level, &desc)?;
    let file =
        ActionsFile::parse(&read(actions)?).map_err(|e| CliError::Validation(format!("{}: {e}", actions.display())))?;
    let sim = Simulator::new(desc);
    let (_, trace) =
        sim.replay(&level, &file.actions, file.seed, file.max_ticks).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(sim.format_trace(&trace))
}

pub struct EvolveOptions<'a> {
    pub config: &'a Path,
    pub out: &'a Path,
    pub threads: usize,
    /// Called after every generation with a one-line summary.
    pub progress: Option<&'a mut dyn FnMut(&str)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolveSummary {
    pub generations: u32,
    pub evaluations: u64,
    pub elite_count: usize,
    pub populated_cells: usize,
    pub out: PathBuf,
}

/// Runs an evolution and writes the archive, metrics and frequencies.
pub fn cmd_evolve(opts: EvolveOptions) -> Result<EvolveSummary, CliError> {
    let file = load_config(opts.config)?;
    let game_path =
        file.game.ok_or_else(|| CliError::Validation(format!("{}: missing game key", opts.config.display())))?;
    let game_text = read(&game_path)?;
    let desc =
        Arc::new(parse_game(&game_text).map_err(|e| CliError::Validation(format!("{}: {e}", game_path.display())))?);
    if opts.threads < 1 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let out = persist::OutputDir::create(opts.out, &game_text, &file.run, &extract_mechanics(&desc))?;
    let mut evo = Evolution::new(desc, file.run, opts.threads).map_err(CliError::Validation)?;
    let mut metrics = out.metrics_writer()?;
    let mut progress = opts.progress;
    while evo.generation() < evo.config().iterations {
        let stats = evo.step().map_err(|e| CliError::Runtime(e.to_string()))?;
        metrics.row(&stats)?;
        if let Some(p) = progress.as_mut() {
            p(&format!(
                "generation {} elites {} cells {} mean_c {:.4}",
                stats.generation, stats.elite_count, stats.populated_cells, stats.mean_c
            ));
        }
    }
    metrics.finish()?;
    out.write_archive(evo.simulator(), evo.archive(), evo.config())?;
    Ok(EvolveSummary {
        generations: evo.generation(),
        evaluations: evo.evaluations(),
        elite_count: evo.archive().elite_count(),
        populated_cells: evo.archive().populated_cells(),
        out: opts.out.to_path_buf(),
    })
}

/// Re-checks a finished output directory.
pub fn cmd_verify(out: &Path) -> Result<VerifyReport, CliError> {
    persist::verify(out)
}

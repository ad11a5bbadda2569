//! Flat `key = value` run configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Every [`RunConfig`]
//! field is a key; agent settings use an `agent.` prefix. A relative `game`
//! path is resolved against the config file's directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mechmap::agents::{AgentConfig, AgentKind};
use mechmap::qd::RunConfig;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct RunFile {
    pub game: Option<PathBuf>,
    pub run: RunConfig,
}

fn value<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T, CliError> {
    raw.parse().map_err(|_| CliError::Validation(format!("config line {line}: bad value {raw:?} for {key}")))
}

pub fn parse_config(text: &str, base: &Path) -> Result<RunFile, CliError> {
    let mut run = RunConfig::default();
    let mut game = None;
    let mut seen = std::collections::BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, val) = trimmed
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| CliError::Validation(format!("config line {line}: expected key = value")))?;
        if !seen.insert(key.to_string()) {
            return Err(CliError::Validation(format!("config line {line}: duplicate key {key}")));
        }
        let a = &mut run.agent;
        match key {
            "game" => game = Some(base.join(val)),
            "batch_size" => run.batch_size = value(key, val, line)?,
            "random_fraction" => run.random_fraction = value(key, val, line)?,
            "elite_parent_prob" => run.elite_parent_prob = value(key, val, line)?,
            "threshold" => run.threshold = value(key, val, line)?,
            "t_ideal" => run.t_ideal = value(key, val, line)?,
            "idle_runs" => run.idle_runs = value(key, val, line)?,
            "idle_pass_needed" => run.idle_pass_needed = value(key, val, line)?,
            "w" => run.w = value(key, val, line)?,
            "mutation_continue_prob" => run.mutation_continue_prob = value(key, val, line)?,
            "max_ticks" => run.max_ticks = value(key, val, line)?,
            "iterations" => run.iterations = value(key, val, line)?,
            "infeasible_cap" => run.infeasible_cap = value(key, val, line)?,
            "seed" => run.seed = value(key, val, line)?,
            "agent" => {
                a.kind = match val {
                    "idle" => AgentKind::Idle,
                    "tree-search" => AgentKind::TreeSearch,
                    _ => {
                        return Err(CliError::Validation(format!(
                            "config line {line}: agent must be idle or tree-search"
                        )))
                    }
                }
            }
            "agent.node_budget" => a.node_budget = value(key, val, line)?,
            "agent.horizon" => a.horizon = value(key, val, line)?,
            "agent.win_bonus" => a.win_bonus = value(key, val, line)?,
            "agent.loss_penalty" => a.loss_penalty = value(key, val, line)?,
            "agent.depth_penalty" => a.depth_penalty = value(key, val, line)?,
            "agent.explore" => a.explore = value(key, val, line)?,
            _ => return Err(CliError::Validation(format!("config line {line}: unknown key {key}"))),
        }
    }
    run.validate().map_err(CliError::Validation)?;
    Ok(RunFile { game, run })
}

pub fn load_config(path: &Path) -> Result<RunFile, CliError> {
    let text = crate::read(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    parse_config(&text, base)
}

/// Renders every field, so the output parses back to the same config.
pub fn render_config(game: Option<&str>, run: &RunConfig) -> String {
    let mut out = String::new();
    if let Some(g) = game {
        let _ = writeln!(out, "game = {g}");
    }
    let a: &AgentConfig = &run.agent;
    let kind = match a.kind {
        AgentKind::Idle => "idle",
        AgentKind::TreeSearch => "tree-search",
    };
    let _ = write!(
        out,
        "batch_size = {}\nrandom_fraction = {}\nelite_parent_prob = {}\nthreshold = {}\nt_ideal = {}\n\
         idle_runs = {}\nidle_pass_needed = {}\nw = {}\nmutation_continue_prob = {}\nmax_ticks = {}\n\
         iterations = {}\ninfeasible_cap = {}\nseed = {}\nagent = {kind}\nagent.node_budget = {}\n\
         agent.horizon = {}\nagent.win_bonus = {}\nagent.loss_penalty = {}\nagent.depth_penalty = {}\n\
         agent.explore = {}\n",
        run.batch_size,
        run.random_fraction,
        run.elite_parent_prob,
        run.threshold,
        run.t_ideal,
        run.idle_runs,
        run.idle_pass_needed,
        run.w,
        run.mutation_continue_prob,
        run.max_ticks,
        run.iterations,
        run.infeasible_cap,
        run.seed,
        a.node_budget,
        a.horizon,
        a.win_bonus,
        a.loss_penalty,
        a.depth_penalty,
        a.explore,
    );
    out
}

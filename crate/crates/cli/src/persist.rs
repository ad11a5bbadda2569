//! Output directory layout.
//!
//! ```text
//! <out>/game.game               copy of the game description
//! <out>/config.txt              effective run configuration
//! <out>/catalog.csv             index,label,description
//! <out>/metrics.csv             one row per generation
//! <out>/mechanic_frequency.csv  label,fraction over elites
//! <out>/archive/<bits>/elite.{lvl,txt,actions,trace}
//! <out>/archive/<bits>/infeasible/<rank>.{lvl,txt}
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mechmap::engine::{Action, PlayTrace, Simulator};
use mechmap::gdl::{parse_game, parse_level, serialize_level};
use mechmap::mechanics::{extract_mechanics, MechanicCatalog, MechanicVector};
use mechmap::qd::{evaluate_seeded, Archive, Chromosome, GenerationStats, Lineage, RunConfig};

use crate::config::{parse_config, render_config};
use crate::{format_result, read, write, CliError};

fn runtime<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(runtime(path))
}

/// A recorded action sequence plus what is needed to replay it.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionsFile {
    pub seed: u64,
    pub max_ticks: Option<u32>,
    pub actions: Vec<Action>,
}

impl ActionsFile {
    pub fn from_trace(trace: &PlayTrace) -> ActionsFile {
        ActionsFile { seed: trace.seed, max_ticks: Some(trace.max_ticks), actions: trace.actions.clone() }
    }

    /// `seed=` and optional `max_ticks=` header lines, then one action per line.
    pub fn render(&self) -> String {
        let mut out = format!("seed={}\n", self.seed);
        if let Some(m) = self.max_ticks {
            out.push_str(&format!("max_ticks={m}\n"));
        }
        for a in &self.actions {
            out.push_str(a.name());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<ActionsFile, String> {
        let mut file = ActionsFile { seed: 0, max_ticks: None, actions: Vec::new() };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |what: &str| format!("line {}: {what}", i + 1);
            if let Some((k, v)) = line.split_once('=') {
                if !file.actions.is_empty() {
                    return Err(bad("header after actions"));
                }
                match k {
                    "seed" => file.seed = v.parse().map_err(|_| bad("bad seed"))?,
                    "max_ticks" => file.max_ticks = Some(v.parse().map_err(|_| bad("bad max_ticks"))?),
                    _ => return Err(bad("unknown header")),
                }
            } else {
                file.actions.push(Action::parse(line).ok_or_else(|| bad("unknown action"))?);
            }
        }
        Ok(file)
    }
}

pub const METRICS_HEADER: [&str; 7] = [
    "generation",
    "elite_count",
    "normalized_elite_count",
    "populated_cell_count",
    "mean_elite_fitness",
    "mean_c",
    "evaluations_done",
];

pub struct MetricsWriter {
    path: PathBuf,
    csv: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn row(&mut self, s: &GenerationStats) -> Result<(), CliError> {
        let fit = s.mean_elite_fitness.map_or(String::new(), |f| f.to_string());
        self.csv
            .write_record([
                s.generation.to_string(),
                s.elite_count.to_string(),
                s.normalized_elite_count.to_string(),
                s.populated_cells.to_string(),
                fit,
                s.mean_c.to_string(),
                s.evaluations.to_string(),
            ])
            .map_err(runtime(&self.path))?;
        self.csv.flush().map_err(runtime(&self.path))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.csv.flush().map_err(runtime(&self.path))
    }
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    /// Creates a fresh output directory; refuses to reuse a non-empty one.
    pub fn create(
        root: &Path,
        game_text: &str,
        run: &RunConfig,
        catalog: &MechanicCatalog,
    ) -> Result<OutputDir, CliError> {
        if root.exists() && fs::read_dir(root).map_err(runtime(root))?.next().is_some() {
            return Err(CliError::Runtime(format!("{}: output directory is not empty", root.display())));
        }
        create_dir(&root.join("archive"))?;
        write(&root.join("game.game"), game_text)?;
        write(&root.join("config.txt"), &render_config(Some("game.game"), run))?;
        write(&root.join("catalog.csv"), &catalog.to_csv())?;
        Ok(OutputDir { root: root.to_path_buf() })
    }

    pub fn metrics_writer(&self) -> Result<MetricsWriter, CliError> {
        let path = self.root.join("metrics.csv");
        let mut csv = csv::Writer::from_path(&path).map_err(runtime(&path))?;
        csv.write_record(METRICS_HEADER).map_err(runtime(&path))?;
        csv.flush().map_err(runtime(&path))?;
        Ok(MetricsWriter { path, csv })
    }

    /// Writes every cell and the mechanic frequencies. Each elite is
    /// re-evaluated under its stored seed to record its playthrough; a
    /// mismatch with the archived result is an error.
    pub fn write_archive(&self, sim: &Simulator, archive: &Archive, run: &RunConfig) -> Result<(), CliError> {
        let catalog = archive.catalog();
        for (key, cell) in archive.cells() {
            let dir = self.root.join("archive").join(key.to_string());
            create_dir(&dir)?;
            if let Some(elite) = &cell.elite {
                let ev = evaluate_seeded(sim, catalog, &elite.level, run, elite.eval.seed)
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
                if ev.result != elite.eval || !ev.result.feasible(run.threshold) {
                    return Err(CliError::Runtime(format!("cell {key}: elite does not re-evaluate identically")));
                }
                write(&dir.join("elite.lvl"), &serialize_level(&elite.level))?;
                write(&dir.join("elite.txt"), &meta(elite, catalog, run.threshold))?;
                write(&dir.join("elite.actions"), &ActionsFile::from_trace(&ev.trace).render())?;
                write(&dir.join("elite.trace"), &sim.format_trace(&ev.trace))?;
            }
            if !cell.infeasible.is_empty() {
                let inf = dir.join("infeasible");
                create_dir(&inf)?;
                for (rank, c) in cell.infeasible.iter().enumerate() {
                    write(&inf.join(format!("{rank:02}.lvl")), &serialize_level(&c.level))?;
                    write(&inf.join(format!("{rank:02}.txt")), &meta(c, catalog, run.threshold))?;
                }
            }
        }
        let vectors: Vec<&MechanicVector> = archive.elites().map(|(k, _)| k).collect();
        write_frequencies(&self.root.join("mechanic_frequency.csv"), catalog, &vectors)
    }
}

fn meta(c: &Chromosome, catalog: &MechanicCatalog, threshold: f64) -> String {
    let mut out = format_result(&c.eval, catalog, threshold);
    match &c.lineage {
        Lineage::Random => out.push_str("lineage=random\n"),
        Lineage::Mutant { parent_cell, from_elite, generation } => out.push_str(&format!(
            "lineage=mutant\nparent={parent_cell}\nparent_role={}\ngeneration={generation}\n",
            if *from_elite { "elite" } else { "infeasible" }
        )),
    }
    out
}

/// Fraction of elites whose vector contains each mechanic.
pub fn mechanic_frequency(catalog: &MechanicCatalog, vectors: &[&MechanicVector]) -> Vec<(String, f64)> {
    if vectors.is_empty() {
        return Vec::new();
    }
    catalog
        .mechanics
        .iter()
        .map(|m| {
            let n = vectors.iter().filter(|v| v.get(m.index)).count();
            (m.label.clone(), n as f64 / vectors.len() as f64)
        })
        .collect()
}

fn write_frequencies(path: &Path, catalog: &MechanicCatalog, vectors: &[&MechanicVector]) -> Result<(), CliError> {
    let mut csv = csv::Writer::from_path(path).map_err(runtime(path))?;
    csv.write_record(["label", "fraction"]).map_err(runtime(path))?;
    for (label, f) in mechanic_frequency(catalog, vectors) {
        csv.write_record([label, f.to_string()]).map_err(runtime(path))?;
    }
    csv.flush().map_err(runtime(path))
}

/// What [`verify`] checked.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub cells: usize,
    pub elites: usize,
    pub infeasible: usize,
    pub frequencies: Vec<(String, f64)>,
}

fn parse_meta(text: &str) -> BTreeMap<&str, &str> {
    text.lines().filter_map(|l| l.split_once('=')).collect()
}

/// Reloads an output directory and cross-checks it: every elite re-evaluates
/// to its stored report, is feasible and sits in the cell named by its
/// vector; its action file replays to its trace; infeasible members carry
/// their cell's vector; and the frequency file matches the elite vectors.
pub fn verify(root: &Path) -> Result<VerifyReport, CliError> {
    let fail = |msg: String| CliError::Validation(format!("{}: {msg}", root.display()));
    let run = parse_config(&read(&root.join("config.txt"))?, root)?.run;
    let desc = Arc::new(parse_game(&read(&root.join("game.game"))?).map_err(|e| fail(e.to_string()))?);
    let catalog = extract_mechanics(&desc);
    if read(&root.join("catalog.csv"))? != catalog.to_csv() {
        return Err(fail("catalog.csv does not match the game".into()));
    }
    let sim = Simulator::new(desc.clone());
    let archive_dir = root.join("archive");
    let mut names: Vec<String> = fs::read_dir(&archive_dir)
        .map_err(runtime(&archive_dir))?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<Result<_, _>>()
        .map_err(runtime(&archive_dir))?;
    names.sort();

    let mut report = VerifyReport { cells: 0, elites: 0, infeasible: 0, frequencies: Vec::new() };
    let mut elite_vectors = Vec::new();
    for name in names {
        let key: MechanicVector = name.parse().map_err(|_| fail(format!("bad cell directory {name}")))?;
        if key.len() != catalog.len() {
            return Err(fail(format!("cell {name} has the wrong width")));
        }
        report.cells += 1;
        let dir = archive_dir.join(&name);
        let elite_path = dir.join("elite.lvl");
        if elite_path.exists() {
            let level = parse_level(&read(&elite_path)?, &desc).map_err(|e| fail(format!("{name}: {e}")))?;
            let meta_text = read(&dir.join("elite.txt"))?;
            let seed: u64 = parse_meta(&meta_text)
                .get("seed")
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| fail(format!("{name}: elite.txt lacks a seed")))?;
            let ev = evaluate_seeded(&sim, &catalog, &level, &run, seed).map_err(|e| fail(e.to_string()))?;
            if ev.result.vector != key || !ev.result.feasible(run.threshold) {
                return Err(fail(format!(
                    "{name}: elite re-evaluates to {} (feasible {})",
                    ev.result.vector,
                    ev.result.feasible(run.threshold)
                )));
            }
            if !meta_text.starts_with(&format_result(&ev.result, &catalog, run.threshold)) {
                return Err(fail(format!("{name}: elite.txt differs from re-evaluation")));
            }
            let actions =
                ActionsFile::parse(&read(&dir.join("elite.actions"))?).map_err(|e| fail(format!("{name}: {e}")))?;
            let (_, trace) = sim
                .replay(&level, &actions.actions, actions.seed, actions.max_ticks)
                .map_err(|e| fail(e.to_string()))?;
            if sim.format_trace(&trace) != read(&dir.join("elite.trace"))? {
                return Err(fail(format!("{name}: replay differs from elite.trace")));
            }
            report.elites += 1;
            elite_vectors.push(key.clone());
        }
        let inf_dir = dir.join("infeasible");
        if inf_dir.exists() {
            let mut metas: Vec<PathBuf> = fs::read_dir(&inf_dir)
                .map_err(runtime(&inf_dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            metas.sort();
            for m in metas {
                let text = read(&m)?;
                let fields = parse_meta(&text);
                if fields.get("vector") != Some(&name.as_str()) || fields.get("feasible") != Some(&"false") {
                    return Err(fail(format!("{}: not an infeasible member of {name}", m.display())));
                }
                report.infeasible += 1;
            }
        }
    }

    let refs: Vec<&MechanicVector> = elite_vectors.iter().collect();
    report.frequencies = mechanic_frequency(&catalog, &refs);
    let path = root.join("mechanic_frequency.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(runtime(&path))?;
    let stored: Vec<(String, String)> = reader
        .records()
        .map(|r| r.map(|r| (r[0].to_string(), r[1].to_string())))
        .collect::<Result<_, _>>()
        .map_err(runtime(&path))?;
    let expected: Vec<(String, String)> = report.frequencies.iter().map(|(l, f)| (l.clone(), f.to_string())).collect();
    if stored != expected {
        return Err(fail("mechanic_frequency.csv does not match the elite vectors".into()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn actions_file_round_trip() {
        let f = ActionsFile { seed: 9, max_ticks: Some(80), actions: vec![Action::Up, Action::Use, Action::Nil] };
        assert_eq!(ActionsFile::parse(&f.render()).unwrap(), f);
        assert_eq!(ActionsFile::parse("").unwrap(), ActionsFile { seed: 0, max_ticks: None, actions: vec![] });
        assert!(ActionsFile::parse("seed=1\njump\n").is_err());
        assert!(ActionsFile::parse("up\nseed=1\n").is_err());
    }
}

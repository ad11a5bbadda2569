use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mechmap_cli::{cmd_eval, cmd_evolve, cmd_replay, cmd_verify, CliError, EvalOptions, EvolveOptions};

#[derive(Parser)]
#[command(name = "mechmap", version, about = "Evolve levels that cover different game mechanics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an evolution and write the archive and metrics.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Evaluation worker threads; results do not depend on this.
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Suppress per-generation progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate one level and print key=value scores.
    Eval {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        level: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run configuration (agent, t_ideal, ...); defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the agent's actions for `replay`.
        #[arg(long)]
        actions_out: Option<PathBuf>,
        /// Write the agent's event log.
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Replay recorded actions and print the event log.
    Replay {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        level: PathBuf,
        #[arg(long)]
        actions: PathBuf,
    },
    /// Cross-check an evolve output directory.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Evolve { config, out, threads, quiet } => {
            let mut log = |line: &str| eprintln!("{line}");
            let summary = cmd_evolve(EvolveOptions {
                config: &config,
                out: &out,
                threads,
                progress: if quiet { None } else { Some(&mut log) },
            })?;
            println!("generations={}", summary.generations);
            println!("evaluations={}", summary.evaluations);
            println!("elite_cells={}", summary.elite_count);
            println!("populated_cells={}", summary.populated_cells);
            println!("out={}", summary.out.display());
        }
        Command::Eval { game, level, seed, config, actions_out, trace_out } => {
            print!(
                "{}",
                cmd_eval(&EvalOptions {
                    game: &game,
                    level: &level,
                    seed,
                    config: config.as_deref(),
                    actions_out: actions_out.as_deref(),
                    trace_out: trace_out.as_deref(),
                })?
            );
        }
        Command::Replay { game, level, actions } => print!("{}", cmd_replay(&game, &level, &actions)?),
        Command::Verify { out } => {
            let r = cmd_verify(&out)?;
            println!("cells={}", r.cells);
            println!("elites={}", r.elites);
            println!("infeasible={}", r.infeasible);
            for (label, f) in r.frequencies {
                println!("frequency.{label}={f}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mechmap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

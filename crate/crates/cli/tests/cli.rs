use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mechmap");

fn games() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../games")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const ZELDA_FIXTURE: &str = "\
wwwwwwwwwwww
w..........w
w.A+.g.....w
w..........w
w..........w
w..........w
w..........w
w..........w
w..........w
wwwwwwwwwwww
";

fn drift_config(dir: &Path, iterations: u32) -> PathBuf {
    let conf = dir.join("drift.conf");
    let text = fs::read_to_string(games().join("drift.conf")).unwrap().replace("game = drift.game", "");
    let text = format!(
        "game = {}\n{}",
        games().join("drift.game").display(),
        text.replace("iterations = 200", &format!("iterations = {iterations}"))
    );
    fs::write(&conf, text).unwrap();
    conf
}

#[test]
fn zero_iterations_leave_empty_archive_and_header_only_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = drift_config(tmp.path(), 0);
    let out = tmp.path().join("out");
    let o = run(&["evolve", "--config", p(&conf), "--out", p(&out), "--quiet"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(fs::read_dir(out.join("archive")).unwrap().count(), 0);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1);
    assert!(metrics.starts_with("generation,elite_count,normalized_elite_count,"));
    assert_eq!(fs::read_to_string(out.join("mechanic_frequency.csv")).unwrap(), "label,fraction\n");
}

#[test]
fn evolve_writes_metrics_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = drift_config(tmp.path(), 30);
    let out = tmp.path().join("out");
    let o = run(&["evolve", "--config", p(&conf), "--out", p(&out), "--threads", "2", "--quiet"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("generations=30"));

    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let rows: Vec<Vec<String>> = metrics.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 30);
    let counts: Vec<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    for r in &rows {
        let normalized: f64 = r[2].parse().unwrap();
        assert_eq!(normalized, r[1].parse::<f64>().unwrap() / 4.0);
    }

    let v = run(&["verify", "--out", p(&out)]);
    assert!(v.status.success(), "{v:?}");
    assert!(stdout(&v).contains("frequency.exit="));

    // a tampered frequency file is caught
    fs::write(out.join("mechanic_frequency.csv"), "label,fraction\nexit,0.1\nhit,0.9\n").unwrap();
    assert_eq!(run(&["verify", "--out", p(&out)]).status.code(), Some(2));
}

#[test]
fn evolve_refuses_non_empty_output() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = drift_config(tmp.path(), 1);
    let o = run(&["evolve", "--config", p(&conf), "--out", p(tmp.path()), "--quiet"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn eval_reports_key_and_door() {
    let tmp = tempfile::tempdir().unwrap();
    let level = tmp.path().join("z.lvl");
    fs::write(&level, ZELDA_FIXTURE).unwrap();
    let o = run(&["eval", "--game", p(&games().join("zelda.game")), "--level", p(&level), "--seed", "3"]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("\nwin=true\n"), "{text}");
    assert!(text.contains("\nmechanics=getkey,touchgoal\n"), "{text}");
    assert!(text.contains("\nvector=00000011\n"), "{text}");
    assert!(text.contains("\nfeasible=false\n"), "a 3-tick win is far from the ideal time\n{text}");
}

#[test]
fn eval_uniform_level_has_zero_fitness() {
    let tmp = tempfile::tempdir().unwrap();
    let game = tmp.path().join("dot.game");
    fs::write(
        &game,
        "game dot\ngrid 1x1\nSpriteSet:\navatar avatar-mover\nInteractionSet:\nTerminationSet:\n\
         timeout ticks=70 win\nLevelMapping:\n. =\nA = avatar\n",
    )
    .unwrap();
    let level = tmp.path().join("dot.lvl");
    fs::write(&level, "A\n").unwrap();
    let o = run(&["eval", "--game", p(&game), "--level", p(&level)]);
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("\nfitness=0\n"), "{text}");
    assert!(text.contains("\nfeasible=true\n"), "{text}");
}

#[test]
fn error_exit_codes() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["eval", "--level", "x"]).status.code(), Some(1));
    let o = run(&["eval", "--game", "/nonexistent.game", "--level", "/nonexistent.lvl"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonexistent.game"));

    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "game = x.game\nbatch_size = many\n").unwrap();
    let o = run(&["evolve", "--config", p(&conf), "--out", p(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let game = tmp.path().join("bad.game");
    fs::write(
        &game,
        "game g\ngrid 2x2\nSpriteSet:\navatar avatar-mover\nInteractionSet:\navatar ghost stepBack\n\
         TerminationSet:\ntimeout ticks=5 win\nLevelMapping:\n. =\nA = avatar\n",
    )
    .unwrap();
    let lvl = tmp.path().join("l.lvl");
    fs::write(&lvl, "A.\n..\n").unwrap();
    let o = run(&["eval", "--game", p(&game), "--level", p(&lvl)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("ghost"));
}

#[test]
fn replay_matches_recorded_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let level = tmp.path().join("z.lvl");
    fs::write(&level, ZELDA_FIXTURE).unwrap();
    let zelda = games().join("zelda.game");
    let (actions, trace) = (tmp.path().join("a.txt"), tmp.path().join("t.txt"));
    let o = run(&[
        "eval",
        "--game",
        p(&zelda),
        "--level",
        p(&level),
        "--seed",
        "5",
        "--actions-out",
        p(&actions),
        "--trace-out",
        p(&trace),
    ]);
    assert!(o.status.success(), "{o:?}");
    let replay = run(&["replay", "--game", p(&zelda), "--level", p(&level), "--actions", p(&actions)]);
    assert!(replay.status.success());
    let recorded = fs::read_to_string(&trace).unwrap();
    assert_eq!(stdout(&replay), recorded);
    assert!(recorded.ends_with("final\tstatus=win\ttick=3\tscore=2\n"), "{recorded}");
}

#[test]
fn replay_of_empty_and_truncated_action_files() {
    let tmp = tempfile::tempdir().unwrap();
    let level = tmp.path().join("z.lvl");
    fs::write(&level, ZELDA_FIXTURE).unwrap();
    let zelda = games().join("zelda.game");
    let actions = tmp.path().join("a.txt");

    fs::write(&actions, "").unwrap();
    let o = run(&["replay", "--game", p(&zelda), "--level", p(&level), "--actions", p(&actions)]);
    assert_eq!(stdout(&o), "final\tstatus=running\ttick=0\tscore=0\n");

    // one step picks up the key; the door is never reached
    fs::write(&actions, "seed=1\nmax_ticks=80\nright\n").unwrap();
    let o = run(&["replay", "--game", p(&zelda), "--level", p(&level), "--actions", p(&actions)]);
    assert_eq!(stdout(&o), "1\tcollision\t4\tkey,avatar\nfinal\tstatus=running\ttick=1\tscore=1\n");

    fs::write(&actions, "jump\n").unwrap();
    let o = run(&["replay", "--game", p(&zelda), "--level", p(&level), "--actions", p(&actions)]);
    assert_eq!(o.status.code(), Some(2));
}

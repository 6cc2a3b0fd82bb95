//! Whole-stack scenario runs: project file + world through the scenario
//! harness, judged by the verdicts and logs each run leaves behind.

use std::path::{Path, PathBuf};

use brickmind::engine::ExecMode;
use brickmind::harness::{run_scenario, RunVerdict, ScenarioConfig};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(project: &str, world: &str, mode: Option<ExecMode>, out: &Path) -> RunVerdict {
    run_scenario(&ScenarioConfig {
        project_path: scenario(project),
        world_path: scenario(world),
        mode,
        out_dir: Some(out.to_path_buf()),
        ..Default::default()
    })
    .expect("scenario runs")
}

fn read(dir: &Path, rel: &str) -> String {
    std::fs::read_to_string(dir.join(rel)).unwrap_or_else(|e| panic!("read {rel}: {e}"))
}

fn check_failures(v: &RunVerdict) -> Vec<String> {
    v.checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{} measured={} wanted {}", c.name, c.measured, c.limit))
        .collect()
}

#[test]
fn line_follower_reaches_the_end_of_the_track() {
    let dir = tempfile::tempdir().unwrap();
    let v = run("linefollower.mas2j", "linefollower.world", None, dir.path());
    assert!(v.passed, "verdict failed: {:?}", check_failures(&v));
    assert!(v.completion_reached, "run should end at the track end, not on the clock");

    // The follower holds the line the whole way: both mounts stay inside
    // the painted band except for sub-half-second corrections.
    let band = v.metrics["longest_band_exit_ms"];
    assert!(band < 500.0, "longest band exit was {band} ms");

    // It never stops driving forward at the programmed speed.
    let wire = read(dir.path(), "wire/nxt1.log");
    let fwd: Vec<&str> = wire.lines().filter(|l| l.contains("|FWD|")).collect();
    assert!(!fwd.is_empty());
    assert!(
        fwd.iter().all(|l| l.ends_with("|60,60")),
        "every forward command drives both wheels at 60"
    );
}

#[test]
fn crossing_sends_one_hint_per_obstacle_position() {
    for (k, world) in
        [(1, "crossing-k1.world"), (2, "crossing-k2.world"), (3, "crossing-k3.world")]
    {
        let dir = tempfile::tempdir().unwrap();
        let v = run("crossing.mas2j", world, None, dir.path());
        assert!(v.passed, "{world} verdict failed: {:?}", check_failures(&v));

        // The finder tells the blind robot exactly once, naming the bar
        // count it had reached when the obstacle came into range.
        let finder = read(dir.path(), "cycles/obstaclefinder.log");
        let sends: Vec<&str> = finder.lines().filter(|l| l.contains("|S|")).collect();
        assert_eq!(sends.len(), 1, "{world}: {sends:?}");
        assert!(
            sends[0].ends_with(&format!("S|blindagent|obstacle_after({k})")),
            "{world}: {}",
            sends[0]
        );

        // The blind robot swaps to its avoidance goal right after the
        // matching bar count lands in its beliefs.
        let blind = read(dir.path(), "cycles/blindagent.log");
        let cycle_of = |needle: &str| -> u64 {
            blind
                .lines()
                .find(|l| l.contains(needle))
                .unwrap_or_else(|| panic!("{world}: no '{needle}' line"))
                .split('|')
                .next()
                .unwrap()
                .parse()
                .unwrap()
        };
        let counted = cycle_of(&format!("B|+|bars_passed({k})"));
        let adopted = cycle_of("B|+|goal(avoid)");
        assert!(
            adopted >= counted && adopted - counted <= 2,
            "{world}: counted bar {k} at cycle {counted}, avoidance at {adopted}"
        );
    }
}

#[test]
fn crossing_completes_in_sync_mode() {
    let dir = tempfile::tempdir().unwrap();
    let v = run("crossing.mas2j", "crossing-k2.world", Some(ExecMode::Sync), dir.path());
    assert!(v.passed, "verdict failed: {:?}", check_failures(&v));

    // Synchronous minds never run a cycle without fresh percepts, and the
    // ack gate keeps commands and acknowledgements strictly paired.
    for agent in ["obstaclefinder", "blindagent"] {
        let log = read(dir.path(), &format!("cycles/{agent}.log"));
        let empty = log.lines().filter(|l| l.ends_with("|Q|0")).count();
        assert_eq!(empty, 0, "{agent} ran {empty} cycles without percepts");
    }
    assert!(v.checks.iter().any(|c| c.name == "sync_actions_pair_with_acks" && c.passed));
}

#[test]
fn bumper_stop_keeps_the_robot_short_of_the_wall() {
    let dir = tempfile::tempdir().unwrap();
    let v = run("sensortest.mas2j", "sensortest.world", None, dir.path());
    assert!(v.passed, "verdict failed: {:?}", check_failures(&v));

    // Contact comes at x = 290 (bumper 110 mm ahead of a wall at 400);
    // the brake lands within the filter + transport + reasoning delay.
    let trace = read(dir.path(), "poses/nxt1.trace");
    let last = trace.lines().last().unwrap();
    let fields: Vec<f64> = last.split(' ').skip(1).map(|f| f.parse().unwrap()).collect();
    let (x, y) = (fields[0], fields[1]);
    assert!(x > 285.0 && x < 310.0, "stopped at x={x}");
    assert_eq!(y, 0.0, "a straight approach never leaves the axis");
}

#[test]
fn zero_agent_project_completes_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let project = dir.path().join("nobody.mas2j");
    std::fs::write(&project, "// an intentionally empty system\n").unwrap();
    let world = dir.path().join("empty.world");
    std::fs::write(&world, "preset = empty\nmax_time_ms = 5000\n").unwrap();

    for free_running in [false, true] {
        let out = dir.path().join(format!("out-{free_running}"));
        let v = run_scenario(&ScenarioConfig {
            project_path: project.clone(),
            world_path: world.clone(),
            free_running,
            out_dir: Some(out),
            ..Default::default()
        })
        .expect("an empty system is a valid scenario");
        assert!(v.passed, "verdict failed: {:?}", check_failures(&v));
        assert!(
            v.sim_time_ms < 1000,
            "nothing to run, so the run should end at once, not after {} ms",
            v.sim_time_ms
        );
    }
}

#[test]
fn free_running_mode_drives_the_bumper_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let v = run_scenario(&ScenarioConfig {
        project_path: scenario("sensortest.mas2j"),
        world_path: scenario("sensortest.world"),
        max_time_ms: Some(3000),
        free_running: true,
        out_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    })
    .expect("scenario runs");
    assert!(v.passed, "verdict failed: {:?}", check_failures(&v));
    assert!(read(dir.path(), "run.meta").contains("drive = free-running"));

    // Threads really drove the robot: it covered ground, streamed percepts
    // over the wire and ran reasoning cycles.
    let trace = read(dir.path(), "poses/nxt1.trace");
    let last = trace.lines().last().expect("trace has samples");
    let x: f64 = last.split(' ').nth(1).unwrap().parse().unwrap();
    assert!(x > 20.0, "three seconds of forward driving only reached x={x}");
    assert!(read(dir.path(), "wire/nxt1.log").lines().count() > 10);
    assert!(read(dir.path(), "cycles/sensortest.log").lines().count() > 10);
    assert!(
        v.checks.iter().any(|c| c.name == "wire_log_matches_counters" && c.passed),
        "the recorded transport counters must match the wire log"
    );
}

#[test]
fn same_seed_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run("sensortest.mas2j", "sensortest.world", None, a.path());
    run("sensortest.mas2j", "sensortest.world", None, b.path());
    for rel in ["poses/nxt1.trace", "wire/nxt1.log", "cycles/sensortest.log", "verdict.txt"] {
        assert_eq!(read(a.path(), rel), read(b.path(), rel), "{rel} differs between runs");
    }
}

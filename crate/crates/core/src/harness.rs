//! Scenario harness: loads a project and a world, wires every robot to its
//! agent over an in-process link, runs the lock-step simulation and writes
//! the run artifacts (pose traces, wire logs, cycle logs, verdict).
//!
//! A run directory can be re-scored at any time with [`evaluate_run`]: all
//! metrics are recomputed from the recorded files, so a replay gives the
//! same verdict byte for byte.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bridge::{channel_link, Latency, LinkHandle};
use crate::engine::{Agent, ExecMode, Registry};
use crate::parser::{
    parse_agent_program, parse_project_file, AgentProgram, BodyStep, Condition, Context,
    ParseError, ProjectConfig, ProjectError, SensorKind,
};
use crate::sim::world::{CompletionRule, Terrain, World, WorldError};
use crate::sim::{NxtBrick, RobotBody, SensorMount};
use crate::term::{Term, TermKind};

/// What to run and which knobs override the world file.
#[derive(Clone, Debug, Default)]
pub struct ScenarioConfig {
    pub project_path: PathBuf,
    pub world_path: PathBuf,
    pub mode: Option<ExecMode>,
    pub seed: Option<u64>,
    pub tick_ms: Option<u64>,
    pub latency: Option<Latency>,
    pub max_time_ms: Option<u64>,
    pub ack_timeout_ms: Option<u64>,
    /// Drive every robot and mind on its own thread against the wall clock
    /// instead of the deterministic lock-step loop. Free-running runs are
    /// not reproducible; the mode exists to exercise the concurrency
    /// contract, not for scoring experiments.
    pub free_running: bool,
    /// Run directory; derived from the inputs when not given.
    pub out_dir: Option<PathBuf>,
}

const DEFAULT_TICK_MS: u64 = 10;
const DEFAULT_ACK_TIMEOUT_MS: u64 = 1000;

/// One scored check from the verdict.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    /// `<op> <limit>` as written in the world file.
    pub limit: String,
}

/// The outcome of a run (or of re-scoring a run directory).
#[derive(Clone, Debug)]
pub struct RunVerdict {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
    pub out_dir: PathBuf,
    pub sim_time_ms: u64,
    pub completion_reached: bool,
    /// Every computed metric, including ones no check references.
    pub metrics: HashMap<String, f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Project(#[from] ProjectError),
    #[error("{path}: {source}")]
    Asl { path: String, source: ParseError },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

/// FNV-1a, used to derive one RNG stream per named noise source.
fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn rng_stream(base_seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(base_seed ^ fnv1a(label))
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn mode_name(mode: ExecMode) -> &'static str {
    match mode {
        ExecMode::Sync => "sync",
        ExecMode::Async => "async",
    }
}

fn latency_name(l: Latency) -> String {
    if l.jitter_ms == 0 {
        format!("{}", l.base_ms)
    } else {
        format!("{}+-{}", l.base_ms, l.jitter_ms)
    }
}

/// Integers print bare; everything else gets three decimals.
fn fmt_metric(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e12 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

// --- static validation -----------------------------------------------------

/// Root functors of percepts, keyed by the sensor kind that produces them.
const PERCEPT_SENSORS: [(&str, SensorKind); 4] = [
    ("light", SensorKind::Light),
    ("obstacle", SensorKind::Ultrasonic),
    ("touching", SensorKind::Touch),
    ("sound", SensorKind::Sound),
];

fn collect_literal_roots(ctx: &Context, out: &mut Vec<String>) {
    fn walk(c: &Condition, out: &mut Vec<String>) {
        match c {
            Condition::Literal(t) => {
                if let Some((f, _)) = t.functor_arity() {
                    out.push(f.to_string());
                }
            }
            Condition::Relation(..) => {}
            Condition::Not(inner) => walk(inner, out),
        }
    }
    for c in &ctx.0 {
        walk(c, out);
    }
}

/// Motor atoms named in an action's first argument, when it is a literal
/// list (a variable list cannot be checked statically).
fn action_motor_atoms(action: &Term) -> Vec<String> {
    let Some((functor, _)) = action.functor_arity() else { return Vec::new() };
    if matches!(functor, "block" | "exit") {
        return Vec::new();
    }
    let Some(first) = action.args().first() else { return Vec::new() };
    let TermKind::List(items) = &first.kind else { return Vec::new() };
    items
        .iter()
        .filter_map(|t| match t.functor_arity() {
            Some((name, 0)) => Some(name.to_string()),
            _ => None,
        })
        .collect()
}

fn validate(
    project: &ProjectConfig,
    programs: &[AgentProgram],
    world: &World,
) -> Result<(), HarnessError> {
    // A project with no agents is a valid (empty) system; the run completes
    // immediately.
    let mut problems = Vec::new();
    let agent_names: Vec<&str> = project.agents.iter().map(|a| a.name.as_str()).collect();
    for (i, cfg) in project.agents.iter().enumerate() {
        if project.agents[..i].iter().any(|other| other.btname == cfg.btname) {
            problems.push(format!("robot name '{}' is used by two agents", cfg.btname));
        }
        if world.placement(&cfg.btname).is_none() {
            problems.push(format!(
                "agent '{}': the world places no robot named '{}'",
                cfg.name, cfg.btname
            ));
        }
        let program = &programs[i];

        // Which percept families the program reacts to or queries.
        let mut roots = Vec::new();
        for plan in &program.plans {
            if !plan.trigger.kind.is_goal() {
                if let Some((f, _)) = plan.trigger.term.functor_arity() {
                    roots.push(f.to_string());
                }
            }
            collect_literal_roots(&plan.context, &mut roots);
        }
        for rule in &program.rules {
            collect_literal_roots(&rule.body, &mut roots);
        }
        for (functor, kind) in PERCEPT_SENSORS {
            if roots.iter().any(|r| r == functor) && !cfg.sensors.contains(&kind) {
                problems.push(format!(
                    "agent '{}' reacts to {functor}(..) percepts but no {kind} sensor is configured",
                    cfg.name
                ));
            }
        }

        for plan in &program.plans {
            for step in &plan.body {
                match step {
                    BodyStep::Action(t) => {
                        for m in action_motor_atoms(t) {
                            let idx = match m.as_str() {
                                "a" => 0,
                                "b" => 1,
                                "c" => 2,
                                other => {
                                    problems.push(format!(
                                        "agent '{}' line {}: unknown motor '{other}'",
                                        cfg.name, plan.line
                                    ));
                                    continue;
                                }
                            };
                            if !cfg.motors[idx] {
                                problems.push(format!(
                                    "agent '{}' line {}: motor '{m}' is not connected",
                                    cfg.name, plan.line
                                ));
                            }
                        }
                    }
                    BodyStep::Internal(name, args) if name == "send" => {
                        if let Some(receiver) = args.first() {
                            if let Some((to, 0)) = receiver.functor_arity() {
                                if !agent_names.contains(&to) {
                                    problems.push(format!(
                                        "agent '{}' line {}: .send to unknown agent '{to}'",
                                        cfg.name, plan.line
                                    ));
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Invalid(problems))
    }
}

// --- the run ---------------------------------------------------------------

struct Resolved {
    mode: ExecMode,
    seed: u64,
    tick_ms: u64,
    latency: Latency,
    max_time_ms: u64,
    ack_timeout_ms: u64,
}

fn resolve(cfg: &ScenarioConfig, world: &World) -> Resolved {
    Resolved {
        mode: cfg.mode.unwrap_or(ExecMode::Async),
        seed: cfg.seed.unwrap_or(world.seed),
        tick_ms: cfg.tick_ms.or(world.tick_ms).unwrap_or(DEFAULT_TICK_MS).max(1),
        latency: cfg.latency.or(world.latency).unwrap_or_default(),
        max_time_ms: cfg.max_time_ms.unwrap_or(world.max_time_ms),
        ack_timeout_ms: cfg
            .ack_timeout_ms
            .or(world.ack_timeout_ms)
            .unwrap_or(DEFAULT_ACK_TIMEOUT_MS),
    }
}

fn default_out_dir(cfg: &ScenarioConfig, r: &Resolved) -> PathBuf {
    let base = std::env::var_os("BRICKMIND_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    base.join(format!(
        "{}__{}__{}__s{}",
        stem(&cfg.project_path),
        stem(&cfg.world_path),
        mode_name(r.mode),
        r.seed
    ))
}

fn completion_met(rule: CompletionRule, positions: &[(f64, f64)]) -> bool {
    match rule {
        CompletionRule::LineEnd { x, y, radius } => positions
            .iter()
            .any(|&(px, py)| ((px - x).powi(2) + (py - y).powi(2)).sqrt() <= radius),
        CompletionRule::AllPastX { x } => positions.iter().all(|&(px, _)| px > x),
        CompletionRule::RunToMaxTime => false,
    }
}

/// What a drive loop hands back for artifact writing.
struct DriveResult {
    bricks: Vec<NxtBrick>,
    agents: Vec<Agent>,
    /// One pose trace per brick, already formatted as `t x y heading` lines.
    traces: Vec<String>,
    completion: &'static str,
    sim_time_ms: u64,
}

/// Deterministic driver: one shared clock, robots tick first, then minds,
/// one pose sample per tick.
fn drive_lock_step(
    world: &World,
    mut bricks: Vec<NxtBrick>,
    mut agents: Vec<Agent>,
    r: &Resolved,
) -> DriveResult {
    let mut traces: Vec<String> = vec![String::new(); bricks.len()];
    let mut completion = "timeout";
    let mut sim_time_ms = r.max_time_ms;
    let mut t = 0;
    loop {
        for brick in &mut bricks {
            brick.tick(world, t, r.tick_ms);
        }
        for agent in &mut agents {
            agent.cycle(t);
        }
        for (i, brick) in bricks.iter().enumerate() {
            let b = &brick.body;
            let _ = writeln!(traces[i], "{t} {:.3} {:.3} {:.3}", b.x, b.y, b.heading);
        }
        let positions: Vec<(f64, f64)> = bricks.iter().map(|b| (b.body.x, b.body.y)).collect();
        if completion_met(world.completion, &positions) {
            completion = "reached";
            sim_time_ms = t;
            break;
        }
        if agents.iter().all(|a| a.done()) && bricks.iter().all(|b| b.halted()) {
            completion = "halted";
            sim_time_ms = t;
            break;
        }
        t += r.tick_ms;
        if t > r.max_time_ms {
            if matches!(world.completion, CompletionRule::RunToMaxTime) {
                completion = "reached";
            }
            break;
        }
    }
    DriveResult { bricks, agents, traces, completion, sim_time_ms }
}

/// Threaded driver: every brick and every mind spins on its own thread
/// against the wall clock, talking over the same latency-modelled links.
/// Scheduling is up to the OS, so repeated runs differ; scoring still works
/// because the verdict is recomputed from whatever was recorded.
fn drive_free_running(
    world: &World,
    bricks: Vec<NxtBrick>,
    agents: Vec<Agent>,
    r: &Resolved,
) -> DriveResult {
    let start = Instant::now();
    let now_ms = move || start.elapsed().as_millis() as u64;
    let stop = AtomicBool::new(false);
    let positions: Vec<Mutex<(f64, f64)>> =
        bricks.iter().map(|b| Mutex::new((b.body.x, b.body.y))).collect();
    let halted: Vec<AtomicBool> = bricks.iter().map(|b| AtomicBool::new(b.halted())).collect();
    let done: Vec<AtomicBool> = agents.iter().map(|a| AtomicBool::new(a.done())).collect();

    let mut completion = "timeout";
    let mut sim_time_ms = r.max_time_ms;
    let (bricks_and_traces, agents): (Vec<(NxtBrick, String)>, Vec<Agent>) =
        thread::scope(|scope| {
            let brick_threads: Vec<_> = bricks
                .into_iter()
                .enumerate()
                .map(|(i, mut brick)| {
                    let (stop, positions, halted) = (&stop, &positions, &halted);
                    scope.spawn(move || {
                        let mut trace = String::new();
                        let mut last = 0u64;
                        let mut next_pose_at = 0u64;
                        while !stop.load(Ordering::Relaxed) {
                            let now = now_ms();
                            if now > last {
                                brick.tick(world, now, now - last);
                                last = now;
                            }
                            if now >= next_pose_at {
                                let b = &brick.body;
                                let _ = writeln!(
                                    trace,
                                    "{now} {:.3} {:.3} {:.3}",
                                    b.x, b.y, b.heading
                                );
                                *positions[i].lock().expect("pose lock") = (b.x, b.y);
                                next_pose_at = now + r.tick_ms;
                            }
                            halted[i].store(brick.halted(), Ordering::Relaxed);
                            thread::sleep(Duration::from_millis(1));
                        }
                        (brick, trace)
                    })
                })
                .collect();
            let agent_threads: Vec<_> = agents
                .into_iter()
                .enumerate()
                .map(|(i, mut agent)| {
                    let (stop, done) = (&stop, &done);
                    scope.spawn(move || {
                        while !stop.load(Ordering::Relaxed) {
                            agent.cycle(now_ms());
                            done[i].store(agent.done(), Ordering::Relaxed);
                            thread::sleep(Duration::from_millis(r.tick_ms));
                        }
                        agent
                    })
                })
                .collect();

            loop {
                thread::sleep(Duration::from_millis(2));
                let now = now_ms();
                let snapshot: Vec<(f64, f64)> =
                    positions.iter().map(|p| *p.lock().expect("pose lock")).collect();
                if completion_met(world.completion, &snapshot) {
                    completion = "reached";
                    sim_time_ms = now;
                    break;
                }
                if done.iter().all(|d| d.load(Ordering::Relaxed))
                    && halted.iter().all(|h| h.load(Ordering::Relaxed))
                {
                    completion = "halted";
                    sim_time_ms = now;
                    break;
                }
                if now > r.max_time_ms {
                    if matches!(world.completion, CompletionRule::RunToMaxTime) {
                        completion = "reached";
                    }
                    break;
                }
            }
            stop.store(true, Ordering::Relaxed);
            (
                brick_threads
                    .into_iter()
                    .map(|h| h.join().expect("brick thread panicked"))
                    .collect(),
                agent_threads
                    .into_iter()
                    .map(|h| h.join().expect("mind thread panicked"))
                    .collect(),
            )
        });
    let (bricks, traces) = bricks_and_traces.into_iter().unzip();
    DriveResult { bricks, agents, traces, completion, sim_time_ms }
}

/// Run a project against a world and score it. The returned verdict is also
/// written into the run directory.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunVerdict, HarnessError> {
    let project = parse_project_file(&cfg.project_path)?;
    let world = World::load(&cfg.world_path)?;
    let project_dir = cfg.project_path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let mut programs = Vec::new();
    for agent in &project.agents {
        let src_path = project_dir.join(&agent.source);
        let src = fs::read_to_string(&src_path).map_err(|e| io_err(&src_path, e))?;
        let program = parse_agent_program(&src)
            .map_err(|e| HarnessError::Asl { path: src_path.display().to_string(), source: e })?;
        programs.push(program);
    }
    validate(&project, &programs, &world)?;

    let r = resolve(cfg, &world);
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| default_out_dir(cfg, &r));
    for sub in ["poses", "wire", "cycles"] {
        let p = out_dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| io_err(&p, e))?;
    }

    // Wire one robot/agent pair per project entry.
    let registry = Registry::new();
    let mut bricks: Vec<NxtBrick> = Vec::new();
    let mut agents: Vec<Agent> = Vec::new();
    let mut handles: Vec<LinkHandle> = Vec::new();
    for (cfg_a, program) in project.agents.iter().zip(programs) {
        let placement = world.placement(&cfg_a.btname).expect("validated above");
        let (mind, robot, handle) = channel_link(
            r.latency,
            rng_stream(r.seed, &format!("wire:{}:>", cfg_a.btname)),
            rng_stream(r.seed, &format!("wire:{}:<", cfg_a.btname)),
        );
        let body = RobotBody::new(placement, cfg_a.motors);
        let mounts: Vec<SensorMount> = cfg_a
            .sensors
            .iter()
            .enumerate()
            .filter(|(_, kind)| **kind != SensorKind::None)
            .map(|(i, kind)| {
                SensorMount::new(
                    (i + 1) as u8,
                    *kind,
                    placement.mounts[i],
                    rng_stream(r.seed, &format!("sensor:{}:{}", cfg_a.btname, i + 1)),
                )
            })
            .collect();
        bricks.push(NxtBrick::new(
            cfg_a.btname.clone(),
            body,
            mounts,
            Box::new(robot),
            cfg_a.sleep_ms,
        ));
        agents.push(Agent::new(
            cfg_a.name.clone(),
            program,
            cfg_a.patterns.clone(),
            Box::new(mind),
            &registry,
            r.mode,
            r.ack_timeout_ms,
        ));
        handles.push(handle);
    }

    let DriveResult { bricks, agents, traces, completion, sim_time_ms } = if cfg.free_running {
        drive_free_running(&world, bricks, agents, &r)
    } else {
        drive_lock_step(&world, bricks, agents, &r)
    };

    // Artifacts.
    for (i, brick) in bricks.iter().enumerate() {
        let p = out_dir.join("poses").join(format!("{}.trace", brick.btname));
        fs::write(&p, &traces[i]).map_err(|e| io_err(&p, e))?;
        let p = out_dir.join("wire").join(format!("{}.log", brick.btname));
        let mut log = handles[i].wire_log().join("\n");
        if !log.is_empty() {
            log.push('\n');
        }
        fs::write(&p, log).map_err(|e| io_err(&p, e))?;
    }
    for agent in &agents {
        let p = out_dir.join("cycles").join(format!("{}.log", agent.name()));
        let mut log = agent.log_lines().join("\n");
        if !log.is_empty() {
            log.push('\n');
        }
        fs::write(&p, log).map_err(|e| io_err(&p, e))?;
    }

    let abs = |p: &Path| {
        p.canonicalize().unwrap_or_else(|_| p.to_path_buf()).display().to_string()
    };
    let mut meta = String::new();
    let _ = writeln!(meta, "project = {}", abs(&cfg.project_path));
    let _ = writeln!(meta, "world = {}", abs(&cfg.world_path));
    let _ = writeln!(meta, "mode = {}", mode_name(r.mode));
    let _ = writeln!(meta, "seed = {}", r.seed);
    let _ = writeln!(meta, "tick_ms = {}", r.tick_ms);
    let _ = writeln!(meta, "latency = {}", latency_name(r.latency));
    let _ = writeln!(meta, "max_time_ms = {}", r.max_time_ms);
    let _ = writeln!(meta, "ack_timeout_ms = {}", r.ack_timeout_ms);
    let _ = writeln!(
        meta,
        "drive = {}",
        if cfg.free_running { "free-running" } else { "lock-step" }
    );
    let _ = writeln!(
        meta,
        "robots = {}",
        project.agents.iter().map(|a| a.btname.as_str()).collect::<Vec<_>>().join(",")
    );
    let _ = writeln!(
        meta,
        "agents = {}",
        project.agents.iter().map(|a| a.name.as_str()).collect::<Vec<_>>().join(",")
    );
    for cfg_a in &project.agents {
        let placement = world.placement(&cfg_a.btname).expect("validated above");
        let mounts: Vec<String> = cfg_a
            .sensors
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == SensorKind::Light)
            .map(|(i, _)| {
                let m = placement.mounts[i];
                format!("{},{}", m.forward_mm, m.lateral_mm)
            })
            .collect();
        if !mounts.is_empty() {
            let _ = writeln!(meta, "light_mounts.{} = {}", cfg_a.btname, mounts.join(";"));
        }
    }
    // Live transport counters, one per link; scoring cross-checks them
    // against the wire logs on disk.
    for (i, brick) in bricks.iter().enumerate() {
        let _ = writeln!(meta, "wire_records.{} = {}", brick.btname, handles[i].stats().total());
    }
    let _ = writeln!(meta, "completion = {completion}");
    let _ = writeln!(meta, "sim_time_ms = {sim_time_ms}");
    let p = out_dir.join("run.meta");
    fs::write(&p, meta).map_err(|e| io_err(&p, e))?;

    evaluate_run(&out_dir)
}

// --- scoring ---------------------------------------------------------------

struct RunMeta {
    world: PathBuf,
    mode: ExecMode,
    robots: Vec<String>,
    agents: Vec<String>,
    completion: String,
    sim_time_ms: u64,
    /// Light-sensor mount offsets per robot: (forward_mm, lateral_mm).
    light_mounts: HashMap<String, Vec<(f64, f64)>>,
    /// Transport record counters per robot, as counted by the live link.
    wire_records: HashMap<String, u64>,
}

fn read_meta(out_dir: &Path) -> Result<RunMeta, HarnessError> {
    let p = out_dir.join("run.meta");
    let src = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
    let mut fields: HashMap<&str, &str> = HashMap::new();
    let mut light_mounts: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    let mut wire_records: HashMap<String, u64> = HashMap::new();
    for line in src.lines() {
        let Some((k, v)) = line.split_once('=') else { continue };
        let (k, v) = (k.trim(), v.trim());
        if let Some(btname) = k.strip_prefix("light_mounts.") {
            let mounts = v
                .split(';')
                .filter_map(|pair| {
                    let (f, l) = pair.split_once(',')?;
                    Some((f.trim().parse().ok()?, l.trim().parse().ok()?))
                })
                .collect();
            light_mounts.insert(btname.to_string(), mounts);
        } else if let Some(btname) = k.strip_prefix("wire_records.") {
            if let Ok(n) = v.parse() {
                wire_records.insert(btname.to_string(), n);
            }
        } else {
            fields.insert(k, v);
        }
    }
    let get = |k: &str| -> Result<&str, HarnessError> {
        fields.get(k).copied().ok_or_else(|| {
            HarnessError::Invalid(vec![format!("run.meta is missing '{k}'")])
        })
    };
    // A zero-agent run writes empty robots/agents lists.
    let list = |v: &str| -> Vec<String> {
        v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
    };
    Ok(RunMeta {
        world: PathBuf::from(get("world")?),
        mode: match get("mode")? {
            "sync" => ExecMode::Sync,
            _ => ExecMode::Async,
        },
        robots: list(get("robots")?),
        agents: list(get("agents")?),
        completion: get("completion")?.to_string(),
        sim_time_ms: get("sim_time_ms")?.parse().map_err(|_| {
            HarnessError::Invalid(vec!["run.meta sim_time_ms is not a number".into()])
        })?,
        light_mounts,
        wire_records,
    })
}

#[derive(Clone, Copy)]
struct PoseSample {
    t: u64,
    x: f64,
    y: f64,
    heading: f64,
}

impl PoseSample {
    /// World position of a point mounted (forward, lateral) on the robot.
    fn offset(&self, forward: f64, lateral: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        (self.x + forward * c - lateral * s, self.y + forward * s + lateral * c)
    }
}

fn read_trace(path: &Path) -> Result<Vec<PoseSample>, HarnessError> {
    let src = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for line in src.lines() {
        let mut it = line.split_whitespace();
        let (Some(t), Some(x), Some(y), Some(h)) = (it.next(), it.next(), it.next(), it.next())
        else {
            continue;
        };
        let (Ok(t), Ok(x), Ok(y), Ok(heading)) = (t.parse(), x.parse(), y.parse(), h.parse())
        else {
            continue;
        };
        out.push(PoseSample { t, x, y, heading });
    }
    Ok(out)
}

/// Center distance to the nearest painted line segment.
fn line_distance(world: &World, x: f64, y: f64) -> Option<f64> {
    match &world.terrain {
        Terrain::LineTrack { segments, .. } => segments
            .iter()
            .map(|s| s.distance_to(x, y))
            .min_by(|a, b| a.partial_cmp(b).expect("distances are finite")),
        _ => None,
    }
}

/// Count entries into an overlapping state along a boolean timeline.
fn count_entries(overlaps: impl Iterator<Item = bool>) -> u64 {
    let mut count = 0;
    let mut prev = false;
    for o in overlaps {
        if o && !prev {
            count += 1;
        }
        prev = o;
    }
    count
}

/// Re-score a run directory from its recorded artifacts.
pub fn evaluate_run(out_dir: &Path) -> Result<RunVerdict, HarnessError> {
    let meta = read_meta(out_dir)?;
    let world = World::load(&meta.world)?;
    let mut traces: Vec<Vec<PoseSample>> = Vec::new();
    for btname in &meta.robots {
        traces.push(read_trace(&out_dir.join("poses").join(format!("{btname}.trace")))?);
    }

    let mut metrics: HashMap<String, f64> = HashMap::new();
    metrics.insert("sim_time_ms".into(), meta.sim_time_ms as f64);
    metrics.insert(
        "completion_reached".into(),
        if meta.completion == "reached" { 1.0 } else { 0.0 },
    );

    if let Some(last) = traces.first().and_then(|poses| poses.last()) {
        if let CompletionRule::LineEnd { x, y, .. } = world.completion {
            let d = ((last.x - x).powi(2) + (last.y - y).powi(2)).sqrt();
            metrics.insert("final_distance_to_end_mm".into(), d);
        }
    }
    if let Terrain::LineTrack { half_width, .. } = &world.terrain {
        let half_width = *half_width;
        // Path deviation of the lead robot, measured at its center.
        if let Some(poses) = traces.first() {
            let mut max_dev: f64 = 0.0;
            for p in poses {
                max_dev = max_dev.max(line_distance(&world, p.x, p.y).unwrap_or(0.0));
            }
            metrics.insert("max_lateral_dev_mm".into(), max_dev);
        }
        // Longest stretch any light mount spent off the painted band
        // (robot center when a trace has no recorded light mounts).
        let mut longest_exit = 0u64;
        let center = vec![(0.0, 0.0)];
        for (i, btname) in meta.robots.iter().enumerate() {
            let poses = &traces[i];
            for (f, l) in meta.light_mounts.get(btname).unwrap_or(&center) {
                let mut exit_started: Option<u64> = None;
                let mut last_t = 0;
                for p in poses {
                    let (px, py) = p.offset(*f, *l);
                    let d = line_distance(&world, px, py).unwrap_or(0.0);
                    if d > half_width {
                        exit_started.get_or_insert(p.t);
                    } else if let Some(start) = exit_started.take() {
                        longest_exit = longest_exit.max(p.t - start);
                    }
                    last_t = p.t;
                }
                if let Some(start) = exit_started {
                    longest_exit = longest_exit.max(last_t.saturating_sub(start));
                }
            }
        }
        metrics.insert("longest_band_exit_ms".into(), longest_exit as f64);
    }
    if !traces.is_empty() && traces.iter().all(|t| !t.is_empty()) {
        let final_min_x = traces
            .iter()
            .map(|t| t.last().expect("checked").x)
            .fold(f64::INFINITY, f64::min);
        metrics.insert("min_final_x".into(), final_min_x);
    }

    // Collisions: overlap-entry events between robot footprints and between
    // each robot and each static obstacle, recomputed from the traces.
    let mut collisions = 0u64;
    let radii: Vec<f64> = meta
        .robots
        .iter()
        .map(|b| world.placement(b).map(|p| p.footprint_radius_mm).unwrap_or(0.0))
        .collect();
    let steps = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    for i in 0..traces.len() {
        for j in (i + 1)..traces.len() {
            let limit = radii[i] + radii[j];
            collisions += count_entries((0..steps).map(|k| {
                let (a, b) = (traces[i][k], traces[j][k]);
                ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() < limit
            }));
        }
        for rect in &world.obstacles {
            collisions += count_entries(
                traces[i].iter().map(|p| rect.circle_overlap(p.x, p.y, radii[i])),
            );
        }
    }
    metrics.insert("collisions".into(), collisions as f64);

    let mut checks = Vec::new();
    for spec in &world.checks {
        let measured = metrics.get(&spec.metric).copied().unwrap_or(f64::NAN);
        checks.push(CheckOutcome {
            name: spec.metric.clone(),
            passed: !measured.is_nan() && spec.op.holds(measured, spec.value),
            measured,
            limit: format!("{} {}", spec.op.as_str(), fmt_metric(spec.value)),
        });
    }
    checks.extend(structural_checks(out_dir, &meta)?);

    let passed = checks.iter().all(|c| c.passed);
    let mut verdict = String::new();
    for c in &checks {
        let _ = writeln!(
            verdict,
            "check|{}|{}|measured={}|limit={}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            fmt_metric(c.measured),
            c.limit
        );
    }
    let _ = writeln!(verdict, "result|{}", if passed { "PASS" } else { "FAIL" });
    let p = out_dir.join("verdict.txt");
    fs::write(&p, verdict).map_err(|e| io_err(&p, e))?;

    Ok(RunVerdict {
        passed,
        checks,
        out_dir: out_dir.to_path_buf(),
        sim_time_ms: meta.sim_time_ms,
        completion_reached: meta.completion == "reached",
        metrics,
    })
}

/// Transport/log invariants that hold for every healthy run.
fn structural_checks(out_dir: &Path, meta: &RunMeta) -> Result<Vec<CheckOutcome>, HarnessError> {
    let mut out = Vec::new();

    // Every ack on the wire answers a command that was sent before it.
    let mut orphan_acks = 0u64;
    let mut counted_records = 0u64;
    for btname in &meta.robots {
        let p = out_dir.join("wire").join(format!("{btname}.log"));
        let src = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
        let mut cmd_ids = Vec::new();
        for line in src.lines() {
            counted_records += 1;
            let mut parts = line.split('|');
            let (Some(_t), Some(_dir), Some(kind)) = (parts.next(), parts.next(), parts.next())
            else {
                continue;
            };
            match kind {
                "A" => {
                    if let Some(Ok(id)) = parts.next().map(str::parse::<u64>) {
                        cmd_ids.push(id);
                    }
                }
                "K" => match parts.next().map(str::parse::<u64>) {
                    Some(Ok(id)) if cmd_ids.contains(&id) => {}
                    _ => orphan_acks += 1,
                },
                _ => {}
            }
        }
    }
    out.push(CheckOutcome {
        name: "wire_acks_answer_commands".into(),
        passed: orphan_acks == 0,
        measured: orphan_acks as f64,
        limit: "== 0".into(),
    });

    // The transport counters recorded by the live links agree with the wire
    // logs on disk (skipped for runs recorded without counters).
    if meta.robots.iter().all(|b| meta.wire_records.contains_key(b)) {
        let recorded: u64 = meta.robots.iter().filter_map(|b| meta.wire_records.get(b)).sum();
        out.push(CheckOutcome {
            name: "wire_log_matches_counters".into(),
            passed: counted_records == recorded,
            measured: counted_records as f64,
            limit: format!("== {recorded}"),
        });
    }

    // Sync mode: every non-exit action is consumed through exactly one ack
    // (the final action may still be in flight when the run stops).
    if meta.mode == ExecMode::Sync {
        let mut violations = 0u64;
        for agent in &meta.agents {
            let p = out_dir.join("cycles").join(format!("{agent}.log"));
            let src = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
            let mut dispatched = 0i64;
            let mut acked = 0i64;
            for line in src.lines() {
                let mut parts = line.split('|');
                let (_c, _t, kind) = (parts.next(), parts.next(), parts.next());
                match kind {
                    Some("A") => {
                        if parts.next() != Some("exit") {
                            dispatched += 1;
                        }
                    }
                    Some("K") => acked += 1,
                    _ => {}
                }
            }
            if !(0..=1).contains(&(dispatched - acked)) {
                violations += 1;
            }
        }
        out.push(CheckOutcome {
            name: "sync_actions_pair_with_acks".into(),
            passed: violations == 0,
            measured: violations as f64,
            limit: "== 0".into(),
        });
    }
    Ok(out)
}

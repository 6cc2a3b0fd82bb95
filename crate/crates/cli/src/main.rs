//! Command-line front end: run a scenario and score it, syntax-check an
//! agent program, or re-score a recorded run directory.
//!
//! Exit codes: 0 when everything passed, 1 when a run's verdict failed a
//! check, 2 for configuration problems (bad flags, missing files, invalid
//! scenarios, syntax errors).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use brickmind::bridge::Latency;
use brickmind::engine::ExecMode;
use brickmind::harness::{evaluate_run, run_scenario, RunVerdict, ScenarioConfig};
use brickmind::parser::parse_agent_program;
use brickmind::sim::world::parse_latency;

#[derive(Parser)]
#[command(
    name = "brickmind",
    version,
    about = "BDI agents driving simulated NXT robots",
    after_help = "Environment:\n  \
        BRICKMIND_OUT  base directory for run artifacts when --out is not given\n  \
        RUST_LOG       log verbosity (error, warn, info, debug, trace)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a project against a world and score the result.
    Run(RunArgs),
    /// Syntax-check an agent program and print its structure.
    Parse {
        /// Path to an .asl agent program.
        file: PathBuf,
    },
    /// Re-score a recorded run directory from its artifacts.
    Replay {
        /// Run directory holding run.meta, poses/, wire/ and cycles/.
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Gate every reasoning cycle on fresh percepts and action acks.
    Sync,
    /// Let minds cycle freely while percepts stream in.
    Async,
}

#[derive(Args)]
struct RunArgs {
    /// Project file listing the agents and their robots.
    project: PathBuf,
    /// World file with terrain, robot placements and checks.
    world: PathBuf,
    /// Reasoning mode (defaults to async).
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Base RNG seed (overrides the world file).
    #[arg(long)]
    seed: Option<u64>,
    /// Lock-step tick in milliseconds (overrides the world file).
    #[arg(long, value_name = "MS")]
    tick: Option<u64>,
    /// One-way transport latency (overrides the world file).
    #[arg(long, value_name = "MS[+-JITTER]", value_parser = latency_arg)]
    latency: Option<Latency>,
    /// Give up after this much simulated time (overrides the world file).
    #[arg(long, value_name = "MS")]
    max_time: Option<u64>,
    /// How long a synchronous mind waits for an action ack.
    #[arg(long, value_name = "MS")]
    ack_timeout: Option<u64>,
    /// Drive robots and minds on their own threads against the wall clock.
    /// Not reproducible; the deterministic lock-step loop is the default.
    #[arg(long)]
    free_running: bool,
    /// Run directory (defaults under $BRICKMIND_OUT, or ./runs).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn latency_arg(s: &str) -> Result<Latency, String> {
    parse_latency(s).ok_or_else(|| format!("expected MS or MS+-JITTER (e.g. 30 or 30+-20), found '{s}'"))
}

fn main() -> ExitCode {
    env_logger::init();
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Parse { file } => cmd_parse(&file),
        Command::Replay { dir } => cmd_replay(&dir),
    }
}

fn cmd_run(a: RunArgs) -> ExitCode {
    let cfg = ScenarioConfig {
        project_path: a.project,
        world_path: a.world,
        mode: a.mode.map(|m| match m {
            ModeArg::Sync => ExecMode::Sync,
            ModeArg::Async => ExecMode::Async,
        }),
        seed: a.seed,
        tick_ms: a.tick,
        latency: a.latency,
        max_time_ms: a.max_time,
        ack_timeout_ms: a.ack_timeout,
        free_running: a.free_running,
        out_dir: a.out,
    };
    match run_scenario(&cfg) {
        Ok(v) => print_verdict(&v),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_parse(file: &Path) -> ExitCode {
    let src = match fs::read_to_string(file) {
        Ok(src) => src,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(2);
        }
    };
    let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    match parse_agent_program(&src) {
        Ok(p) => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "{name}: {} beliefs, {} rules, {} initial goals, {} plans",
                p.initial_beliefs.len(),
                p.rules.len(),
                p.initial_goals.len(),
                p.plans.len()
            );
            for b in &p.initial_beliefs {
                let _ = writeln!(out, "  belief  {b}.");
            }
            for r in &p.rules {
                let _ = writeln!(out, "  rule    {r}");
            }
            for g in &p.initial_goals {
                let _ = writeln!(out, "  goal    !{g}.");
            }
            for plan in &p.plans {
                let _ = writeln!(out, "  plan    {plan}  (line {})", plan.line);
            }
            print_all(&out);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{name}: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_replay(dir: &Path) -> ExitCode {
    match evaluate_run(dir) {
        Ok(v) => print_verdict(&v),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Integers print bare; everything else gets three decimals.
fn fmt_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e12 {
        format!("{}", v as i64)
    } else {
        format!("{v:.3}")
    }
}

/// Writes to stdout, swallowing errors: a reader that closes the pipe early
/// (`brickmind ... | head`) must not turn a scored run into a panic, and the
/// exit code should keep reflecting the verdict.
fn print_all(text: &str) {
    use std::io::Write as _;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print_verdict(v: &RunVerdict) -> ExitCode {
    let mut out = String::new();
    for c in &v.checks {
        let _ = writeln!(
            out,
            "{} {}: measured {}, wanted {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            fmt_value(c.measured),
            c.limit
        );
    }
    let _ = writeln!(
        out,
        "verdict: {} ({} ms simulated, artifacts in {})",
        if v.passed { "PASS" } else { "FAIL" },
        v.sim_time_ms,
        v.out_dir.display()
    );
    print_all(&out);
    if v.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

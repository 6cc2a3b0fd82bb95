//! A BDI agent runtime that drives simulated Lego NXT robots.
//!
//! The crate is split along the runtime's natural seams:
//!
//! * [`term`] — logic terms, unification and arithmetic/relational evaluation
//! * [`parser`] — agent programs (`.asl`) and project files (`.mas2j`)
//! * [`beliefs`] — the belief base with uniqueness patterns and rule resolution
//! * [`engine`] — events, intentions and the reasoning cycle
//! * [`wire`] — the line-oriented wire format spoken between mind and brick
//! * [`bridge`] — transport endpoints, latency injection, counters
//! * [`sim`] — robot body, motors, sensors and worlds
//! * [`harness`] — scenario runner, verdicts, traces and replay

pub mod beliefs;
pub mod bridge;
pub mod engine;
pub mod harness;
pub mod parser;
pub mod sim;
pub mod wire;
pub mod term;

pub use engine::{Agent, CycleReport, ExecMode, Registry};
pub use harness::{run_scenario, evaluate_run, RunVerdict, ScenarioConfig};
pub use parser::{parse_agent_program, parse_project_file, AgentProgram, ProjectConfig};
pub use term::{Subst, Term};

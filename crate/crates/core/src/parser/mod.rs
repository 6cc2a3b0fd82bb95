//! Parsers for agent programs, project files and trigger patterns.
//!
//! [`parse_agent_program`] handles `.asl` sources, [`parse_project_file`]
//! handles the project description listing agents and their robots, and
//! [`parse_trigger_pattern`] handles the quoted trigger strings `.wait`
//! takes at runtime.

mod asl;
pub mod ast;
mod lexer;
mod project;

pub use asl::{parse_agent_program, parse_term, parse_trigger_pattern};
pub use ast::{AgentProgram, BodyStep, Condition, Context, Plan, Rule, Trigger, TriggerKind};
pub use project::{
    parse_project_file, parse_project_str, AgentConfig, ProjectConfig, ProjectError, SensorKind,
};

/// A syntax error with a 1-based source position.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, col {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

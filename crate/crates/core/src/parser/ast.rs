//! Syntax tree for agent programs, shared by the parser, the belief base
//! (rules, context queries) and the engine (plans, triggers, body steps).
//!
//! Every type prints in the canonical surface syntax; re-parsing printed
//! output yields a structurally equal tree.

use std::fmt;

use crate::term::{RelOp, Term};

/// `+`/`-` on a trigger: belief or goal addition vs. deletion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TriggerKind {
    AddBelief,
    DelBelief,
    AddGoal,
    DelGoal,
}

impl TriggerKind {
    pub fn is_goal(self) -> bool {
        matches!(self, TriggerKind::AddGoal | TriggerKind::DelGoal)
    }

    pub fn is_addition(self) -> bool {
        matches!(self, TriggerKind::AddBelief | TriggerKind::AddGoal)
    }
}

/// A triggering event pattern: `+b`, `-b`, `+!g` or `-!g`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trigger {
    pub kind: TriggerKind,
    pub term: Term,
}

impl fmt::Display for Trigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.kind {
            TriggerKind::AddBelief => "+",
            TriggerKind::DelBelief => "-",
            TriggerKind::AddGoal => "+!",
            TriggerKind::DelGoal => "-!",
        };
        write!(f, "{prefix}{}", self.term)
    }
}

/// One conjunct of a context formula or rule body.
#[derive(Clone, Debug, PartialEq)]
pub enum Condition {
    /// A belief/rule literal to resolve against the belief base.
    Literal(Term),
    Relation(RelOp, Term, Term),
    /// Negation as failure over a single literal or relation.
    Not(Box<Condition>),
}

impl Condition {
    pub fn rename_vars(&self, suffix: &str) -> Condition {
        match self {
            Condition::Literal(t) => Condition::Literal(t.rename_vars(suffix)),
            Condition::Relation(op, l, r) => {
                Condition::Relation(*op, l.rename_vars(suffix), r.rename_vars(suffix))
            }
            Condition::Not(inner) => Condition::Not(Box::new(inner.rename_vars(suffix))),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Literal(t) => write!(f, "{t}"),
            Condition::Relation(op, l, r) => write!(f, "{l} {op} {r}"),
            Condition::Not(inner) => write!(f, "not {inner}"),
        }
    }
}

/// A conjunction of conditions; empty means `true`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Context(pub Vec<Condition>);

impl Context {
    pub fn always() -> Context {
        Context(Vec::new())
    }

    pub fn is_true(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rename_vars(&self, suffix: &str) -> Context {
        Context(self.0.iter().map(|c| c.rename_vars(suffix)).collect())
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "true");
        }
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// A derivation rule `head :- body.`
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub head: Term,
    pub body: Context,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- {}.", self.head, self.body)
    }
}

/// One step of a plan body.
#[derive(Clone, Debug, PartialEq)]
pub enum BodyStep {
    /// Environment action sent through the bridge, e.g. `forward([a,b],[60,60])`.
    Action(Term),
    /// `.name(args…)`; args empty for the bare form (`.drop_all_desires`).
    Internal(String, Vec<Term>),
    /// `!g` — subgoal on the same intention.
    Achieve(Term),
    /// `!!g` — goal posted as its own new intention.
    AchieveAsync(Term),
    /// `?b` — test goal.
    Test(Term),
    /// `+b`
    AddBelief(Term),
    /// `-b`
    DelBelief(Term),
    /// `-+b` — atomic replace.
    ReplaceBelief(Term),
    /// e.g. `BarsPassed = N + 1`
    Relation(RelOp, Term, Term),
}

impl fmt::Display for BodyStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyStep::Action(t) => write!(f, "{t}"),
            BodyStep::Internal(name, args) => {
                write!(f, ".{name}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ",")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
            BodyStep::Achieve(t) => write!(f, "!{t}"),
            BodyStep::AchieveAsync(t) => write!(f, "!!{t}"),
            BodyStep::Test(t) => write!(f, "?{t}"),
            BodyStep::AddBelief(t) => write!(f, "+{t}"),
            BodyStep::DelBelief(t) => write!(f, "-{t}"),
            BodyStep::ReplaceBelief(t) => write!(f, "-+{t}"),
            BodyStep::Relation(op, l, r) => write!(f, "{l} {op} {r}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Plan {
    pub trigger: Trigger,
    pub context: Context,
    pub body: Vec<BodyStep>,
    /// Source line of the trigger, for diagnostics.
    pub line: usize,
}

/// Plans compare by what they say, not where they were written: the
/// diagnostic line number is ignored so reformatting keeps programs equal.
impl PartialEq for Plan {
    fn eq(&self, other: &Plan) -> bool {
        self.trigger == other.trigger && self.context == other.context && self.body == other.body
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.trigger)?;
        if !self.context.is_true() {
            write!(f, " : {}", self.context)?;
        }
        if !self.body.is_empty() {
            write!(f, " <- ")?;
            for (i, s) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, "; ")?;
                }
                write!(f, "{s}")?;
            }
        }
        write!(f, ".")
    }
}

/// A parsed agent program, in source order throughout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AgentProgram {
    pub initial_beliefs: Vec<Term>,
    pub rules: Vec<Rule>,
    pub initial_goals: Vec<Term>,
    pub plans: Vec<Plan>,
}

impl AgentProgram {
    /// Canonical source text; parsing it again yields an equal program.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for b in &self.initial_beliefs {
            out.push_str(&format!("{b}.\n"));
        }
        for r in &self.rules {
            out.push_str(&format!("{r}\n"));
        }
        for g in &self.initial_goals {
            out.push_str(&format!("!{g}.\n"));
        }
        for p in &self.plans {
            out.push_str(&format!("{p}\n"));
        }
        out
    }
}

impl fmt::Display for AgentProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_source())
    }
}

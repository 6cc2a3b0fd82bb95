//! Recursive-descent parser for agent programs.
//!
//! The grammar is the minimal subset the shipped scenarios use: initial
//! beliefs, rules (`head :- context.`), initial goals (`!g.`) and plans
//! (`trigger : context <- body.`), with the four trigger forms `+b`, `-b`,
//! `+!g`, `-!g` and annotations only on literals.

use crate::term::{RelOp, Term, TermKind};

use super::ast::{AgentProgram, BodyStep, Condition, Context, Plan, Rule, Trigger, TriggerKind};
use super::lexer::{lex, Tok, Token};
use super::ParseError;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn at(&self, tok: &Tok) -> bool {
        &self.peek().tok == tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(self.err_here(format!("expected {tok}, found {}", self.peek().tok)))
        }
    }

    fn err_here(&self, message: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError { line: t.line, col: t.col, message: message.into() }
    }

    // --- terms ---------------------------------------------------------

    /// Additive expression: `mult ((+|-) mult)*`.
    fn parse_expr(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.parse_mult()?;
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.parse_mult()?;
                lhs = Term::structure("+", vec![lhs, rhs]);
            } else if self.eat(&Tok::Minus) {
                let rhs = self.parse_mult()?;
                lhs = Term::structure("-", vec![lhs, rhs]);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_mult(&mut self) -> Result<Term, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            if self.eat(&Tok::Star) {
                let rhs = self.parse_unary()?;
                lhs = Term::structure("*", vec![lhs, rhs]);
            } else if self.eat(&Tok::Slash) {
                let rhs = self.parse_unary()?;
                lhs = Term::structure("/", vec![lhs, rhs]);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn parse_unary(&mut self) -> Result<Term, ParseError> {
        if self.eat(&Tok::Minus) {
            let inner = self.parse_unary()?;
            // Fold a negated numeric literal so `-30` is a plain number.
            if let TermKind::Number(v) = inner.kind {
                if inner.annots.is_empty() {
                    return Ok(Term::number(-v));
                }
            }
            return Ok(Term::structure("-", vec![inner]));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Term, ParseError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Term::number(v))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Term::string(s))
            }
            Tok::Var(name) => {
                self.bump();
                Ok(Term::var(name))
            }
            Tok::Ident(_) => self.parse_literal(),
            Tok::LBracket => {
                self.bump();
                let mut items = Vec::new();
                if !self.eat(&Tok::RBracket) {
                    loop {
                        items.push(self.parse_expr()?);
                        if self.eat(&Tok::Comma) {
                            continue;
                        }
                        self.expect(Tok::RBracket)?;
                        break;
                    }
                }
                Ok(Term::list(items))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.parse_expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            other => Err(self.err_here(format!("expected a term, found {other}"))),
        }
    }

    /// A literal: identifier, optional argument list, optional annotations.
    fn parse_literal(&mut self) -> Result<Term, ParseError> {
        let t = self.bump();
        let Tok::Ident(name) = t.tok else {
            return Err(ParseError {
                line: t.line,
                col: t.col,
                message: format!("expected a literal, found {}", t.tok),
            });
        };
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                args.push(self.parse_expr()?);
                if self.eat(&Tok::Comma) {
                    continue;
                }
                self.expect(Tok::RParen)?;
                break;
            }
        }
        let mut term = Term::structure(name, args);
        if self.eat(&Tok::LBracket) {
            let mut annots = Vec::new();
            loop {
                annots.push(self.parse_expr()?);
                if self.eat(&Tok::Comma) {
                    continue;
                }
                self.expect(Tok::RBracket)?;
                break;
            }
            term = term.with_annots(annots);
        }
        Ok(term)
    }

    // --- contexts ------------------------------------------------------

    fn eat_relop(&mut self) -> Option<RelOp> {
        let op = match self.peek().tok {
            Tok::Lt => RelOp::Lt,
            Tok::Le => RelOp::Le,
            Tok::Gt => RelOp::Gt,
            Tok::Ge => RelOp::Ge,
            Tok::EqEq => RelOp::StructEq,
            Tok::Ne => RelOp::StructNe,
            Tok::Eq => RelOp::Unify,
            _ => return None,
        };
        self.bump();
        Some(op)
    }

    fn parse_condition(&mut self) -> Result<Condition, ParseError> {
        if matches!(&self.peek().tok, Tok::Ident(name) if name == "not") {
            let at = (self.peek().line, self.peek().col);
            self.bump();
            let inner = self.parse_condition()?;
            if matches!(inner, Condition::Not(_)) {
                return Err(ParseError {
                    line: at.0,
                    col: at.1,
                    message: "nested negation is not supported".into(),
                });
            }
            return Ok(Condition::Not(Box::new(inner)));
        }
        let lhs = self.parse_expr()?;
        if let Some(op) = self.eat_relop() {
            let rhs = self.parse_expr()?;
            return Ok(Condition::Relation(op, lhs, rhs));
        }
        match lhs.kind {
            TermKind::Atom(_) | TermKind::Struct(_, _) => Ok(Condition::Literal(lhs)),
            _ => Err(self.err_here("expected a literal or relation in context")),
        }
    }

    fn parse_context(&mut self) -> Result<Context, ParseError> {
        let mut conds = Vec::new();
        loop {
            let c = self.parse_condition()?;
            // A bare `true` conjunct is the empty context.
            let is_true = matches!(&c, Condition::Literal(t)
                if t.annots.is_empty() && matches!(&t.kind, TermKind::Atom(a) if a == "true"));
            if !is_true {
                conds.push(c);
            }
            if !self.eat(&Tok::Amp) {
                return Ok(Context(conds));
            }
        }
    }

    // --- plans ---------------------------------------------------------

    fn parse_trigger(&mut self) -> Result<Trigger, ParseError> {
        let t = self.bump();
        let positive = match t.tok {
            Tok::Plus => true,
            Tok::Minus => false,
            other => {
                return Err(ParseError {
                    line: t.line,
                    col: t.col,
                    message: format!("expected '+' or '-' to start a trigger, found {other}"),
                })
            }
        };
        let goal = self.eat(&Tok::Bang);
        let kind = match (positive, goal) {
            (true, false) => TriggerKind::AddBelief,
            (false, false) => TriggerKind::DelBelief,
            (true, true) => TriggerKind::AddGoal,
            (false, true) => TriggerKind::DelGoal,
        };
        let term = self.parse_literal()?;
        Ok(Trigger { kind, term })
    }

    fn parse_body_step(&mut self) -> Result<BodyStep, ParseError> {
        match self.peek().tok.clone() {
            Tok::Bang => {
                self.bump();
                Ok(BodyStep::Achieve(self.parse_literal()?))
            }
            Tok::BangBang => {
                self.bump();
                Ok(BodyStep::AchieveAsync(self.parse_literal()?))
            }
            Tok::Question => {
                self.bump();
                Ok(BodyStep::Test(self.parse_literal()?))
            }
            Tok::Plus => {
                self.bump();
                Ok(BodyStep::AddBelief(self.parse_literal()?))
            }
            Tok::MinusPlus => {
                self.bump();
                Ok(BodyStep::ReplaceBelief(self.parse_literal()?))
            }
            Tok::Minus => {
                self.bump();
                Ok(BodyStep::DelBelief(self.parse_literal()?))
            }
            Tok::Internal(name) => {
                self.bump();
                let mut args = Vec::new();
                if self.eat(&Tok::LParen) {
                    loop {
                        args.push(self.parse_expr()?);
                        if self.eat(&Tok::Comma) {
                            continue;
                        }
                        self.expect(Tok::RParen)?;
                        break;
                    }
                }
                Ok(BodyStep::Internal(name, args))
            }
            _ => {
                let lhs = self.parse_expr()?;
                if let Some(op) = self.eat_relop() {
                    let rhs = self.parse_expr()?;
                    return Ok(BodyStep::Relation(op, lhs, rhs));
                }
                match lhs.kind {
                    TermKind::Atom(_) | TermKind::Struct(_, _) => Ok(BodyStep::Action(lhs)),
                    _ => Err(self.err_here("expected a body step")),
                }
            }
        }
    }

    fn parse_plan(&mut self) -> Result<Plan, ParseError> {
        let line = self.peek().line;
        let trigger = self.parse_trigger()?;
        let explicit_context = self.eat(&Tok::Colon);
        let context = if explicit_context { self.parse_context()? } else { Context::always() };
        let mut body = Vec::new();
        if self.eat(&Tok::Arrow) {
            loop {
                body.push(self.parse_body_step()?);
                if !self.eat(&Tok::Semi) {
                    break;
                }
            }
        }
        self.expect(Tok::Dot)?;
        if body.is_empty() && !explicit_context {
            return Err(ParseError {
                line,
                col: 1,
                message: format!("plan '{trigger}' has neither a context nor a body"),
            });
        }
        Ok(Plan { trigger, context, body, line })
    }

    fn parse_program(&mut self) -> Result<AgentProgram, ParseError> {
        let mut program = AgentProgram::default();
        loop {
            match &self.peek().tok {
                Tok::Eof => return Ok(program),
                Tok::Bang => {
                    self.bump();
                    let goal = self.parse_literal()?;
                    self.expect(Tok::Dot)?;
                    program.initial_goals.push(goal);
                }
                Tok::Plus | Tok::Minus => program.plans.push(self.parse_plan()?),
                Tok::Ident(_) => {
                    let at = (self.peek().line, self.peek().col);
                    let head = self.parse_literal()?;
                    if self.eat(&Tok::ColonDash) {
                        if !head.annots.is_empty() {
                            return Err(ParseError {
                                line: at.0,
                                col: at.1,
                                message: "rule head cannot carry annotations".into(),
                            });
                        }
                        let body = self.parse_context()?;
                        self.expect(Tok::Dot)?;
                        program.rules.push(Rule { head, body });
                    } else {
                        self.expect(Tok::Dot)?;
                        if !head.is_ground() {
                            return Err(ParseError {
                                line: at.0,
                                col: at.1,
                                message: format!("initial belief '{head}' is not ground"),
                            });
                        }
                        program.initial_beliefs.push(head);
                    }
                }
                other => {
                    return Err(self.err_here(format!(
                        "expected a belief, rule, initial goal or plan, found {other}"
                    )))
                }
            }
        }
    }
}

fn parser_for(src: &str) -> Result<Parser, ParseError> {
    Ok(Parser { toks: lex(src)?, pos: 0 })
}

/// Parses a complete agent program.
pub fn parse_agent_program(source: &str) -> Result<AgentProgram, ParseError> {
    parser_for(source)?.parse_program()
}

/// Parses a single term (whole input must be consumed).
pub fn parse_term(source: &str) -> Result<Term, ParseError> {
    let mut p = parser_for(source)?;
    let t = p.parse_expr()?;
    p.expect(Tok::Eof)?;
    Ok(t)
}

/// Parses a trigger pattern such as `+light(_,_)` — the form `.wait` takes
/// as a string.
pub fn parse_trigger_pattern(source: &str) -> Result<Trigger, ParseError> {
    let mut p = parser_for(source)?;
    let t = p.parse_trigger()?;
    p.expect(Tok::Eof)?;
    Ok(t)
}

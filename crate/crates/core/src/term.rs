//! Logic terms and the operations the rest of the runtime leans on:
//! unification, substitution application, arithmetic and relational
//! evaluation, and the canonical textual form.
//!
//! A term is an atom, a number, a variable, a string, a list or a compound
//! structure, plus an annotation list (`light(1,360)[source(percept)]`).
//! Annotations never take part in unification; matching code that cares
//! about them (plan relevance, belief queries) applies a separate subset
//! check on top.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// The payload of a term, without its annotations.
#[derive(Clone, Debug)]
pub enum TermKind {
    /// Lowercase-initial constant: `white`, `search`.
    Atom(String),
    /// All numbers are reals; integral values print without a decimal point.
    Number(f64),
    /// Uppercase or `_`-initial. The bare underscore is a wildcard: it
    /// matches anything and never binds.
    Var(String),
    /// Quoted string literal, kept verbatim (used by `.wait` patterns).
    Str(String),
    List(Vec<Term>),
    /// Compound with at least one argument; zero-arity compounds are atoms.
    Struct(String, Vec<Term>),
}

#[derive(Clone, Debug)]
pub struct Term {
    pub kind: TermKind,
    pub annots: Vec<Term>,
}

impl Term {
    pub fn atom(name: impl Into<String>) -> Term {
        Term { kind: TermKind::Atom(name.into()), annots: Vec::new() }
    }
    pub fn number(v: f64) -> Term {
        Term { kind: TermKind::Number(v), annots: Vec::new() }
    }
    pub fn var(name: impl Into<String>) -> Term {
        Term { kind: TermKind::Var(name.into()), annots: Vec::new() }
    }
    pub fn string(s: impl Into<String>) -> Term {
        Term { kind: TermKind::Str(s.into()), annots: Vec::new() }
    }
    pub fn list(items: Vec<Term>) -> Term {
        Term { kind: TermKind::List(items), annots: Vec::new() }
    }
    /// Builds `functor(args…)`; an empty argument list degrades to an atom.
    pub fn structure(functor: impl Into<String>, args: Vec<Term>) -> Term {
        let functor = functor.into();
        if args.is_empty() {
            Term::atom(functor)
        } else {
            Term { kind: TermKind::Struct(functor, args), annots: Vec::new() }
        }
    }

    pub fn with_annots(mut self, annots: Vec<Term>) -> Term {
        self.annots = annots;
        self
    }

    /// Appends one annotation, keeping existing ones.
    pub fn annotated(mut self, a: Term) -> Term {
        self.annots.push(a);
        self
    }

    /// The same term with annotations removed (recursively only at the top:
    /// argument annotations are left alone, they are part of the argument).
    pub fn strip_annots(&self) -> Term {
        Term { kind: self.kind.clone(), annots: Vec::new() }
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(&self.kind, TermKind::Var(n) if n == "_")
    }

    /// Functor and arity for atoms and structures; `None` for everything else.
    pub fn functor_arity(&self) -> Option<(&str, usize)> {
        match &self.kind {
            TermKind::Atom(n) => Some((n, 0)),
            TermKind::Struct(n, args) => Some((n, args.len())),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match &self.kind {
            TermKind::Struct(_, args) => args,
            _ => &[],
        }
    }

    /// Ground = no named variables anywhere. Wildcards count as variables
    /// here as well: a belief with a hole in it cannot be stored.
    pub fn is_ground(&self) -> bool {
        match &self.kind {
            TermKind::Var(_) => false,
            TermKind::Atom(_) | TermKind::Number(_) | TermKind::Str(_) => true,
            TermKind::List(items) => items.iter().all(Term::is_ground),
            TermKind::Struct(_, args) => args.iter().all(Term::is_ground),
        }
    }

    /// Collects named (non-`_`) variables in first-occurrence order.
    pub fn named_vars(&self, out: &mut Vec<String>) {
        match &self.kind {
            TermKind::Var(n) => {
                if n != "_" && !out.iter().any(|v| v == n) {
                    out.push(n.clone());
                }
            }
            TermKind::List(items) => items.iter().for_each(|t| t.named_vars(out)),
            TermKind::Struct(_, args) => args.iter().for_each(|t| t.named_vars(out)),
            _ => {}
        }
        for a in &self.annots {
            a.named_vars(out);
        }
    }

    /// Structural equality ignoring annotations everywhere.
    pub fn eq_modulo_annots(&self, other: &Term) -> bool {
        match (&self.kind, &other.kind) {
            (TermKind::Atom(a), TermKind::Atom(b)) => a == b,
            (TermKind::Number(a), TermKind::Number(b)) => a == b,
            (TermKind::Var(a), TermKind::Var(b)) => a == b,
            (TermKind::Str(a), TermKind::Str(b)) => a == b,
            (TermKind::List(a), TermKind::List(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.eq_modulo_annots(y))
            }
            (TermKind::Struct(f, a), TermKind::Struct(g, b)) => {
                f == g && a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.eq_modulo_annots(y))
            }
            _ => false,
        }
    }

    /// Renames every named variable with a `suffix`, used to standardize
    /// rule clauses apart before resolution.
    pub fn rename_vars(&self, suffix: &str) -> Term {
        let kind = match &self.kind {
            TermKind::Var(n) if n != "_" => TermKind::Var(format!("{n}{suffix}")),
            TermKind::List(items) => {
                TermKind::List(items.iter().map(|t| t.rename_vars(suffix)).collect())
            }
            TermKind::Struct(f, args) => {
                TermKind::Struct(f.clone(), args.iter().map(|t| t.rename_vars(suffix)).collect())
            }
            other => other.clone(),
        };
        Term { kind, annots: self.annots.iter().map(|t| t.rename_vars(suffix)).collect() }
    }
}

/// Term equality treats the annotation list as a multiset: order does not
/// matter, content does.
impl PartialEq for Term {
    fn eq(&self, other: &Term) -> bool {
        fn annots_eq(a: &[Term], b: &[Term]) -> bool {
            if a.len() != b.len() {
                return false;
            }
            let mut used = vec![false; b.len()];
            'outer: for x in a {
                for (i, y) in b.iter().enumerate() {
                    if !used[i] && x == y {
                        used[i] = true;
                        continue 'outer;
                    }
                }
                return false;
            }
            true
        }
        let kinds = match (&self.kind, &other.kind) {
            (TermKind::Atom(a), TermKind::Atom(b)) => a == b,
            (TermKind::Number(a), TermKind::Number(b)) => a == b,
            (TermKind::Var(a), TermKind::Var(b)) => a == b,
            (TermKind::Str(a), TermKind::Str(b)) => a == b,
            (TermKind::List(a), TermKind::List(b)) => a == b,
            (TermKind::Struct(f, a), TermKind::Struct(g, b)) => f == g && a == b,
            _ => false,
        };
        kinds && annots_eq(&self.annots, &other.annots)
    }
}
impl Eq for Term {}

/// Prints a float the way the surface syntax writes numbers: integral
/// values hide the decimal point.
pub fn fmt_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write_infix(
            f: &mut fmt::Formatter<'_>,
            op: &str,
            args: &[Term],
            nested: bool,
        ) -> fmt::Result {
            if nested {
                write!(f, "(")?;
            }
            if args.len() == 1 {
                // unary minus
                write!(f, "{op}{}", ExprArg(&args[0]))?;
            } else {
                write!(f, "{} {op} {}", ExprArg(&args[0]), ExprArg(&args[1]))?;
            }
            if nested {
                write!(f, ")")?;
            }
            Ok(())
        }
        /// Arguments of infix operators always parenthesize nested operator
        /// structures, which keeps printing precedence-safe without a
        /// precedence table.
        struct ExprArg<'a>(&'a Term);
        impl fmt::Display for ExprArg<'_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self.0.functor_arity() {
                    Some((op @ ("+" | "-" | "*" | "/"), 1 | 2)) if self.0.annots.is_empty() => {
                        write_infix(f, op, self.0.args(), true)
                    }
                    _ => write!(f, "{}", self.0),
                }
            }
        }

        match &self.kind {
            TermKind::Atom(n) => write!(f, "{n}")?,
            TermKind::Number(v) => write!(f, "{}", fmt_number(*v))?,
            TermKind::Var(n) => write!(f, "{n}")?,
            TermKind::Str(s) => {
                write!(f, "\"")?;
                for c in s.chars() {
                    match c {
                        '"' => write!(f, "\\\"")?,
                        '\\' => write!(f, "\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"")?;
            }
            TermKind::List(items) => {
                write!(f, "[")?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, "]")?;
            }
            TermKind::Struct(op, args)
                if (op == "+" || op == "-" || op == "*" || op == "/")
                    && (args.len() == 2 || (op == "-" && args.len() == 1)) =>
            {
                write_infix(f, op, args, false)?;
            }
            TermKind::Struct(name, args) => {
                write!(f, "{name}(")?;
                for (i, t) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")?;
            }
        }
        if !self.annots.is_empty() {
            write!(f, "[")?;
            for (i, a) in self.annots.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

/// A substitution from variable names to terms. Triangular form: bindings
/// may mention variables bound elsewhere in the map; [`Subst::apply`]
/// resolves chains completely, so applying twice equals applying once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Subst {
    bindings: BTreeMap<String, Term>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.bindings.iter()
    }

    /// Binds `var` without occurs or consistency checks — callers go
    /// through [`unify`] unless they know the binding is fresh.
    pub fn bind(&mut self, var: impl Into<String>, t: Term) {
        self.bindings.insert(var.into(), t);
    }

    /// Applies the substitution, resolving chains until fixpoint. The
    /// occurs check in [`unify`] guarantees termination.
    pub fn apply(&self, t: &Term) -> Term {
        let kind = match &t.kind {
            TermKind::Var(n) if n != "_" => match self.bindings.get(n) {
                Some(bound) => return self.apply(bound).with_annots(
                    t.annots.iter().map(|a| self.apply(a)).collect(),
                ),
                None => t.kind.clone(),
            },
            TermKind::List(items) => {
                TermKind::List(items.iter().map(|x| self.apply(x)).collect())
            }
            TermKind::Struct(f, args) => {
                TermKind::Struct(f.clone(), args.iter().map(|x| self.apply(x)).collect())
            }
            other => other.clone(),
        };
        Term { kind, annots: t.annots.iter().map(|a| self.apply(a)).collect() }
    }
}

fn occurs(var: &str, t: &Term, s: &Subst) -> bool {
    match &t.kind {
        TermKind::Var(n) => {
            if n == var {
                return true;
            }
            match s.get(n) {
                Some(bound) => occurs(var, bound, s),
                None => false,
            }
        }
        TermKind::List(items) => items.iter().any(|x| occurs(var, x, s)),
        TermKind::Struct(_, args) => args.iter().any(|x| occurs(var, x, s)),
        _ => false,
    }
}

/// Resolves a top-level variable chain to its binding (or the last unbound
/// variable). Does not descend into structures.
fn walk<'a>(t: &'a Term, s: &'a Subst) -> &'a Term {
    let mut cur = t;
    loop {
        match &cur.kind {
            TermKind::Var(n) if n != "_" => match s.get(n) {
                Some(next) => cur = next,
                None => return cur,
            },
            _ => return cur,
        }
    }
}

/// Unifies `a` with `b` under `s`, returning the extended substitution.
/// Annotations are ignored on both sides; `_` matches anything and stays
/// unbound, fresh at each occurrence.
pub fn unify(a: &Term, b: &Term, s: &Subst) -> Option<Subst> {
    let (wa, wb) = (walk(a, s).clone(), walk(b, s).clone());
    if wa.is_wildcard() || wb.is_wildcard() {
        return Some(s.clone());
    }
    match (&wa.kind, &wb.kind) {
        (TermKind::Var(x), TermKind::Var(y)) if x == y => Some(s.clone()),
        (TermKind::Var(x), _) => {
            if occurs(x, &wb, s) {
                None
            } else {
                let mut out = s.clone();
                out.bind(x.clone(), wb.strip_annots());
                Some(out)
            }
        }
        (_, TermKind::Var(y)) => {
            if occurs(y, &wa, s) {
                None
            } else {
                let mut out = s.clone();
                out.bind(y.clone(), wa.strip_annots());
                Some(out)
            }
        }
        (TermKind::Atom(p), TermKind::Atom(q)) if p == q => Some(s.clone()),
        (TermKind::Number(m), TermKind::Number(n)) if m == n => Some(s.clone()),
        (TermKind::Str(p), TermKind::Str(q)) if p == q => Some(s.clone()),
        (TermKind::List(xs), TermKind::List(ys)) if xs.len() == ys.len() => {
            let mut cur = s.clone();
            for (x, y) in xs.iter().zip(ys) {
                cur = unify(x, y, &cur)?;
            }
            Some(cur)
        }
        (TermKind::Struct(f, xs), TermKind::Struct(g, ys))
            if f == g && xs.len() == ys.len() =>
        {
            let mut cur = s.clone();
            for (x, y) in xs.iter().zip(ys) {
                cur = unify(x, y, &cur)?;
            }
            Some(cur)
        }
        _ => None,
    }
}

/// Every annotation required by `pattern` must unify with some annotation
/// carried by `value`. An unannotated pattern accepts anything; this is the
/// check that makes `[source(percept)]` triggers selective.
pub fn annots_subset(pattern: &Term, value: &Term, s: &Subst) -> bool {
    pattern.annots.iter().all(|req| {
        value.annots.iter().any(|have| unify(req, have, s).is_some())
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unbound variable {0} in arithmetic expression")]
    Unbound(String),
    #[error("non-numeric operand {0} in arithmetic expression")]
    NonNumeric(String),
    #[error("non-finite arithmetic result")]
    NonFinite,
    #[error("ordering comparison on non-numbers: {0}")]
    NonNumericComparison(String),
}

/// Evaluates an arithmetic expression (`+ - * /`, unary `-`) to a number
/// under a substitution.
pub fn eval_arith(t: &Term, s: &Subst) -> Result<f64, EvalError> {
    let t = walk(t, s).clone();
    match &t.kind {
        TermKind::Number(v) => Ok(*v),
        TermKind::Var(n) => Err(EvalError::Unbound(n.clone())),
        TermKind::Struct(op, args) if args.len() == 2 => {
            let (l, r) = (eval_arith(&args[0], s)?, eval_arith(&args[1], s)?);
            let v = match op.as_str() {
                "+" => l + r,
                "-" => l - r,
                "*" => l * r,
                "/" => l / r,
                _ => return Err(EvalError::NonNumeric(t.to_string())),
            };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(EvalError::NonFinite)
            }
        }
        TermKind::Struct(op, args) if op == "-" && args.len() == 1 => {
            Ok(-eval_arith(&args[0], s)?)
        }
        _ => Err(EvalError::NonNumeric(t.to_string())),
    }
}

/// Relational operators usable in contexts, rule bodies and body steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RelOp {
    Lt,
    Le,
    Gt,
    Ge,
    /// `==` — structural equality of the resolved terms.
    StructEq,
    /// `\==`
    StructNe,
    /// `=` — unification; a compound arithmetic right-hand side is
    /// evaluated to a number first. Not assignment: fails when the left
    /// side is already bound to something else.
    Unify,
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
            RelOp::StructEq => "==",
            RelOp::StructNe => "\\==",
            RelOp::Unify => "=",
        };
        write!(f, "{s}")
    }
}

fn is_arith_shape(t: &Term) -> bool {
    matches!(t.functor_arity(),
        Some((op, 2)) if ["+", "-", "*", "/"].contains(&op))
        || matches!(t.functor_arity(), Some(("-", 1)))
}

/// Evaluates `l op r` under `s`. `Ok(Some(_))` holds the (possibly
/// extended) substitution on success, `Ok(None)` is plain falsity.
pub fn eval_relation(
    op: RelOp,
    l: &Term,
    r: &Term,
    s: &Subst,
) -> Result<Option<Subst>, EvalError> {
    match op {
        RelOp::Lt | RelOp::Le | RelOp::Gt | RelOp::Ge => {
            let (lv, rv) = match (eval_arith(l, s), eval_arith(r, s)) {
                (Ok(lv), Ok(rv)) => (lv, rv),
                _ => {
                    return Err(EvalError::NonNumericComparison(format!(
                        "{} {op} {}",
                        s.apply(l),
                        s.apply(r)
                    )))
                }
            };
            let holds = match op {
                RelOp::Lt => lv < rv,
                RelOp::Le => lv <= rv,
                RelOp::Gt => lv > rv,
                RelOp::Ge => lv >= rv,
                _ => unreachable!(),
            };
            Ok(holds.then(|| s.clone()))
        }
        RelOp::StructEq => {
            Ok(s.apply(l).eq_modulo_annots(&s.apply(r)).then(|| s.clone()))
        }
        RelOp::StructNe => {
            Ok((!s.apply(l).eq_modulo_annots(&s.apply(r))).then(|| s.clone()))
        }
        RelOp::Unify => {
            let rhs = s.apply(r);
            let rhs = if is_arith_shape(&rhs) {
                Term::number(eval_arith(&rhs, s)?)
            } else {
                rhs
            };
            Ok(unify(l, &rhs, s))
        }
    }
}

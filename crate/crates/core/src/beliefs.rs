//! Belief storage with uniqueness-pattern replacement and rule-aware
//! queries.
//!
//! Sensors resample continuously, so without intervention every reading
//! would pile up as a separate fact. A [`UniquenessPattern`] such as
//! `light(port,_)` declares that for each value of the key arguments (the
//! non-`_` positions) at most one belief may exist: adding a newer reading
//! replaces the older one and reports both the removal and the addition.
//!
//! Queries resolve conjunctions depth-first against stored beliefs (in
//! insertion order) and then rules (in declaration order), with
//! negation-as-failure for `not` and relational/arithmetic side conditions.

use crate::parser::ast::{Condition, Context, Rule};
use crate::term::{annots_subset, eval_relation, unify, Subst, Term, TermKind};

/// Hard cap on rule-expansion depth; the rule sets this runtime targets are
/// non-recursive, so hitting the cap means an accidental cycle.
const MAX_DEPTH: usize = 256;

/// `light(port,_)`-style description of which beliefs may coexist:
/// for one functor/arity, at most one belief per combination of key
/// arguments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniquenessPattern {
    pub functor: String,
    pub arity: usize,
    /// Indices of the key arguments — the non-`_` positions. May be empty,
    /// in which case at most one belief of this functor/arity exists at all.
    pub key_positions: Vec<usize>,
}

impl UniquenessPattern {
    pub fn from_term(t: &Term) -> Result<UniquenessPattern, String> {
        if !t.annots.is_empty() {
            return Err("pattern cannot carry annotations".into());
        }
        match &t.kind {
            TermKind::Atom(name) => Ok(UniquenessPattern {
                functor: name.clone(),
                arity: 0,
                key_positions: Vec::new(),
            }),
            TermKind::Struct(name, args) => Ok(UniquenessPattern {
                functor: name.clone(),
                arity: args.len(),
                key_positions: args
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| !a.is_wildcard())
                    .map(|(i, _)| i)
                    .collect(),
            }),
            _ => Err("pattern must be an atom or a structure".into()),
        }
    }

    pub fn matches(&self, t: &Term) -> bool {
        t.functor_arity() == Some((self.functor.as_str(), self.arity))
    }

    /// True when two matching beliefs agree on every key argument
    /// (annotations ignored), i.e. the newer one must replace the older.
    pub fn same_key(&self, a: &Term, b: &Term) -> bool {
        let (aa, ba) = (a.args(), b.args());
        self.key_positions.iter().all(|&i| aa[i].eq_modulo_annots(&ba[i]))
    }
}

/// One effect of a belief-base mutation, in the order it happened.
#[derive(Clone, Debug, PartialEq)]
pub enum BeliefChange {
    Added(Term),
    Removed(Term),
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("belief '{0}' is not ground")]
pub struct NonGroundBelief(pub Term);

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum QueryError {
    #[error("negation applied to non-ground condition 'not {cond}' (unbound: {vars})")]
    NafUnbound { cond: String, vars: String },
    #[error("query depth limit exceeded (recursive rules?)")]
    DepthLimit,
}

#[derive(Clone, Debug, Default)]
pub struct BeliefBase {
    beliefs: Vec<Term>,
    rules: Vec<Rule>,
    patterns: Vec<UniquenessPattern>,
}

impl BeliefBase {
    pub fn new(rules: Vec<Rule>, patterns: Vec<UniquenessPattern>) -> BeliefBase {
        BeliefBase { beliefs: Vec::new(), rules, patterns }
    }

    /// Stored beliefs in insertion order (replacement keeps the slot).
    pub fn beliefs(&self) -> &[Term] {
        &self.beliefs
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    /// How many stored beliefs the pattern matches (unification plus
    /// annotation subset) — used by run-time assertion hooks.
    pub fn count_matching(&self, pattern: &Term) -> usize {
        self.beliefs
            .iter()
            .filter(|b| match unify(pattern, b, &Subst::new()) {
                Some(s) => annots_subset(pattern, b, &s),
                None => false,
            })
            .count()
    }

    /// Adds a ground belief. Re-adding a belief that is already present
    /// verbatim (annotations included) is a no-op and reports no changes;
    /// adding one that shares key arguments with an existing belief under a
    /// uniqueness pattern replaces it, reporting the removal first.
    pub fn add(&mut self, belief: Term) -> Result<Vec<BeliefChange>, NonGroundBelief> {
        if !belief.is_ground() {
            return Err(NonGroundBelief(belief));
        }
        if self.beliefs.iter().any(|b| b == &belief) {
            return Ok(Vec::new());
        }
        for p in &self.patterns {
            if !p.matches(&belief) {
                continue;
            }
            if let Some(idx) =
                self.beliefs.iter().position(|b| p.matches(b) && p.same_key(b, &belief))
            {
                let old = std::mem::replace(&mut self.beliefs[idx], belief.clone());
                return Ok(vec![BeliefChange::Removed(old), BeliefChange::Added(belief)]);
            }
        }
        self.beliefs.push(belief.clone());
        Ok(vec![BeliefChange::Added(belief)])
    }

    /// Removes every belief the pattern unifies with (annotation subset
    /// respected); returns them in storage order. An empty result is not an
    /// error.
    pub fn remove(&mut self, pattern: &Term) -> Vec<Term> {
        let mut removed = Vec::new();
        self.beliefs.retain(|b| match unify(pattern, b, &Subst::new()) {
            Some(s) if annots_subset(pattern, b, &s) => {
                removed.push(b.clone());
                false
            }
            _ => true,
        });
        removed
    }

    /// Removes every belief with the given functor and arity, regardless of
    /// arguments — the delete half of `-+b`.
    pub fn remove_functor_arity(&mut self, functor: &str, arity: usize) -> Vec<Term> {
        let mut removed = Vec::new();
        self.beliefs.retain(|b| {
            if b.functor_arity() == Some((functor, arity)) {
                removed.push(b.clone());
                false
            } else {
                true
            }
        });
        removed
    }

    /// `.abolish(pattern)` — same contract as [`BeliefBase::remove`].
    pub fn abolish(&mut self, pattern: &Term) -> Vec<Term> {
        self.remove(pattern)
    }

    /// All solutions of a context under a starting substitution, in
    /// depth-first order. Each solution is projected onto the caller's
    /// variables (the base substitution's domain plus the variables written
    /// in the context), so the standardized-apart internals of rule
    /// resolution never leak out.
    pub fn query(&self, ctx: &Context, base: &Subst) -> Result<Vec<Subst>, QueryError> {
        let keep = context_vars(ctx);
        let mut out = Vec::new();
        let mut counter = 0;
        self.solve(&ctx.0, base, 0, &mut counter, &mut |s| {
            out.push(project(s, &keep, base));
            false
        })?;
        Ok(out)
    }

    /// First solution only — what plan applicability uses.
    pub fn first_solution(
        &self,
        ctx: &Context,
        base: &Subst,
    ) -> Result<Option<Subst>, QueryError> {
        let keep = context_vars(ctx);
        let mut found = None;
        let mut counter = 0;
        self.solve(&ctx.0, base, 0, &mut counter, &mut |s| {
            found = Some(project(s, &keep, base));
            true
        })?;
        Ok(found)
    }

    /// Proves a single literal — the `?b` test step.
    pub fn query_literal(&self, lit: &Term, base: &Subst) -> Result<Option<Subst>, QueryError> {
        self.first_solution(&Context(vec![Condition::Literal(lit.clone())]), base)
    }

    /// Depth-first resolution. `sink` receives each solution and returns
    /// true to stop the search; the return value reports whether a sink
    /// call stopped it.
    fn solve(
        &self,
        conds: &[Condition],
        s: &Subst,
        depth: usize,
        counter: &mut usize,
        sink: &mut dyn FnMut(&Subst) -> bool,
    ) -> Result<bool, QueryError> {
        let Some((first, rest)) = conds.split_first() else {
            return Ok(sink(s));
        };
        match first {
            Condition::Literal(lit) => self.solve_literal(lit, rest, s, depth, counter, sink),
            Condition::Relation(op, l, r) => match eval_relation(*op, l, r, s) {
                Ok(Some(s2)) => self.solve(rest, &s2, depth, counter, sink),
                // A relation that is false or cannot be evaluated on this
                // branch fails the branch, exactly like a missing belief.
                Ok(None) | Err(_) => Ok(false),
            },
            Condition::Not(inner) => {
                let applied = apply_cond(inner, s);
                let mut vars = Vec::new();
                cond_named_vars(&applied, &mut vars);
                if !vars.is_empty() {
                    return Err(QueryError::NafUnbound {
                        cond: applied.to_string(),
                        vars: vars.join(", "),
                    });
                }
                let inner_conds = [(**inner).clone()];
                let mut any = false;
                self.solve(&inner_conds, s, depth, counter, &mut |_| {
                    any = true;
                    true
                })?;
                if any {
                    Ok(false)
                } else {
                    self.solve(rest, s, depth, counter, sink)
                }
            }
        }
    }

    fn solve_literal(
        &self,
        lit: &Term,
        rest: &[Condition],
        s: &Subst,
        depth: usize,
        counter: &mut usize,
        sink: &mut dyn FnMut(&Subst) -> bool,
    ) -> Result<bool, QueryError> {
        if depth >= MAX_DEPTH {
            return Err(QueryError::DepthLimit);
        }
        for b in &self.beliefs {
            if let Some(s2) = unify(lit, b, s) {
                if annots_subset(lit, b, &s2) && self.solve(rest, &s2, depth, counter, sink)? {
                    return Ok(true);
                }
            }
        }
        for rule in &self.rules {
            if rule.head.functor_arity() != lit.functor_arity() {
                continue;
            }
            // An annotated goal literal cannot be proven by a rule: rule
            // heads carry no annotations to satisfy the subset check.
            if !lit.annots.is_empty() {
                continue;
            }
            *counter += 1;
            let suffix = format!("#{counter}");
            let head = rule.head.rename_vars(&suffix);
            let body = rule.body.rename_vars(&suffix);
            if let Some(s2) = unify(lit, &head, s) {
                let mut chained = body.0;
                chained.extend_from_slice(rest);
                if self.solve(&chained, &s2, depth + 1, counter, sink)? {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

/// The named variables written in a context, in first-occurrence order.
fn context_vars(ctx: &Context) -> Vec<String> {
    let mut out = Vec::new();
    for c in &ctx.0 {
        cond_named_vars(c, &mut out);
    }
    out
}

/// Restricts a full solver substitution to `base`'s own bindings plus
/// fully-resolved bindings for the `keep` variables.
fn project(full: &Subst, keep: &[String], base: &Subst) -> Subst {
    let mut out = base.clone();
    for v in keep {
        let resolved = full.apply(&Term::var(v.clone()));
        if !matches!(&resolved.kind, TermKind::Var(n) if n == v) {
            out.bind(v.clone(), resolved);
        }
    }
    out
}

fn apply_cond(c: &Condition, s: &Subst) -> Condition {
    match c {
        Condition::Literal(t) => Condition::Literal(s.apply(t)),
        Condition::Relation(op, l, r) => Condition::Relation(*op, s.apply(l), s.apply(r)),
        Condition::Not(inner) => Condition::Not(Box::new(apply_cond(inner, s))),
    }
}

fn cond_named_vars(c: &Condition, out: &mut Vec<String>) {
    match c {
        Condition::Literal(t) => t.named_vars(out),
        Condition::Relation(_, l, r) => {
            l.named_vars(out);
            r.named_vars(out);
        }
        Condition::Not(inner) => cond_named_vars(inner, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_agent_program;
    use proptest::prelude::*;

    fn num(v: f64) -> Term {
        Term::number(v)
    }

    fn light(p: f64, v: f64) -> Term {
        Term::structure("light", vec![num(p), num(v)])
            .annotated(Term::structure("source", vec![Term::atom("percept")]))
    }

    fn standard_patterns() -> Vec<UniquenessPattern> {
        ["light(port,_)", "sound(port,_)", "obstacle(port,_)", "touching(port,_)"]
            .iter()
            .map(|s| UniquenessPattern::from_term(&crate::parser::parse_term(s).unwrap()).unwrap())
            .collect()
    }

    fn base_with(patterns: Vec<UniquenessPattern>) -> BeliefBase {
        BeliefBase::new(Vec::new(), patterns)
    }

    #[test]
    fn pattern_extraction() {
        let p = UniquenessPattern::from_term(&crate::parser::parse_term("light(port,_)").unwrap())
            .unwrap();
        assert_eq!((p.functor.as_str(), p.arity), ("light", 2));
        assert_eq!(p.key_positions, vec![0]);

        let all_wild =
            UniquenessPattern::from_term(&crate::parser::parse_term("light(_,_)").unwrap())
                .unwrap();
        assert!(all_wild.key_positions.is_empty());

        assert!(UniquenessPattern::from_term(&num(3.0)).is_err());
        assert!(UniquenessPattern::from_term(
            &Term::atom("x").annotated(Term::atom("a"))
        )
        .is_err());
    }

    #[test]
    fn add_replace_and_idempotent_readd() {
        let mut bb = base_with(standard_patterns());
        assert_eq!(bb.add(light(1.0, 360.0)).unwrap(), vec![BeliefChange::Added(light(1.0, 360.0))]);
        assert_eq!(
            bb.add(light(1.0, 355.0)).unwrap(),
            vec![
                BeliefChange::Removed(light(1.0, 360.0)),
                BeliefChange::Added(light(1.0, 355.0)),
            ]
        );
        assert_eq!(bb.add(light(1.0, 355.0)).unwrap(), vec![]);
        assert_eq!(bb.len(), 1);

        // A different port is a different key: both readings coexist.
        bb.add(light(2.0, 340.0)).unwrap();
        assert_eq!(bb.len(), 2);
        assert_eq!(bb.count_matching(&crate::parser::parse_term("light(_,_)").unwrap()), 2);
    }

    #[test]
    fn empty_key_pattern_keeps_one_belief_per_functor() {
        let p =
            UniquenessPattern::from_term(&crate::parser::parse_term("heading(_)").unwrap())
                .unwrap();
        let mut bb = base_with(vec![p]);
        bb.add(Term::structure("heading", vec![num(10.0)])).unwrap();
        let changes = bb.add(Term::structure("heading", vec![num(20.0)])).unwrap();
        assert_eq!(changes.len(), 2);
        assert_eq!(bb.len(), 1);
    }

    #[test]
    fn non_ground_belief_rejected() {
        let mut bb = base_with(vec![]);
        assert!(bb.add(Term::structure("light", vec![Term::var("X"), num(1.0)])).is_err());
    }

    fn linefollower_rules() -> Vec<Rule> {
        let src = "distinct_sensors(Sensor1, Sensor2) :- Sensor1 \\== Sensor2.\n\
                   on_line(Value1, Value2) :- Value1 >= 350 & Value2 >= 350.\n\
                   turning(Value1, Value2) :- Value1 < 350 & Value2 >= 350.\n";
        parse_agent_program(src).unwrap().rules
    }

    #[test]
    fn rule_queries() {
        let bb = BeliefBase::new(linefollower_rules(), vec![]);
        let sols = bb
            .query(
                &Context(vec![Condition::Literal(Term::structure(
                    "on_line",
                    vec![num(360.0), num(355.0)],
                ))]),
                &Subst::new(),
            )
            .unwrap();
        assert_eq!(sols.len(), 1);
        assert!(sols[0].is_empty());

        let sols = bb
            .query(
                &Context(vec![Condition::Literal(Term::structure(
                    "distinct_sensors",
                    vec![num(1.0), num(1.0)],
                ))]),
                &Subst::new(),
            )
            .unwrap();
        assert!(sols.is_empty());
    }

    #[test]
    fn fact_query_binds_variables() {
        let mut bb = base_with(standard_patterns());
        bb.add(light(1.0, 360.0)).unwrap();
        let lit = Term::structure("light", vec![Term::var("S"), Term::var("V")]);
        let sols = bb.query(&Context(vec![Condition::Literal(lit)]), &Subst::new()).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].apply(&Term::var("S")), num(1.0));
        assert_eq!(sols[0].apply(&Term::var("V")), num(360.0));
    }

    #[test]
    fn conjunction_walks_beliefs_in_insertion_order() {
        let mut bb = base_with(vec![]);
        for (p, v) in [(1.0, 300.0), (2.0, 400.0)] {
            bb.add(light(p, v)).unwrap();
        }
        let ctx = Context(vec![
            Condition::Literal(Term::structure("light", vec![Term::var("S"), Term::var("V")])),
            Condition::Relation(crate::term::RelOp::Ge, Term::var("V"), num(350.0)),
        ]);
        let sols = bb.query(&ctx, &Subst::new()).unwrap();
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].apply(&Term::var("S")), num(2.0));
    }

    #[test]
    fn annotated_context_literal_requires_annotated_belief() {
        let mut bb = base_with(vec![]);
        bb.add(Term::structure("light", vec![num(1.0), num(360.0)])).unwrap();
        let annotated = Term::structure("light", vec![Term::var("S"), Term::var("V")])
            .annotated(Term::structure("source", vec![Term::atom("percept")]));
        let sols =
            bb.query(&Context(vec![Condition::Literal(annotated)]), &Subst::new()).unwrap();
        assert!(sols.is_empty(), "unannotated belief must not satisfy [source(percept)]");
    }

    #[test]
    fn negation_as_failure() {
        let mut bb = BeliefBase::new(
            parse_agent_program("on_bar(Value) :- Value < 400.\n").unwrap().rules,
            vec![],
        );
        let not_light = Context(vec![Condition::Not(Box::new(Condition::Literal(
            Term::structure("light", vec![Term::var("_"), Term::var("_")]),
        )))]);
        // Succeeds while nothing has been perceived...
        assert_eq!(bb.query(&not_light, &Subst::new()).unwrap().len(), 1);
        // ...and fails once a reading exists.
        bb.add(light(1.0, 360.0)).unwrap();
        assert!(bb.query(&not_light, &Subst::new()).unwrap().is_empty());

        // `not on_bar(X)` with X bound is plain negation-as-failure.
        let not_on_bar = Context(vec![Condition::Not(Box::new(Condition::Literal(
            Term::structure("on_bar", vec![Term::var("X")]),
        )))]);
        let mut bound = Subst::new();
        bound.bind("X", num(450.0));
        assert_eq!(bb.query(&not_on_bar, &bound).unwrap().len(), 1);
        let mut bound = Subst::new();
        bound.bind("X", num(360.0));
        assert!(bb.query(&not_on_bar, &bound).unwrap().is_empty());

        // ...but with X unbound it is an error, not silent success.
        let err = bb.query(&not_on_bar, &Subst::new()).unwrap_err();
        assert!(matches!(err, QueryError::NafUnbound { .. }));
    }

    #[test]
    fn abolish_counts() {
        let mut bb = base_with(standard_patterns());
        bb.add(light(1.0, 360.0)).unwrap();
        bb.add(light(2.0, 340.0)).unwrap();
        bb.add(Term::structure("goal", vec![Term::atom("search")])).unwrap();
        let pat = crate::parser::parse_term("light(_,_)").unwrap();
        assert_eq!(bb.abolish(&pat).len(), 2);
        assert_eq!(bb.beliefs(), &[Term::structure("goal", vec![Term::atom("search")])]);

        let mut empty = base_with(vec![]);
        assert_eq!(empty.abolish(&pat).len(), 0);

        let mut one = base_with(vec![]);
        one.add(Term::atom("x")).unwrap();
        assert_eq!(one.abolish(&Term::atom("x")).len(), 1);
        assert!(one.is_empty());
    }

    #[test]
    fn remove_respects_bound_arguments() {
        let mut bb = base_with(vec![]);
        bb.add(light(1.0, 360.0)).unwrap();
        bb.add(light(2.0, 340.0)).unwrap();
        let removed = bb.remove(&crate::parser::parse_term("light(1,_)").unwrap());
        assert_eq!(removed, vec![light(1.0, 360.0)]);
        assert_eq!(bb.len(), 1);
    }

    #[test]
    fn remove_functor_arity_for_replacement() {
        let mut bb = base_with(vec![]);
        bb.add(Term::structure("last_color", vec![Term::atom("white")])).unwrap();
        let removed = bb.remove_functor_arity("last_color", 1);
        assert_eq!(removed, vec![Term::structure("last_color", vec![Term::atom("white")])]);
        assert_eq!(bb.remove_functor_arity("last_color", 1), vec![]);
    }

    #[test]
    fn recursive_rules_hit_the_depth_limit() {
        let bb = BeliefBase::new(
            parse_agent_program("loop(X) :- loop(X).\n").unwrap().rules,
            vec![],
        );
        let ctx = Context(vec![Condition::Literal(Term::structure("loop", vec![num(1.0)]))]);
        assert_eq!(bb.query(&ctx, &Subst::new()).unwrap_err(), QueryError::DepthLimit);
    }

    #[test]
    fn add_then_abolish_restores_percept_free_base() {
        let mut bb = base_with(standard_patterns());
        bb.add(Term::structure("goal", vec![Term::atom("search")])).unwrap();
        bb.add(Term::structure("bars_passed", vec![num(0.0)])).unwrap();
        let snapshot = bb.beliefs().to_vec();
        for v in [300.0, 355.0, 410.0, 200.0] {
            bb.add(light(1.0, v)).unwrap();
            bb.add(light(2.0, v + 5.0)).unwrap();
        }
        bb.abolish(&crate::parser::parse_term("light(_,_)").unwrap());
        assert_eq!(bb.beliefs(), snapshot.as_slice());
    }

    proptest! {
        /// Uniqueness invariant under random percept streams, checked
        /// against a filter-then-insert oracle.
        #[test]
        fn uniqueness_invariant_random_adds(
            adds in proptest::collection::vec((0usize..4, 1u8..5, 0u16..1024), 1..60)
        ) {
            let functors = ["light", "sound", "obstacle", "touching"];
            let mut bb = base_with(standard_patterns());
            let mut oracle: Vec<Term> = Vec::new();
            for (f, port, value) in adds {
                let fact = Term::structure(
                    functors[f],
                    vec![num(port as f64), num(value as f64)],
                );
                bb.add(fact.clone()).unwrap();
                // Oracle: drop any same-functor same-port fact, then insert.
                if !oracle.contains(&fact) {
                    let existing = oracle.iter().position(|t| {
                        t.functor_arity() == fact.functor_arity()
                            && t.args()[0] == fact.args()[0]
                    });
                    match existing {
                        Some(i) => oracle[i] = fact,
                        None => oracle.push(fact),
                    }
                }
                // At most one belief per functor+port.
                for f2 in functors {
                    for p2 in 1..5 {
                        let pat = Term::structure(f2, vec![num(p2 as f64), Term::var("_")]);
                        prop_assert!(bb.count_matching(&pat) <= 1);
                    }
                }
            }
            prop_assert_eq!(bb.beliefs(), oracle.as_slice());
        }

        /// Conjunctive queries agree with a brute-force enumeration oracle.
        #[test]
        fn query_matches_bruteforce_oracle(
            lights in proptest::collection::vec((1u8..4, 0u16..600), 0..8),
            sounds in proptest::collection::vec((1u8..4, 0u16..600), 0..8),
        ) {
            // No uniqueness patterns: duplicates allowed, order preserved.
            let mut bb = base_with(vec![]);
            let mut light_facts = Vec::new();
            let mut sound_facts = Vec::new();
            for (p, v) in &lights {
                let t = Term::structure("light", vec![num(*p as f64), num(*v as f64)]);
                if !light_facts.contains(&t) {
                    light_facts.push(t.clone());
                    bb.add(t).unwrap();
                }
            }
            for (p, v) in &sounds {
                let t = Term::structure("sound", vec![num(*p as f64), num(*v as f64)]);
                if !sound_facts.contains(&t) {
                    sound_facts.push(t.clone());
                    bb.add(t).unwrap();
                }
            }

            // light(S,V) & sound(S,W): join on the shared port variable.
            let ctx = Context(vec![
                Condition::Literal(Term::structure(
                    "light", vec![Term::var("S"), Term::var("V")])),
                Condition::Literal(Term::structure(
                    "sound", vec![Term::var("S"), Term::var("W")])),
            ]);
            let mut expected = Vec::new();
            for lf in &light_facts {
                for sf in &sound_facts {
                    if lf.args()[0] == sf.args()[0] {
                        expected.push((
                            lf.args()[0].clone(),
                            lf.args()[1].clone(),
                            sf.args()[1].clone(),
                        ));
                    }
                }
            }
            let got: Vec<_> = bb
                .query(&ctx, &Subst::new())
                .unwrap()
                .iter()
                .map(|s| (
                    s.apply(&Term::var("S")),
                    s.apply(&Term::var("V")),
                    s.apply(&Term::var("W")),
                ))
                .collect();
            prop_assert_eq!(got, expected);
        }
    }
}

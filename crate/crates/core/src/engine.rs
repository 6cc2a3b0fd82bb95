//! The reasoning engine: belief events, plans, intentions and the cycle
//! that ties them to a robot link.
//!
//! Each cycle: consume a pending ack (sync mode), perceive, read the
//! mailbox, select one event and find its plan, then run one body step of
//! one ready intention (round robin). Initial goals are queued as events
//! before the first cycle; initial beliefs are installed silently.
//!
//! Belief-change events enter the queue only when some plan trigger could
//! match them; every change is still logged and still wakes `.wait`
//! suspensions. Goal events are always queued.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use crate::beliefs::{BeliefBase, BeliefChange, UniquenessPattern};
use crate::bridge::{AckState, ActError, ActionTicket, MindLink};
use crate::parser::{
    parse_trigger_pattern, AgentProgram, BodyStep, Plan, Trigger, TriggerKind,
};
use crate::term::{annots_subset, unify, Subst, Term};

/// How the agent couples to its robot. Async dispatches actions
/// fire-and-forget; sync waits for each percept batch and each ack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sync,
    Async,
}

/// An agent-to-agent message.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub from: String,
    pub content: Term,
}

#[derive(Default)]
struct RegistryInner {
    mailboxes: HashMap<String, Arc<Mutex<VecDeque<Envelope>>>>,
    /// Every internal message ever delivered: (from, to, content).
    sent: Vec<(String, String, Term)>,
}

/// Name service and mailbox store for internal (agent-to-agent) messages.
#[derive(Clone, Default)]
pub struct Registry {
    inner: Arc<Mutex<RegistryInner>>,
}

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    pub fn register(&self, name: &str) -> Arc<Mutex<VecDeque<Envelope>>> {
        let mb = Arc::new(Mutex::new(VecDeque::new()));
        let mut inner = self.inner.lock().expect("registry lock");
        inner.mailboxes.insert(name.to_string(), mb.clone());
        mb
    }

    /// Deliver a message; false if the receiver is unknown.
    pub fn send(&self, from: &str, to: &str, content: Term) -> bool {
        let mut inner = self.inner.lock().expect("registry lock");
        let Some(mb) = inner.mailboxes.get(to).cloned() else { return false };
        mb.lock()
            .expect("mailbox lock")
            .push_back(Envelope { from: from.to_string(), content: content.clone() });
        inner.sent.push((from.to_string(), to.to_string(), content));
        true
    }

    /// All internal messages delivered so far.
    pub fn sent_log(&self) -> Vec<(String, String, Term)> {
        self.inner.lock().expect("registry lock").sent.clone()
    }

    /// How many delivered messages have the given content shape.
    pub fn sent_count(&self, functor: &str, arity: usize) -> usize {
        self.inner
            .lock()
            .expect("registry lock")
            .sent
            .iter()
            .filter(|(_, _, c)| c.functor_arity() == Some((functor, arity)))
            .count()
    }
}

/// One queued trigger occurrence. `linked` ties a subgoal back to the
/// intention that posted it.
#[derive(Clone, Debug)]
pub struct Event {
    pub kind: TriggerKind,
    pub term: Term,
    pub linked: Option<u64>,
}

/// One plan instance on an intention's stack.
#[derive(Clone, Debug)]
struct Frame {
    kind: TriggerKind,
    /// Instantiated trigger term for goal frames, used to post `-!g`.
    goal: Option<Term>,
    unifier: Subst,
    steps: VecDeque<BodyStep>,
}

#[derive(Clone, Debug)]
enum Status {
    Active,
    /// Posted a subgoal or failure event and waits for it to resolve.
    AwaitingEvent,
    /// `.wait("...")`: parked until a matching event is generated.
    Suspended(Trigger),
}

#[derive(Debug)]
struct Intention {
    id: u64,
    frames: Vec<Frame>,
    status: Status,
}

/// What one call to [`Agent::cycle`] did.
#[derive(Clone, Debug, Default)]
pub struct CycleReport {
    /// Executed cycle number; stalled calls keep the previous count.
    pub cycle: u64,
    pub executed: bool,
    /// Why the cycle did not run (sync gates, finished agent).
    pub stall: Option<String>,
    pub done: bool,
    pub percepts_ingested: usize,
    /// True when perceive found nothing — the async-mode signature.
    pub percept_queue_empty: bool,
    pub selected_event: Option<String>,
    pub executed_step: bool,
}

enum StepOutcome {
    Continue(Subst),
    /// Step consumed; the intention parks in the given status.
    Park(Subst, Status),
    Fail(String),
}

/// A reasoning agent bound to one robot link.
pub struct Agent {
    name: String,
    plans: Vec<Plan>,
    beliefs: BeliefBase,
    events: VecDeque<Event>,
    intentions: Vec<Intention>,
    next_intention: u64,
    rr: usize,
    link: Box<dyn MindLink>,
    mode: ExecMode,
    ack_timeout_ms: u64,
    mailbox: Arc<Mutex<VecDeque<Envelope>>>,
    registry: Registry,
    cycle: u64,
    done: bool,
    /// Sync mode: the one in-flight action gating the agent.
    pending_ack: Option<(u64, ActionTicket)>,
    log: Vec<String>,
    /// Every event generated this cycle (queued or not), for `.wait`.
    generated: Vec<(TriggerKind, Term)>,
}

fn kind_prefix(k: TriggerKind) -> &'static str {
    match k {
        TriggerKind::AddBelief => "+",
        TriggerKind::DelBelief => "-",
        TriggerKind::AddGoal => "+!",
        TriggerKind::DelGoal => "-!",
    }
}

fn source_annot(name: &str) -> Term {
    Term::structure("source", vec![Term::atom(name)])
}

/// Unify a trigger pattern against an event term, requiring the pattern's
/// annotations to be covered by the event's.
fn trigger_matches(pattern: &Term, value: &Term) -> Option<Subst> {
    let s = unify(pattern, value, &Subst::new())?;
    annots_subset(pattern, value, &s).then_some(s)
}

impl Agent {
    pub fn new(
        name: impl Into<String>,
        program: AgentProgram,
        patterns: Vec<UniquenessPattern>,
        link: Box<dyn MindLink>,
        registry: &Registry,
        mode: ExecMode,
        ack_timeout_ms: u64,
    ) -> Agent {
        let name = name.into();
        let mut beliefs = BeliefBase::new(program.rules, patterns);
        for b in program.initial_beliefs {
            let annotated = b.annotated(source_annot("self"));
            if let Err(e) = beliefs.add(annotated) {
                log::warn!("{name}: skipping initial belief: {e}");
            }
        }
        let events = program
            .initial_goals
            .into_iter()
            .map(|g| Event { kind: TriggerKind::AddGoal, term: g, linked: None })
            .collect();
        let mailbox = registry.register(&name);
        Agent {
            name,
            plans: program.plans,
            beliefs,
            events,
            intentions: Vec::new(),
            next_intention: 1,
            rr: 0,
            link,
            mode,
            ack_timeout_ms,
            mailbox,
            registry: registry.clone(),
            cycle: 0,
            done: false,
            pending_ack: None,
            log: Vec::new(),
            generated: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn beliefs(&self) -> &BeliefBase {
        &self.beliefs
    }

    pub fn cycle_count(&self) -> u64 {
        self.cycle
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn pending_events(&self) -> usize {
        self.events.len()
    }

    pub fn intention_count(&self) -> usize {
        self.intentions.len()
    }

    /// The structured cycle log (C/B/E/P/A/K/S/R/N lines).
    pub fn log_lines(&self) -> &[String] {
        &self.log
    }

    fn push_log(&mut self, now: u64, line: String) {
        self.log.push(format!("{}|{}|{}", self.cycle, now, line));
    }

    fn note(&mut self, now: u64, msg: impl AsRef<str>) {
        let msg = msg.as_ref();
        log::debug!("{}: {msg}", self.name);
        self.push_log(now, format!("N|{msg}"));
    }

    /// Run one reasoning cycle at simulated time `now`.
    pub fn cycle(&mut self, now: u64) -> CycleReport {
        let mut report = CycleReport { cycle: self.cycle, ..CycleReport::default() };
        if self.done {
            report.done = true;
            report.stall = Some("finished".into());
            return report;
        }
        self.generated.clear();

        // Sync gate 1: one in-flight action at a time.
        if let Some((iid, ticket)) = self.pending_ack {
            match self.link.ack_state(ticket.id, now) {
                AckState::Pending => {
                    if now.saturating_sub(ticket.sent_at) >= self.ack_timeout_ms {
                        self.pending_ack = None;
                        self.push_log(now, format!("K|{}|timeout", ticket.id));
                        self.note(now, format!("action {} timed out", ticket.id));
                        self.fail_top_frame(iid, now);
                    } else {
                        report.stall = Some("awaiting ack".into());
                        return report;
                    }
                }
                AckState::Acked(true) => {
                    self.pending_ack = None;
                    self.push_log(now, format!("K|{}|ok", ticket.id));
                }
                AckState::Acked(false) => {
                    self.pending_ack = None;
                    self.push_log(now, format!("K|{}|err", ticket.id));
                    self.note(now, format!("action {} rejected by the robot", ticket.id));
                    self.fail_top_frame(iid, now);
                }
            }
        }

        // Sync gate 2: wait for a percept batch.
        let mut carried: Option<Term> = None;
        if self.mode == ExecMode::Sync
            && self.pending_ack.is_none()
            && !self.link.percepts_waiting(now)
        {
            match self.link.try_perceive(now) {
                Err(_) => {
                    self.done = true;
                    report.done = true;
                    report.stall = Some("link closed".into());
                    return report;
                }
                Ok(None) => {
                    report.stall = Some("awaiting percepts".into());
                    return report;
                }
                Ok(Some(t)) => carried = Some(t),
            }
        }

        self.cycle += 1;
        report.cycle = self.cycle;
        report.executed = true;
        self.push_log(now, "C|".into());

        // Perceive: drain everything that has arrived.
        let mut got = 0;
        if let Some(t) = carried.take() {
            got += 1;
            self.ingest_belief(t, now);
        }
        loop {
            match self.link.try_perceive(now) {
                Ok(Some(t)) => {
                    got += 1;
                    self.ingest_belief(t, now);
                }
                Ok(None) => break,
                Err(_) => {
                    self.done = true;
                    report.done = true;
                    break;
                }
            }
        }
        report.percepts_ingested = got;
        report.percept_queue_empty = got == 0;
        self.push_log(now, format!("Q|{got}"));

        // Mailbox, after percepts.
        let envelopes: Vec<Envelope> = {
            let mut mb = self.mailbox.lock().expect("mailbox lock");
            mb.drain(..).collect()
        };
        for env in envelopes {
            self.push_log(now, format!("R|{}|{}", env.from, env.content));
            let term = env.content.annotated(source_annot(&env.from));
            self.ingest_belief(term, now);
        }

        // Select one event and find a plan for it.
        if let Some(event) = self.events.pop_front() {
            let shown = format!("{}{}", kind_prefix(event.kind), event.term);
            self.push_log(now, format!("E|{shown}"));
            report.selected_event = Some(shown);
            self.handle_event(event, now);
        }

        // One step of one ready intention, round robin.
        let n = self.intentions.len();
        for off in 0..n {
            let idx = (self.rr + off) % n;
            if matches!(self.intentions[idx].status, Status::Active) {
                self.rr = idx + 1;
                let iid = self.intentions[idx].id;
                self.run_step(iid, now);
                report.executed_step = true;
                break;
            }
        }

        // Wake `.wait` suspensions on anything generated this cycle.
        let mut woken = Vec::new();
        for intention in &mut self.intentions {
            if let Status::Suspended(trigger) = &intention.status {
                let hit = self.generated.iter().any(|(k, t)| {
                    *k == trigger.kind && trigger_matches(&trigger.term, t).is_some()
                });
                if hit {
                    intention.status = Status::Active;
                    woken.push(intention.id);
                }
            }
        }
        for iid in woken {
            self.note(now, format!("intention {iid} woken from wait"));
        }

        report.done = self.done;
        report
    }

    /// Add a belief (percept or message) and emit its change events.
    fn ingest_belief(&mut self, term: Term, now: u64) {
        match self.beliefs.add(term) {
            Ok(changes) => self.emit_changes(changes, now),
            Err(e) => self.note(now, format!("ignored: {e}")),
        }
    }

    fn emit_changes(&mut self, changes: Vec<BeliefChange>, now: u64) {
        for change in changes {
            let (kind, term, sign) = match change {
                BeliefChange::Added(t) => (TriggerKind::AddBelief, t, '+'),
                BeliefChange::Removed(t) => (TriggerKind::DelBelief, t, '-'),
            };
            self.push_log(now, format!("B|{sign}|{term}"));
            self.generated.push((kind, term.clone()));
            let relevant = self.plans.iter().any(|p| {
                p.trigger.kind == kind && trigger_matches(&p.trigger.term, &term).is_some()
            });
            if relevant {
                self.events.push_back(Event { kind, term, linked: None });
            }
        }
    }

    fn post_event(&mut self, kind: TriggerKind, term: Term, linked: Option<u64>) {
        self.generated.push((kind, term.clone()));
        self.events.push_back(Event { kind, term, linked });
    }

    /// Find the first applicable plan for an event and push its frame.
    fn handle_event(&mut self, event: Event, now: u64) {
        let mut chosen = None;
        for (idx, plan) in self.plans.iter().enumerate() {
            if plan.trigger.kind != event.kind {
                continue;
            }
            let Some(tu) = trigger_matches(&plan.trigger.term, &event.term) else {
                continue;
            };
            match self.beliefs.first_solution(&plan.context, &tu) {
                Ok(Some(solution)) => {
                    chosen = Some((idx, solution));
                    break;
                }
                Ok(None) => continue,
                Err(e) => {
                    // A context that cannot be evaluated never applies.
                    log::warn!(
                        "{}: plan at line {}: context error: {e}",
                        self.name,
                        plan.line
                    );
                    continue;
                }
            }
        }
        match chosen {
            Some((idx, unifier)) => {
                let plan = &self.plans[idx];
                let frame = Frame {
                    kind: event.kind,
                    goal: event.kind.is_goal().then(|| event.term.clone()),
                    unifier,
                    steps: plan.body.iter().cloned().collect(),
                };
                let line = plan.line;
                self.push_log(now, format!("P|{line}"));
                match event.linked.and_then(|iid| self.find_intention(iid)) {
                    Some(pos) => {
                        self.intentions[pos].frames.push(frame);
                        self.intentions[pos].status = Status::Active;
                    }
                    None => {
                        let id = self.next_intention;
                        self.next_intention += 1;
                        self.intentions.push(Intention {
                            id,
                            frames: vec![frame],
                            status: Status::Active,
                        });
                    }
                }
            }
            None => match event.kind {
                TriggerKind::AddBelief | TriggerKind::DelBelief => {
                    self.note(
                        now,
                        format!("no plan for {}{}", kind_prefix(event.kind), event.term),
                    );
                }
                TriggerKind::AddGoal => {
                    self.note(now, format!("no applicable plan for +!{}", event.term));
                    self.post_event(TriggerKind::DelGoal, event.term, event.linked);
                }
                TriggerKind::DelGoal => {
                    self.note(now, format!("unhandled goal failure -!{}", event.term));
                    if let Some(pos) = event.linked.and_then(|iid| self.find_intention(iid)) {
                        self.intentions.remove(pos);
                    }
                }
            },
        }
    }

    fn find_intention(&self, iid: u64) -> Option<usize> {
        self.intentions.iter().position(|i| i.id == iid)
    }

    /// Run one body step of the given intention.
    fn run_step(&mut self, iid: u64, now: u64) {
        let Some(pos) = self.find_intention(iid) else { return };
        let Some(frame) = self.intentions[pos].frames.last_mut() else {
            self.intentions.remove(pos);
            return;
        };
        let Some(step) = frame.steps.pop_front() else {
            self.pop_completed(pos);
            return;
        };
        let unifier = frame.unifier.clone();
        match self.exec_step(iid, step, unifier, now) {
            StepOutcome::Continue(u) => {
                if let Some(pos) = self.find_intention(iid) {
                    if let Some(frame) = self.intentions[pos].frames.last_mut() {
                        frame.unifier = u;
                        if frame.steps.is_empty() {
                            self.pop_completed(pos);
                        }
                    }
                }
            }
            StepOutcome::Park(u, status) => {
                if let Some(pos) = self.find_intention(iid) {
                    if let Some(frame) = self.intentions[pos].frames.last_mut() {
                        frame.unifier = u;
                    }
                    self.intentions[pos].status = status;
                }
            }
            StepOutcome::Fail(reason) => {
                self.note(now, format!("step failed: {reason}"));
                self.fail_top_frame(iid, now);
            }
        }
    }

    /// Pop finished frames; remove the intention once its stack empties.
    fn pop_completed(&mut self, pos: usize) {
        while matches!(self.intentions[pos].frames.last(), Some(f) if f.steps.is_empty()) {
            self.intentions[pos].frames.pop();
        }
        if self.intentions[pos].frames.is_empty() {
            self.intentions.remove(pos);
        }
    }

    /// Plan failure: a goal frame posts `-!g`; anything else (including a
    /// failing failure handler) takes its whole intention down.
    fn fail_top_frame(&mut self, iid: u64, now: u64) {
        let Some(pos) = self.find_intention(iid) else { return };
        let Some(frame) = self.intentions[pos].frames.pop() else {
            self.intentions.remove(pos);
            return;
        };
        match frame.kind {
            TriggerKind::AddGoal => {
                let goal = frame.goal.expect("goal frames carry their goal");
                self.note(now, format!("goal failed: {goal}"));
                self.intentions[pos].status = Status::AwaitingEvent;
                self.post_event(TriggerKind::DelGoal, goal, Some(iid));
            }
            TriggerKind::DelGoal => {
                self.note(now, "failure handler failed; dropping the intention".to_string());
                self.intentions.remove(pos);
            }
            TriggerKind::AddBelief | TriggerKind::DelBelief => {
                self.note(now, "plan failed; dropping the intention".to_string());
                self.intentions.remove(pos);
            }
        }
    }

    fn exec_step(&mut self, iid: u64, step: BodyStep, u: Subst, now: u64) -> StepOutcome {
        match step {
            BodyStep::Action(term) => {
                let applied = u.apply(&term);
                match self.link.act(&applied, now) {
                    Ok(ticket) => {
                        self.push_log(now, format!("A|{applied}"));
                        if let (ExecMode::Sync, Some(t)) = (self.mode, ticket) {
                            self.pending_ack = Some((iid, t));
                        }
                        StepOutcome::Continue(u)
                    }
                    Err(ActError::Closed) => StepOutcome::Fail("robot link closed".into()),
                    Err(ActError::Encode(e)) => StepOutcome::Fail(e.to_string()),
                }
            }
            BodyStep::Internal(name, args) => self.exec_internal(iid, &name, args, u, now),
            BodyStep::Achieve(term) => {
                let applied = u.apply(&term);
                self.post_event(TriggerKind::AddGoal, applied, Some(iid));
                StepOutcome::Park(u, Status::AwaitingEvent)
            }
            BodyStep::AchieveAsync(term) => {
                let applied = u.apply(&term);
                self.post_event(TriggerKind::AddGoal, applied, None);
                StepOutcome::Continue(u)
            }
            BodyStep::Test(term) => match self.beliefs.query_literal(&term, &u) {
                Ok(Some(solution)) => StepOutcome::Continue(solution),
                Ok(None) => StepOutcome::Fail(format!("test ?{} found nothing", u.apply(&term))),
                Err(e) => StepOutcome::Fail(e.to_string()),
            },
            BodyStep::AddBelief(term) => {
                let applied = u.apply(&term);
                if !applied.is_ground() {
                    return StepOutcome::Fail(format!("+{applied} is not ground"));
                }
                self.ingest_belief(applied.annotated(source_annot("self")), now);
                StepOutcome::Continue(u)
            }
            BodyStep::DelBelief(term) => {
                let applied = u.apply(&term);
                let removed = self.beliefs.remove(&applied);
                let empty = removed.is_empty();
                self.emit_changes(removed.into_iter().map(BeliefChange::Removed).collect(), now);
                if empty {
                    StepOutcome::Fail(format!("-{applied} matched no belief"))
                } else {
                    StepOutcome::Continue(u)
                }
            }
            BodyStep::ReplaceBelief(term) => {
                let applied = u.apply(&term);
                if !applied.is_ground() {
                    return StepOutcome::Fail(format!("-+{applied} is not ground"));
                }
                let Some((functor, arity)) = applied.functor_arity() else {
                    return StepOutcome::Fail(format!("-+{applied}: not a literal"));
                };
                let (functor, arity) = (functor.to_string(), arity);
                let removed = self.beliefs.remove_functor_arity(&functor, arity);
                self.emit_changes(removed.into_iter().map(BeliefChange::Removed).collect(), now);
                self.ingest_belief(applied.annotated(source_annot("self")), now);
                StepOutcome::Continue(u)
            }
            BodyStep::Relation(op, lhs, rhs) => match crate::term::eval_relation(op, &lhs, &rhs, &u)
            {
                Ok(Some(extended)) => StepOutcome::Continue(extended),
                Ok(None) => {
                    StepOutcome::Fail(format!("{} {} {} does not hold", u.apply(&lhs), op, u.apply(&rhs)))
                }
                Err(e) => StepOutcome::Fail(e.to_string()),
            },
        }
    }

    fn exec_internal(
        &mut self,
        iid: u64,
        name: &str,
        args: Vec<Term>,
        u: Subst,
        now: u64,
    ) -> StepOutcome {
        match (name, args.as_slice()) {
            ("send", [receiver, performative, content]) => {
                let receiver = u.apply(receiver);
                let performative = u.apply(performative);
                let Some((perf, 0)) = performative.functor_arity() else {
                    return StepOutcome::Fail(".send: malformed performative".into());
                };
                if perf != "tell" {
                    return StepOutcome::Fail(format!(
                        ".send: performative '{perf}' is not supported"
                    ));
                }
                let Some((to, 0)) = receiver.functor_arity() else {
                    return StepOutcome::Fail(format!(".send: bad receiver {receiver}"));
                };
                let content = u.apply(content);
                if self.registry.send(&self.name, to, content.clone()) {
                    self.push_log(now, format!("S|{to}|{content}"));
                } else {
                    // An unknown receiver is logged, not a plan failure.
                    self.note(now, format!(".send: unknown receiver '{to}'"));
                }
                StepOutcome::Continue(u)
            }
            ("send", _) => StepOutcome::Fail(".send expects (receiver, performative, content)".into()),
            ("wait", [pattern]) => {
                let applied = u.apply(pattern);
                let crate::term::TermKind::Str(src) = &applied.kind else {
                    return StepOutcome::Fail(".wait expects a quoted trigger pattern".into());
                };
                match parse_trigger_pattern(src) {
                    Ok(trigger) => StepOutcome::Park(u, Status::Suspended(trigger)),
                    Err(e) => StepOutcome::Fail(format!(".wait pattern: {e}")),
                }
            }
            ("wait", _) => StepOutcome::Fail(".wait expects one argument".into()),
            ("drop_all_desires", []) => {
                self.events.clear();
                self.intentions.retain(|i| i.id == iid);
                self.rr = 0;
                self.note(now, "dropped all other desires".to_string());
                StepOutcome::Continue(u)
            }
            ("drop_all_desires", _) => {
                StepOutcome::Fail(".drop_all_desires takes no arguments".into())
            }
            ("abolish", [pattern]) => {
                let applied = u.apply(pattern);
                let removed = self.beliefs.abolish(&applied);
                self.emit_changes(removed.into_iter().map(BeliefChange::Removed).collect(), now);
                StepOutcome::Continue(u)
            }
            ("abolish", _) => StepOutcome::Fail(".abolish expects one argument".into()),
            (other, _) => StepOutcome::Fail(format!("unknown internal action .{other}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::LinkClosed;
    use crate::parser::parse_agent_program;

    /// Scripted link: canned percepts in, actions recorded, acks by hand.
    struct ScriptLink {
        feed: VecDeque<(u64, Term)>,
        actions: Arc<Mutex<Vec<Term>>>,
        acks: Arc<Mutex<HashMap<u64, bool>>>,
        auto_ack: bool,
        next_id: u64,
        closed: bool,
    }

    impl ScriptLink {
        fn new(auto_ack: bool) -> (ScriptLink, Arc<Mutex<Vec<Term>>>, Arc<Mutex<HashMap<u64, bool>>>)
        {
            let actions = Arc::new(Mutex::new(Vec::new()));
            let acks = Arc::new(Mutex::new(HashMap::new()));
            (
                ScriptLink {
                    feed: VecDeque::new(),
                    actions: actions.clone(),
                    acks: acks.clone(),
                    auto_ack,
                    next_id: 0,
                    closed: false,
                },
                actions,
                acks,
            )
        }

        fn feed(&mut self, at: u64, src: &str) {
            let t = crate::parser::parse_term(src).unwrap().annotated(source_annot("percept"));
            self.feed.push_back((at, t));
        }
    }

    impl MindLink for ScriptLink {
        fn try_perceive(&mut self, now: u64) -> Result<Option<Term>, LinkClosed> {
            if let Some((at, _)) = self.feed.front() {
                if *at <= now {
                    return Ok(self.feed.pop_front().map(|(_, t)| t));
                }
            }
            if self.closed {
                Err(LinkClosed)
            } else {
                Ok(None)
            }
        }

        fn percepts_waiting(&mut self, now: u64) -> bool {
            matches!(self.feed.front(), Some((at, _)) if *at <= now)
        }

        fn act(&mut self, action: &Term, _now: u64) -> Result<Option<ActionTicket>, ActError> {
            crate::wire::encode_action(action).map_err(ActError::Encode)?;
            self.actions.lock().unwrap().push(action.clone());
            if action.functor_arity() == Some(("exit", 0)) {
                return Ok(None);
            }
            self.next_id += 1;
            if self.auto_ack {
                self.acks.lock().unwrap().insert(self.next_id, true);
            }
            Ok(Some(ActionTicket { id: self.next_id, sent_at: _now }))
        }

        fn ack_state(&mut self, id: u64, _now: u64) -> AckState {
            match self.acks.lock().unwrap().get(&id) {
                Some(ok) => AckState::Acked(*ok),
                None => AckState::Pending,
            }
        }
    }

    fn agent(src: &str, mode: ExecMode) -> (Agent, Arc<Mutex<Vec<Term>>>, Registry) {
        agent_with_link(src, mode, ScriptLink::new(true))
    }

    fn agent_with_link(
        src: &str,
        mode: ExecMode,
        parts: (ScriptLink, Arc<Mutex<Vec<Term>>>, Arc<Mutex<HashMap<u64, bool>>>),
    ) -> (Agent, Arc<Mutex<Vec<Term>>>, Registry) {
        let program = parse_agent_program(src).expect("test program parses");
        let registry = Registry::new();
        let (link, actions, _acks) = parts;
        let a = Agent::new("tester", program, Vec::new(), Box::new(link), &registry, mode, 1000);
        (a, actions, registry)
    }

    fn run(a: &mut Agent, cycles: u64) {
        for i in 0..cycles {
            a.cycle(i * 10);
        }
    }

    fn has_belief(a: &Agent, src: &str) -> bool {
        let t = crate::parser::parse_term(src).unwrap();
        a.beliefs().count_matching(&t) > 0
    }

    #[test]
    fn initial_goal_runs_first_applicable_plan_in_source_order() {
        let src = "q.\n\
                   !g.\n\
                   +!g : p <- +chose(first).\n\
                   +!g : q <- +chose(second).\n\
                   +!g : true <- +chose(third).\n";
        let (mut a, _, _) = agent(src, ExecMode::Async);
        run(&mut a, 4);
        assert!(has_belief(&a, "chose(second)"));
        assert!(!has_belief(&a, "chose(first)"));
        assert!(!has_belief(&a, "chose(third)"));
        assert_eq!(a.intention_count(), 0, "finished intentions are removed");
    }

    #[test]
    fn initial_beliefs_do_not_fire_events() {
        let src = "p.\n+p <- +bad.\n";
        let (mut a, _, _) = agent(src, ExecMode::Async);
        run(&mut a, 3);
        assert!(!has_belief(&a, "bad"));
        assert!(has_belief(&a, "p"));
    }

    #[test]
    fn percept_events_are_fifo_one_per_cycle() {
        let src = "+e(X)[source(percept)] <- +seen(X).\n";
        let (mut link, actions, acks) = ScriptLink::new(true);
        link.feed(0, "e(1)");
        link.feed(0, "e(2)");
        let (mut a, _, _) = agent_with_link(src, ExecMode::Async, (link, actions, acks));
        a.cycle(0);
        assert_eq!(a.pending_events(), 1, "one event selected, one still queued");
        assert!(has_belief(&a, "seen(1)"), "first event handled in its cycle");
        assert!(!has_belief(&a, "seen(2)"));
        a.cycle(10);
        a.cycle(20);
        assert!(has_belief(&a, "seen(2)"));
    }

    #[test]
    fn corpus_style_recursion_with_relation_counter() {
        let src = "!count(2).\n\
                   +!count(N) : N == 0 <- +finished.\n\
                   +!count(N) : N > 0 <- M = N - 1; !count(M).\n";
        let (mut a, _, _) = agent(src, ExecMode::Async);
        run(&mut a, 12);
        assert!(has_belief(&a, "finished"));
        assert_eq!(a.intention_count(), 0);
    }

    #[test]
    fn failed_test_goal_triggers_failure_handler() {
        let src = "!boom.\n\
                   +!boom <- ?missing(1); +notreached.\n\
                   -!boom <- +handled.\n";
        let (mut a, _, _) = agent(src, ExecMode::Async);
        run(&mut a, 6);
        assert!(has_belief(&a, "handled"));
        assert!(!has_belief(&a, "notreached"));
        assert_eq!(a.intention_count(), 0);
    }

    #[test]
    fn unhandled_goal_failure_discards_the_intention() {
        let src = "!boom.\n+!boom <- ?missing(1).\n";
        let (mut a, _, _) = agent(src, ExecMode::Async);
        run(&mut a, 6);
        assert_eq!(a.intention_count(), 0);
        assert!(a.log_lines().iter().any(|l| l.contains("unhandled goal failure")));
    }

    #[test]
    fn no_applicable_plan_for_goal_posts_failure() {
        let src = "!go.\n\
                   +!go : impossible <- +x.\n\
                   -!go <- +recovered.\n";
        let (mut a, _, _) = agent(src, ExecMode::Async);
        run(&mut a, 5);
        assert!(has_belief(&a, "recovered"));
    }

    #[test]
    fn belief_plan_failure_drops_only_that_intention() {
        let src = "+t(X)[source(percept)] <- ?missing(X); +bad.\n";
        let (mut link, actions, acks) = ScriptLink::new(true);
        link.feed(0, "t(1)");
        let (mut a, _, _) = agent_with_link(src, ExecMode::Async, (link, actions, acks));
        run(&mut a, 5);
        assert_eq!(a.intention_count(), 0);
        assert!(!has_belief(&a, "bad"));
        assert!(a.log_lines().iter().any(|l| l.contains("dropping the intention")));
    }

    #[test]
    fn wait_suspends_until_matching_event() {
        let src = "!move.\n\
                   +!move : not e(_) <- .wait(\"+e(_)\"); +woke.\n";
        let (mut link, actions, acks) = ScriptLink::new(true);
        link.feed(40, "e(5)");
        let (mut a, _, _) = agent_with_link(src, ExecMode::Async, (link, actions, acks));
        a.cycle(0); // select +!move
        a.cycle(10); // run .wait → suspended
        a.cycle(20);
        a.cycle(30);
        assert!(!has_belief(&a, "woke"), "still parked");
        a.cycle(40); // percept e(5) arrives: filtered from the queue, wakes the wait
        assert_eq!(a.pending_events(), 0, "no +e plan exists, so no event is queued");
        a.cycle(50); // woken intention steps
        assert!(has_belief(&a, "woke"));
    }

    #[test]
    fn corpus_style_reset_with_drop_and_abolish() {
        let src = "junk(1).\n\
                   !a.\n\
                   !b.\n\
                   +!a <- .drop_all_desires; .abolish(junk(_)); !!c; +afterwards.\n\
                   +!b <- +should_not_run.\n\
                   +!c <- +c_ran.\n";
        let (mut a, _, _) = agent(src, ExecMode::Async);
        run(&mut a, 10);
        assert!(has_belief(&a, "afterwards"));
        assert!(has_belief(&a, "c_ran"), "!!c spawned a fresh intention");
        assert!(!has_belief(&a, "should_not_run"), ".drop_all_desires cleared +!b");
        assert!(!has_belief(&a, "junk(1)"));
        assert!(a.log_lines().iter().any(|l| l.contains("B|-|junk(1)")));
    }

    #[test]
    fn replace_belief_counts_like_the_crossing_programs() {
        let src = "last_color(white).\n\
                   bars_passed(0).\n\
                   +flip[source(percept)] : last_color(white) <- -+last_color(black); \
                     ?bars_passed(N); M = N + 1; -+bars_passed(M).\n";
        let (mut link, actions, acks) = ScriptLink::new(true);
        link.feed(0, "flip");
        link.feed(100, "flip"); // verbatim duplicate: no event, no double count
        let (mut a, _, _) = agent_with_link(src, ExecMode::Async, (link, actions, acks));
        for t in 0..30 {
            a.cycle(t * 10);
        }
        assert!(has_belief(&a, "bars_passed(1)"));
        assert!(!has_belief(&a, "bars_passed(2)"), "duplicate percept must not re-fire");
        assert!(has_belief(&a, "last_color(black)"));
        assert!(!has_belief(&a, "last_color(white)"));
    }

    #[test]
    fn send_delivers_with_source_annotation() {
        let registry = Registry::new();
        let sender_src = "!go.\n+!go <- .send(receiver, tell, ping(7)).\n";
        let receiver_src = "+ping(X)[source(sender)] <- +got(X).\n";
        let (s_link, _, _) = ScriptLink::new(true);
        let (r_link, _, _) = ScriptLink::new(true);
        let mut sender = Agent::new(
            "sender",
            parse_agent_program(sender_src).unwrap(),
            Vec::new(),
            Box::new(s_link),
            &registry,
            ExecMode::Async,
            1000,
        );
        let mut receiver = Agent::new(
            "receiver",
            parse_agent_program(receiver_src).unwrap(),
            Vec::new(),
            Box::new(r_link),
            &registry,
            ExecMode::Async,
            1000,
        );
        for t in 0..6 {
            sender.cycle(t * 10);
            receiver.cycle(t * 10);
        }
        assert!(has_belief(&receiver, "got(7)"));
        assert_eq!(registry.sent_count("ping", 1), 1);
        assert_eq!(registry.sent_log().len(), 1);
        assert!(sender.log_lines().iter().any(|l| l.contains("S|receiver|ping(7)")));
        assert!(receiver.log_lines().iter().any(|l| l.contains("R|sender|ping(7)")));
    }

    #[test]
    fn send_to_unknown_receiver_is_logged_not_fatal() {
        let src = "!go.\n+!go <- .send(nobody, tell, x); +survived.\n";
        let (mut a, _, registry) = agent(src, ExecMode::Async);
        run(&mut a, 5);
        assert!(has_belief(&a, "survived"));
        assert!(a.log_lines().iter().any(|l| l.contains("unknown receiver")));
        assert_eq!(registry.sent_log().len(), 0);
    }

    #[test]
    fn tell_how_is_rejected() {
        let src = "!go.\n\
                   +!go <- .send(receiver, tellHow, x); +notreached.\n\
                   -!go <- +rejected.\n";
        let (mut a, _, _) = agent(src, ExecMode::Async);
        run(&mut a, 6);
        assert!(has_belief(&a, "rejected"));
        assert!(!has_belief(&a, "notreached"));
    }

    #[test]
    fn unknown_internal_action_fails_the_plan() {
        let src = "!go.\n+!go <- .levitate; +notreached.\n";
        let (mut a, _, _) = agent(src, ExecMode::Async);
        run(&mut a, 5);
        assert!(!has_belief(&a, "notreached"));
        assert!(a.log_lines().iter().any(|l| l.contains("unknown internal action .levitate")));
    }

    #[test]
    fn round_robin_interleaves_intentions() {
        let src = "+p1[source(percept)] <- +a1; +a2.\n\
                   +p2[source(percept)] <- +b1; +b2.\n";
        let (mut link, actions, acks) = ScriptLink::new(true);
        link.feed(0, "p1");
        link.feed(0, "p2");
        let (mut a, _, _) = agent_with_link(src, ExecMode::Async, (link, actions, acks));
        run(&mut a, 8);
        let adds: Vec<&str> = a
            .log_lines()
            .iter()
            .filter_map(|l| l.split("B|+|").nth(1))
            .filter(|t| t.starts_with('a') || t.starts_with('b'))
            .collect();
        assert_eq!(adds, vec!["a1[source(self)]", "b1[source(self)]", "a2[source(self)]", "b2[source(self)]"]);
    }

    #[test]
    fn uniqueness_patterns_replace_and_fire_events() {
        let src = "+light(_,X)[source(percept)] : X > 0 <- +observed(X).\n";
        let program = parse_agent_program(src).unwrap();
        let registry = Registry::new();
        let (mut link, _actions, _acks) = ScriptLink::new(true);
        link.feed(0, "light(1, 360)");
        link.feed(50, "light(1, 355)");
        let pattern =
            UniquenessPattern::from_term(&crate::parser::parse_term("light(port, _)").unwrap())
                .unwrap();
        let mut a = Agent::new(
            "tester",
            program,
            vec![pattern],
            Box::new(link),
            &registry,
            ExecMode::Async,
            1000,
        );
        for t in 0..12 {
            a.cycle(t * 10);
        }
        let light = crate::parser::parse_term("light(1, _)").unwrap();
        assert_eq!(a.beliefs().count_matching(&light), 1, "one belief per port");
        assert!(has_belief(&a, "observed(360)"));
        assert!(has_belief(&a, "observed(355)"));
        assert!(a.log_lines().iter().any(|l| l.contains("B|-|light(1,360)")));
    }

    #[test]
    fn sync_mode_stalls_until_percepts_arrive() {
        let src = "!go.\n+!go <- +stepped.\n";
        let (mut link, actions, acks) = ScriptLink::new(true);
        link.feed(0, "light(1, 500)");
        link.feed(30, "light(1, 501)");
        let (mut a, _, _) = agent_with_link(src, ExecMode::Sync, (link, actions, acks));
        let r = a.cycle(0);
        assert!(r.executed, "percepts were waiting");
        assert_eq!(r.percepts_ingested, 1);
        let r = a.cycle(10);
        assert!(!r.executed, "no percepts yet: stall");
        assert_eq!(r.stall.as_deref(), Some("awaiting percepts"));
        assert_eq!(a.cycle_count(), 1, "stalls are not reasoning cycles");
        let r = a.cycle(30);
        assert!(r.executed);
        assert!(has_belief(&a, "stepped"));
    }

    #[test]
    fn sync_mode_gates_on_acks() {
        let src = "!go.\n+!go <- forward([a],[60]); +after.\n";
        let (mut link, actions, acks) = ScriptLink::new(false);
        link.feed(0, "light(1, 500)");
        link.feed(30, "light(1, 501)");
        let (mut a, _, _) =
            agent_with_link(src, ExecMode::Sync, (link, actions.clone(), acks.clone()));
        let r = a.cycle(0);
        assert!(r.executed);
        // The first cycle handled +!go and dispatched the action step.
        assert_eq!(actions.lock().unwrap().len(), 1);
        let r = a.cycle(10);
        assert!(!r.executed);
        assert_eq!(r.stall.as_deref(), Some("awaiting ack"));
        let r = a.cycle(30);
        assert!(!r.executed, "percepts alone do not unblock a pending ack");
        assert_eq!(a.cycle_count(), 1);
        assert!(!has_belief(&a, "after"));
        acks.lock().unwrap().insert(1, true);
        let r = a.cycle(40);
        assert!(r.executed, "ack consumed and a percept batch was waiting");
        a.cycle(50);
        assert!(has_belief(&a, "after"));
        assert!(a.log_lines().iter().any(|l| l.contains("K|1|ok")));
    }

    #[test]
    fn sync_ack_timeout_fails_the_plan() {
        let src = "!go.\n\
                   +!go <- forward([a],[60]); +notreached.\n\
                   -!go <- +timedout.\n";
        let (mut link, actions, acks) = ScriptLink::new(false);
        for t in 0..200 {
            link.feed(t * 10, "light(1, 500)");
        }
        let (mut a, _, _) = agent_with_link(src, ExecMode::Sync, (link, actions, acks));
        let mut t = 0;
        while !has_belief(&a, "timedout") && t < 2000 {
            a.cycle(t);
            t += 10;
        }
        assert!(has_belief(&a, "timedout"), "ack timeout routes into -!go");
        assert!(!has_belief(&a, "notreached"));
        assert!(a.log_lines().iter().any(|l| l.contains("timeout")));
        assert!(t >= 1000, "timed out only after the 1000 ms budget, got {t}");
    }

    #[test]
    fn async_mode_runs_with_empty_percept_queue() {
        let src = "!go.\n+!go <- +stepped.\n";
        let (mut a, _, _) = agent(src, ExecMode::Async);
        let r = a.cycle(0);
        assert!(r.executed);
        assert!(r.percept_queue_empty);
        assert!(r.selected_event.is_some());
    }

    #[test]
    fn exit_action_closes_without_ticket() {
        let src = "!go.\n+!go <- exit.\n";
        let (link, actions, acks) = ScriptLink::new(false);
        let (mut a, _, _) = agent_with_link(src, ExecMode::Async, (link, actions.clone(), acks));
        run(&mut a, 4);
        assert_eq!(actions.lock().unwrap().len(), 1);
        assert_eq!(a.intention_count(), 0, "exit completes without waiting for an ack");
    }
}

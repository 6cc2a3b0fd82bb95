//! Transport between an agent mind and its robot brick.
//!
//! Two implementations share the [`MindLink`]/[`RobotLink`] traits: an
//! in-process channel pair with injected latency for deterministic
//! lock-step runs, and a minimal TCP transport for free-running threaded
//! setups. The channel transport records every record (timestamped, with
//! direction) into a wire log at send time and keeps per-direction
//! counters, which downstream checks compare against the log itself.
//!
//! Latency is sampled per record, uniformly from `base ± jitter`
//! milliseconds, independently per direction. Delivery preserves send
//! order: each record is due no earlier than the one before it.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{Receiver, Sender, TryRecvError};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::term::Term;
use crate::wire::{
    decode_percept, encode_action, EncodedAction, SensorChannel, WireError, WireRecord,
};

/// Milliseconds since the start of a run. Sim time is driven by the
/// harness storing into a shared counter; wall time is for free-running
/// transports.
#[derive(Clone, Debug)]
pub enum Clock {
    Sim(Arc<AtomicU64>),
    Wall(Instant),
}

impl Clock {
    /// A simulated clock plus the handle that advances it.
    pub fn sim() -> (Clock, Arc<AtomicU64>) {
        let cell = Arc::new(AtomicU64::new(0));
        (Clock::Sim(cell.clone()), cell)
    }

    pub fn wall() -> Clock {
        Clock::Wall(Instant::now())
    }

    pub fn now_ms(&self) -> u64 {
        match self {
            Clock::Sim(cell) => cell.load(Ordering::Relaxed),
            Clock::Wall(start) => start.elapsed().as_millis() as u64,
        }
    }
}

/// Transport delay model: uniform on `base ± jitter`, floored at zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Latency {
    pub base_ms: u64,
    pub jitter_ms: u64,
}

impl Latency {
    pub const NONE: Latency = Latency { base_ms: 0, jitter_ms: 0 };

    pub fn new(base_ms: u64, jitter_ms: u64) -> Latency {
        Latency { base_ms, jitter_ms }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        let lo = self.base_ms.saturating_sub(self.jitter_ms);
        let hi = self.base_ms + self.jitter_ms;
        rng.gen_range(lo..=hi)
    }
}

impl Default for Latency {
    fn default() -> Latency {
        Latency { base_ms: 30, jitter_ms: 20 }
    }
}

/// A one-direction queue of records in flight.
struct Channel {
    queue: VecDeque<(u64, WireRecord)>,
    last_deliver_at: u64,
    latency: Latency,
    rng: ChaCha8Rng,
}

impl Channel {
    fn new(latency: Latency, rng: ChaCha8Rng) -> Channel {
        Channel { queue: VecDeque::new(), last_deliver_at: 0, latency, rng }
    }

    fn push(&mut self, rec: WireRecord, now: u64) {
        let due = (now + self.latency.sample(&mut self.rng)).max(self.last_deliver_at);
        self.last_deliver_at = due;
        self.queue.push_back((due, rec));
    }

    fn pop_ready(&mut self, now: u64) -> Option<WireRecord> {
        if self.queue.front().is_some_and(|(due, _)| *due <= now) {
            Some(self.queue.pop_front().expect("front checked").1)
        } else {
            None
        }
    }

    fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// Per-direction record counts. The channel transport guarantees
/// `to_robot + to_mind == wire log length`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub to_robot: u64,
    pub to_mind: u64,
}

impl LinkStats {
    pub fn total(&self) -> u64 {
        self.to_robot + self.to_mind
    }
}

struct LinkState {
    to_robot: Channel,
    to_mind: Channel,
    closed: bool,
    log: Vec<String>,
    stats: LinkStats,
}

impl LinkState {
    fn record(&mut self, to_robot: bool, rec: &WireRecord, now: u64) {
        let dir = if to_robot { '>' } else { '<' };
        self.log.push(format!("{now}|{dir}|{}", rec.to_line()));
        if to_robot {
            self.stats.to_robot += 1;
        } else {
            self.stats.to_mind += 1;
        }
    }
}

/// Read access to a link's wire log and counters, independent of either
/// endpoint.
#[derive(Clone)]
pub struct LinkHandle {
    state: Arc<Mutex<LinkState>>,
}

impl LinkHandle {
    pub fn wire_log(&self) -> Vec<String> {
        self.state.lock().expect("link poisoned").log.clone()
    }

    pub fn stats(&self) -> LinkStats {
        self.state.lock().expect("link poisoned").stats
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("link closed")]
pub struct LinkClosed;

#[derive(Debug, Error)]
pub enum ActError {
    #[error("link closed")]
    Closed,
    #[error(transparent)]
    Encode(#[from] WireError),
}

/// Handle for one dispatched action, used to pair it with its ack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ActionTicket {
    pub id: u64,
    pub sent_at: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AckState {
    Pending,
    /// Acknowledged; `true` for success, `false` for a rejected action.
    Acked(bool),
}

/// The mind's side of a robot link.
pub trait MindLink: Send {
    /// Next decoded percept that has arrived, oldest first. `Err` means the
    /// robot has shut down and everything in flight has been drained.
    fn try_perceive(&mut self, now: u64) -> Result<Option<Term>, LinkClosed>;

    /// Whether a percept is ready right now (the synchronous-mode gate).
    fn percepts_waiting(&mut self, now: u64) -> bool;

    /// Encodes and sends an action. `exit` returns `Ok(None)` — the robot
    /// never acknowledges its own shutdown; motor commands return a ticket.
    fn act(&mut self, action: &Term, now: u64) -> Result<Option<ActionTicket>, ActError>;

    fn ack_state(&mut self, id: u64, now: u64) -> AckState;
}

/// The brick's side of a robot link.
pub trait RobotLink: Send {
    /// Drains every record that has arrived, in arrival order.
    fn recv(&mut self, now: u64) -> Vec<WireRecord>;

    fn send_percept(&mut self, kind: SensorChannel, port: u8, value: i64, now: u64);

    fn send_ack(&mut self, id: u64, ok: bool, now: u64);

    /// Marks the link closed (after an exit record is processed). Records
    /// already in flight still deliver.
    fn close(&mut self);

    fn closed(&self) -> bool;
}

// --- in-process channel transport -----------------------------------------

pub struct ChannelMindLink {
    state: Arc<Mutex<LinkState>>,
    next_id: u64,
    percepts: VecDeque<Term>,
    acks: HashMap<u64, bool>,
    exit_sent: bool,
}

impl ChannelMindLink {
    fn pump(&mut self, now: u64) {
        let mut state = self.state.lock().expect("link poisoned");
        while let Some(rec) = state.to_mind.pop_ready(now) {
            match &rec {
                WireRecord::Ack { id, ok } => {
                    self.acks.insert(*id, *ok);
                }
                WireRecord::Percept { .. } => match decode_percept(&rec) {
                    Ok(t) => self.percepts.push_back(t),
                    Err(e) => log::warn!("dropping malformed percept: {e}"),
                },
                other => log::warn!("unexpected record on mind side: {}", other.to_line()),
            }
        }
    }
}

impl MindLink for ChannelMindLink {
    fn try_perceive(&mut self, now: u64) -> Result<Option<Term>, LinkClosed> {
        self.pump(now);
        if let Some(t) = self.percepts.pop_front() {
            return Ok(Some(t));
        }
        let state = self.state.lock().expect("link poisoned");
        if state.closed && state.to_mind.is_empty() {
            Err(LinkClosed)
        } else {
            Ok(None)
        }
    }

    fn percepts_waiting(&mut self, now: u64) -> bool {
        self.pump(now);
        !self.percepts.is_empty()
    }

    fn act(&mut self, action: &Term, now: u64) -> Result<Option<ActionTicket>, ActError> {
        if self.exit_sent {
            return Err(ActError::Closed);
        }
        let encoded = encode_action(action)?;
        let mut state = self.state.lock().expect("link poisoned");
        if state.closed {
            return Err(ActError::Closed);
        }
        match encoded {
            EncodedAction::Exit => {
                let rec = WireRecord::Exit;
                state.record(true, &rec, now);
                state.to_robot.push(rec, now);
                self.exit_sent = true;
                Ok(None)
            }
            EncodedAction::Motor(p) => {
                let id = self.next_id;
                self.next_id += 1;
                let rec =
                    WireRecord::Action { id, verb: p.verb, motors: p.motors, args: p.args };
                state.record(true, &rec, now);
                state.to_robot.push(rec, now);
                Ok(Some(ActionTicket { id, sent_at: now }))
            }
        }
    }

    fn ack_state(&mut self, id: u64, now: u64) -> AckState {
        self.pump(now);
        match self.acks.get(&id) {
            Some(&ok) => AckState::Acked(ok),
            None => AckState::Pending,
        }
    }
}

pub struct ChannelRobotLink {
    state: Arc<Mutex<LinkState>>,
}

impl RobotLink for ChannelRobotLink {
    fn recv(&mut self, now: u64) -> Vec<WireRecord> {
        let mut state = self.state.lock().expect("link poisoned");
        let mut out = Vec::new();
        while let Some(rec) = state.to_robot.pop_ready(now) {
            out.push(rec);
        }
        out
    }

    fn send_percept(&mut self, kind: SensorChannel, port: u8, value: i64, now: u64) {
        let mut state = self.state.lock().expect("link poisoned");
        if state.closed {
            return;
        }
        let rec = WireRecord::Percept { kind, port, value };
        state.record(false, &rec, now);
        state.to_mind.push(rec, now);
    }

    fn send_ack(&mut self, id: u64, ok: bool, now: u64) {
        let mut state = self.state.lock().expect("link poisoned");
        if state.closed {
            return;
        }
        let rec = WireRecord::Ack { id, ok };
        state.record(false, &rec, now);
        state.to_mind.push(rec, now);
    }

    fn close(&mut self) {
        self.state.lock().expect("link poisoned").closed = true;
    }

    fn closed(&self) -> bool {
        self.state.lock().expect("link poisoned").closed
    }
}

/// Builds a connected mind/robot pair with independent per-direction
/// latency randomness, plus a handle onto the shared wire log.
pub fn channel_link(
    latency: Latency,
    rng_to_robot: ChaCha8Rng,
    rng_to_mind: ChaCha8Rng,
) -> (ChannelMindLink, ChannelRobotLink, LinkHandle) {
    let state = Arc::new(Mutex::new(LinkState {
        to_robot: Channel::new(latency, rng_to_robot),
        to_mind: Channel::new(latency, rng_to_mind),
        closed: false,
        log: Vec::new(),
        stats: LinkStats::default(),
    }));
    (
        ChannelMindLink {
            state: state.clone(),
            next_id: 1,
            percepts: VecDeque::new(),
            acks: HashMap::new(),
            exit_sent: false,
        },
        ChannelRobotLink { state: state.clone() },
        LinkHandle { state },
    )
}

// --- TCP transport ---------------------------------------------------------

fn spawn_line_reader(stream: TcpStream, tx: Sender<WireRecord>) {
    std::thread::spawn(move || {
        let reader = BufReader::new(stream);
        for line in reader.lines() {
            let Ok(line) = line else { break };
            if line.is_empty() {
                continue;
            }
            match WireRecord::parse_line(&line) {
                Ok(rec) => {
                    if tx.send(rec).is_err() {
                        break;
                    }
                }
                Err(e) => log::warn!("dropping malformed wire line: {e}"),
            }
        }
    });
}

fn write_line(stream: &mut TcpStream, line: &str) -> std::io::Result<()> {
    stream.write_all(line.as_bytes())?;
    stream.write_all(b"\n")?;
    stream.flush()
}

/// Mind's end of a TCP link. No artificial latency, wall-clock driven;
/// the `now` parameters are ignored.
pub struct TcpMindLink {
    writer: TcpStream,
    rx: Receiver<WireRecord>,
    percepts: VecDeque<Term>,
    acks: HashMap<u64, bool>,
    next_id: u64,
    exit_sent: bool,
    disconnected: bool,
}

impl TcpMindLink {
    /// Connects to a robot endpoint and introduces itself with
    /// `HELLO|<btname>`.
    pub fn connect(addr: &str, btname: &str) -> std::io::Result<TcpMindLink> {
        let mut writer = TcpStream::connect(addr)?;
        write_line(&mut writer, &format!("HELLO|{btname}"))?;
        let (tx, rx) = std::sync::mpsc::channel();
        spawn_line_reader(writer.try_clone()?, tx);
        Ok(TcpMindLink {
            writer,
            rx,
            percepts: VecDeque::new(),
            acks: HashMap::new(),
            next_id: 1,
            exit_sent: false,
            disconnected: false,
        })
    }

    fn pump(&mut self) {
        loop {
            match self.rx.try_recv() {
                Ok(WireRecord::Ack { id, ok }) => {
                    self.acks.insert(id, ok);
                }
                Ok(rec @ WireRecord::Percept { .. }) => match decode_percept(&rec) {
                    Ok(t) => self.percepts.push_back(t),
                    Err(e) => log::warn!("dropping malformed percept: {e}"),
                },
                Ok(other) => {
                    log::warn!("unexpected record on mind side: {}", other.to_line())
                }
                Err(TryRecvError::Empty) => return,
                Err(TryRecvError::Disconnected) => {
                    self.disconnected = true;
                    return;
                }
            }
        }
    }
}

impl MindLink for TcpMindLink {
    fn try_perceive(&mut self, _now: u64) -> Result<Option<Term>, LinkClosed> {
        self.pump();
        if let Some(t) = self.percepts.pop_front() {
            return Ok(Some(t));
        }
        if self.disconnected {
            Err(LinkClosed)
        } else {
            Ok(None)
        }
    }

    fn percepts_waiting(&mut self, _now: u64) -> bool {
        self.pump();
        !self.percepts.is_empty()
    }

    fn act(&mut self, action: &Term, now: u64) -> Result<Option<ActionTicket>, ActError> {
        if self.exit_sent || self.disconnected {
            return Err(ActError::Closed);
        }
        match encode_action(action)? {
            EncodedAction::Exit => {
                write_line(&mut self.writer, &WireRecord::Exit.to_line())
                    .map_err(|_| ActError::Closed)?;
                self.exit_sent = true;
                Ok(None)
            }
            EncodedAction::Motor(p) => {
                let id = self.next_id;
                self.next_id += 1;
                let rec =
                    WireRecord::Action { id, verb: p.verb, motors: p.motors, args: p.args };
                write_line(&mut self.writer, &rec.to_line()).map_err(|_| ActError::Closed)?;
                Ok(Some(ActionTicket { id, sent_at: now }))
            }
        }
    }

    fn ack_state(&mut self, id: u64, _now: u64) -> AckState {
        self.pump();
        match self.acks.get(&id) {
            Some(&ok) => AckState::Acked(ok),
            None => AckState::Pending,
        }
    }
}

/// Brick's end of a TCP link.
pub struct TcpRobotLink {
    writer: TcpStream,
    rx: Receiver<WireRecord>,
    closed: bool,
    disconnected: bool,
}

impl TcpRobotLink {
    /// Accepts one mind connection; returns the link and the btname from
    /// the `HELLO` line.
    pub fn accept(listener: &TcpListener) -> std::io::Result<(TcpRobotLink, String)> {
        let (stream, _) = listener.accept()?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut hello = String::new();
        reader.read_line(&mut hello)?;
        let btname = hello
            .trim_end()
            .strip_prefix("HELLO|")
            .ok_or_else(|| {
                std::io::Error::new(std::io::ErrorKind::InvalidData, "missing HELLO handshake")
            })?
            .to_string();
        let (tx, rx) = std::sync::mpsc::channel();
        spawn_line_reader(stream.try_clone()?, tx);
        Ok((TcpRobotLink { writer: stream, rx, closed: false, disconnected: false }, btname))
    }
}

impl RobotLink for TcpRobotLink {
    fn recv(&mut self, _now: u64) -> Vec<WireRecord> {
        let mut out = Vec::new();
        loop {
            match self.rx.try_recv() {
                Ok(rec) => out.push(rec),
                Err(TryRecvError::Empty) => return out,
                Err(TryRecvError::Disconnected) => {
                    self.disconnected = true;
                    return out;
                }
            }
        }
    }

    fn send_percept(&mut self, kind: SensorChannel, port: u8, value: i64, _now: u64) {
        if self.closed {
            return;
        }
        let rec = WireRecord::Percept { kind, port, value };
        if write_line(&mut self.writer, &rec.to_line()).is_err() {
            self.disconnected = true;
        }
    }

    fn send_ack(&mut self, id: u64, ok: bool, _now: u64) {
        if self.closed {
            return;
        }
        let rec = WireRecord::Ack { id, ok };
        if write_line(&mut self.writer, &rec.to_line()).is_err() {
            self.disconnected = true;
        }
    }

    fn close(&mut self) {
        self.closed = true;
        let _ = self.writer.shutdown(std::net::Shutdown::Write);
    }

    fn closed(&self) -> bool {
        self.closed || self.disconnected
    }
}

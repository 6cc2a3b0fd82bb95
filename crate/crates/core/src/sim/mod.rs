//! The simulated robot: motors with tacho counters, a differential-drive
//! body, median-filtered noisy sensors, and the brick firmware loop that
//! ties them to a wire link.
//!
//! Conventions: distances in millimeters, angles in radians for poses and
//! degrees for wheel rotations, time in milliseconds. Motor A drives the
//! left wheel and motor B the right; positive lateral offsets are to the
//! robot's left. Headings are normalized to (-π, π].

pub mod world;

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bridge::RobotLink;
use crate::parser::SensorKind;
use crate::wire::{Motor, SensorChannel, Verb, WireRecord};
use world::{MountSpec, RobotPlacement, World};

/// What a motor is currently doing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MotorMode {
    Idle,
    Forward,
    Backward,
    /// Regulated move to an absolute tacho target, then stop.
    Rotating { target_deg: f64 },
}

/// One output port. The tacho counter accumulates degrees turned.
#[derive(Clone, Copy, Debug)]
pub struct MotorState {
    pub configured: bool,
    pub mode: MotorMode,
    /// Last commanded speed in degrees per second; rotations run at its
    /// magnitude.
    pub speed_dps: f64,
    pub tacho_deg: f64,
}

impl MotorState {
    fn new(configured: bool) -> MotorState {
        MotorState { configured, mode: MotorMode::Idle, speed_dps: 360.0, tacho_deg: 0.0 }
    }

    /// Advance the tacho by `dt_s` seconds of the current mode.
    fn step(&mut self, dt_s: f64) {
        match self.mode {
            MotorMode::Idle => {}
            MotorMode::Forward => self.tacho_deg += self.speed_dps * dt_s,
            MotorMode::Backward => self.tacho_deg -= self.speed_dps * dt_s,
            MotorMode::Rotating { target_deg } => {
                let remaining = target_deg - self.tacho_deg;
                let step = self.speed_dps.abs() * dt_s;
                if step >= remaining.abs() {
                    self.tacho_deg = target_deg;
                    self.mode = MotorMode::Idle;
                } else {
                    self.tacho_deg += step * remaining.signum();
                }
            }
        }
    }

    fn rotating(&self) -> bool {
        matches!(self.mode, MotorMode::Rotating { .. })
    }
}

/// Differential-drive body: pose plus the three motor ports.
#[derive(Clone, Debug)]
pub struct RobotBody {
    pub x: f64,
    pub y: f64,
    /// Radians, (-π, π], 0 along +x.
    pub heading: f64,
    pub wheel_diameter_mm: f64,
    pub track_width_mm: f64,
    pub footprint_radius_mm: f64,
    pub motors: [MotorState; 3],
}

/// Physics substep cap: longer intervals are subdivided so the midpoint
/// pose integration stays accurate through turns.
const MAX_SUBSTEP_MS: u64 = 50;

impl RobotBody {
    pub fn new(placement: &RobotPlacement, configured: [bool; 3]) -> RobotBody {
        RobotBody {
            x: placement.x,
            y: placement.y,
            heading: placement.heading_rad,
            wheel_diameter_mm: placement.wheel_diameter_mm,
            track_width_mm: placement.track_width_mm,
            footprint_radius_mm: placement.footprint_radius_mm,
            motors: [
                MotorState::new(configured[0]),
                MotorState::new(configured[1]),
                MotorState::new(configured[2]),
            ],
        }
    }

    /// Wheel arc length for a rotation in degrees.
    fn arc_mm(&self, degrees: f64) -> f64 {
        degrees / 360.0 * std::f64::consts::PI * self.wheel_diameter_mm
    }

    /// Advance motors and pose by `dt_ms`, subdividing long intervals.
    pub fn step(&mut self, dt_ms: u64) {
        if dt_ms == 0 {
            return;
        }
        let substeps = dt_ms.div_ceil(MAX_SUBSTEP_MS);
        let sub_s = dt_ms as f64 / 1000.0 / substeps as f64;
        for _ in 0..substeps {
            let before = [self.motors[0].tacho_deg, self.motors[1].tacho_deg];
            for m in &mut self.motors {
                m.step(sub_s);
            }
            let arc_left = self.arc_mm(self.motors[0].tacho_deg - before[0]);
            let arc_right = self.arc_mm(self.motors[1].tacho_deg - before[1]);
            let forward = (arc_left + arc_right) / 2.0;
            let dtheta = (arc_right - arc_left) / self.track_width_mm;
            let mid = self.heading + dtheta / 2.0;
            self.x += forward * mid.cos();
            self.y += forward * mid.sin();
            self.heading = normalize_angle(self.heading + dtheta);
        }
    }

    /// World position of a point `forward_mm` ahead and `lateral_mm` to
    /// the left of the center.
    pub fn offset_point(&self, forward_mm: f64, lateral_mm: f64) -> (f64, f64) {
        let (sin, cos) = self.heading.sin_cos();
        (
            self.x + forward_mm * cos - lateral_mm * sin,
            self.y + forward_mm * sin + lateral_mm * cos,
        )
    }
}

/// Normalize to (-π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(std::f64::consts::TAU);
    if r > std::f64::consts::PI {
        r -= std::f64::consts::TAU;
    }
    r
}

/// Keeps the last `cap` integer samples and reports their median — the
/// lower middle when the count is even, over however many samples have
/// arrived while the window is still filling.
#[derive(Clone, Debug)]
pub struct MedianWindow {
    cap: usize,
    values: VecDeque<i64>,
}

impl MedianWindow {
    pub fn new(cap: usize) -> MedianWindow {
        MedianWindow { cap: cap.max(1), values: VecDeque::new() }
    }

    pub fn push(&mut self, v: i64) -> i64 {
        if self.values.len() == self.cap {
            self.values.pop_front();
        }
        self.values.push_back(v);
        self.median()
    }

    pub fn median(&self) -> i64 {
        let mut sorted: Vec<i64> = self.values.iter().copied().collect();
        sorted.sort_unstable();
        sorted[(sorted.len() - 1) / 2]
    }
}

/// One sensor bolted to the robot: geometry, kind, filter and its own
/// noise stream.
pub struct SensorMount {
    pub port: u8,
    pub kind: SensorKind,
    pub spec: MountSpec,
    window: MedianWindow,
    rng: ChaCha8Rng,
}

impl SensorMount {
    pub fn new(port: u8, kind: SensorKind, spec: MountSpec, rng: ChaCha8Rng) -> SensorMount {
        SensorMount { port, kind, spec, window: MedianWindow::new(spec.window), rng }
    }

    pub fn channel(&self) -> Option<SensorChannel> {
        match self.kind {
            SensorKind::Light => Some(SensorChannel::Light),
            SensorKind::Ultrasonic => Some(SensorChannel::Obstacle),
            SensorKind::Touch => Some(SensorChannel::Touching),
            SensorKind::Sound => Some(SensorChannel::Sound),
            SensorKind::None => None,
        }
    }

    /// Take one reading at the current pose and pass it through the
    /// median filter. Returns the filtered value to report.
    pub fn sample(&mut self, world: &World, body: &RobotBody) -> Option<i64> {
        let (px, py) = body.offset_point(self.spec.forward_mm, self.spec.lateral_mm);
        let raw = match self.kind {
            SensorKind::None => return None,
            SensorKind::Light => {
                let mut v = world.intensity_at(px, py)
                    + gaussian(&mut self.rng, world.noise.light_sigma);
                if world.noise.light_spike_prob > 0.0
                    && self.rng.gen_bool(world.noise.light_spike_prob.clamp(0.0, 1.0))
                {
                    let sign = if self.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    v += sign * world.noise.light_spike_mag;
                }
                (v.round() as i64).clamp(0, 1023)
            }
            SensorKind::Sound => {
                let v = world.ambient_sound + gaussian(&mut self.rng, world.noise.sound_sigma);
                (v.round() as i64).clamp(0, 1023)
            }
            SensorKind::Touch => {
                i64::from(world.touching_at(px, py))
            }
            SensorKind::Ultrasonic => {
                let (sin, cos) = body.heading.sin_cos();
                match world.raycast_mm(px, py, cos, sin) {
                    None => 255,
                    Some(mm) => {
                        let quantized = (mm / 10.0 / 3.0).round() as i64 * 3;
                        let jitter = if world.noise.obstacle_jitter {
                            3 * self.rng.gen_range(-1..=1)
                        } else {
                            0
                        };
                        (quantized + jitter).clamp(0, 255)
                    }
                }
            }
        };
        Some(self.window.push(raw))
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("sigma is positive and finite").sample(rng)
}

/// The brick firmware: drains the wire, runs motor commands (with the
/// optional block-until-rotated mode), integrates physics, and streams
/// sensor batches every `sleep_ms`.
pub struct NxtBrick {
    pub btname: String,
    pub body: RobotBody,
    pub mounts: Vec<SensorMount>,
    link: Box<dyn RobotLink>,
    sleep_ms: u64,
    next_sample_at: u64,
    commands: VecDeque<WireRecord>,
    /// While set, commands stay queued: (ack id, motors that must reach
    /// their rotation targets).
    pending_rotation: Option<(u64, Vec<Motor>)>,
    blocking_rotate: bool,
    halted: bool,
}

impl NxtBrick {
    pub fn new(
        btname: impl Into<String>,
        body: RobotBody,
        mounts: Vec<SensorMount>,
        link: Box<dyn RobotLink>,
        sleep_ms: u64,
    ) -> NxtBrick {
        let sleep_ms = sleep_ms.max(1);
        NxtBrick {
            btname: btname.into(),
            body,
            mounts,
            link,
            sleep_ms,
            next_sample_at: sleep_ms,
            commands: VecDeque::new(),
            pending_rotation: None,
            blocking_rotate: false,
            halted: false,
        }
    }

    pub fn halted(&self) -> bool {
        self.halted
    }

    /// Advance the brick through the interval ending at `now` (of length
    /// `dt_ms`).
    pub fn tick(&mut self, world: &World, now: u64, dt_ms: u64) {
        if self.halted {
            return;
        }
        for rec in self.link.recv(now) {
            match rec {
                WireRecord::Action { .. } | WireRecord::Exit => self.commands.push_back(rec),
                other => {
                    log::warn!("{}: unexpected record on robot side: {other:?}", self.btname)
                }
            }
        }
        self.process_commands(now);
        if self.halted {
            return;
        }
        self.body.step(dt_ms);
        // A blocking rotation that just reached its targets acknowledges
        // now, and whatever queued up behind it can run.
        if let Some((id, motors)) = &self.pending_rotation {
            if motors.iter().all(|m| !self.body.motors[m.index()].rotating()) {
                let id = *id;
                self.pending_rotation = None;
                self.link.send_ack(id, true, now);
                self.process_commands(now);
            }
        }
        if self.halted {
            return;
        }
        while self.next_sample_at <= now {
            let at = self.next_sample_at;
            self.sample_all(world, at);
            self.next_sample_at += self.sleep_ms;
        }
    }

    fn sample_all(&mut self, world: &World, at: u64) {
        for mount in &mut self.mounts {
            let Some(channel) = mount.channel() else { continue };
            if let Some(value) = mount.sample(world, &self.body) {
                self.link.send_percept(channel, mount.port, value, at);
            }
        }
    }

    fn process_commands(&mut self, now: u64) {
        while self.pending_rotation.is_none() {
            let Some(cmd) = self.commands.pop_front() else { return };
            match cmd {
                WireRecord::Exit => {
                    self.halted = true;
                    for m in &mut self.body.motors {
                        m.mode = MotorMode::Idle;
                    }
                    self.commands.clear();
                    self.link.close();
                    return;
                }
                WireRecord::Action { id, verb, motors, args } => {
                    self.run_action(id, verb, &motors, &args, now)
                }
                _ => unreachable!("only actions are queued"),
            }
        }
    }

    fn run_action(&mut self, id: u64, verb: Verb, motors: &[Motor], args: &[i64], now: u64) {
        if motors.iter().any(|m| !self.body.motors[m.index()].configured) {
            self.link.send_ack(id, false, now);
            return;
        }
        match verb {
            Verb::Fwd | Verb::Bwd => {
                if args.len() != motors.len() {
                    self.link.send_ack(id, false, now);
                    return;
                }
                for (m, speed) in motors.iter().zip(args) {
                    let motor = &mut self.body.motors[m.index()];
                    motor.speed_dps = *speed as f64;
                    motor.mode =
                        if verb == Verb::Fwd { MotorMode::Forward } else { MotorMode::Backward };
                }
                self.link.send_ack(id, true, now);
            }
            Verb::Rot => {
                if args.len() != motors.len() {
                    self.link.send_ack(id, false, now);
                    return;
                }
                // A rotation can never finish on a motor with no speed.
                if motors.iter().any(|m| self.body.motors[m.index()].speed_dps == 0.0) {
                    self.link.send_ack(id, false, now);
                    return;
                }
                for (m, degrees) in motors.iter().zip(args) {
                    let motor = &mut self.body.motors[m.index()];
                    motor.mode =
                        MotorMode::Rotating { target_deg: motor.tacho_deg + *degrees as f64 };
                }
                if self.blocking_rotate {
                    self.pending_rotation = Some((id, motors.to_vec()));
                } else {
                    self.link.send_ack(id, true, now);
                }
            }
            Verb::Spd => {
                if args.len() != motors.len() {
                    self.link.send_ack(id, false, now);
                    return;
                }
                for (m, speed) in motors.iter().zip(args) {
                    self.body.motors[m.index()].speed_dps = *speed as f64;
                }
                self.link.send_ack(id, true, now);
            }
            Verb::Rev => {
                for m in motors {
                    let motor = &mut self.body.motors[m.index()];
                    motor.mode = match motor.mode {
                        MotorMode::Forward => MotorMode::Backward,
                        MotorMode::Backward => MotorMode::Forward,
                        other => other,
                    };
                }
                self.link.send_ack(id, true, now);
            }
            Verb::Stp => {
                for m in motors {
                    self.body.motors[m.index()].mode = MotorMode::Idle;
                }
                self.link.send_ack(id, true, now);
            }
            Verb::Blk => {
                self.blocking_rotate = args.first().copied().unwrap_or(0) != 0;
                self.link.send_ack(id, true, now);
            }
        }
    }
}

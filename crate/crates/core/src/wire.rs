//! The line-oriented wire format spoken between an agent mind and its
//! robot brick.
//!
//! One record per line, fields separated by `|`:
//!
//! ```text
//! A|7|FWD|a,b|60,60      action 7: forward, motors a+b, speeds 60,60
//! P|LIGHT|1|360          percept: light sensor on port 1 read 360
//! K|7                    acknowledgement of action 7
//! K|7|ERR                negative acknowledgement (rejected action)
//! X                      exit: shut the robot down and close the link
//! ```
//!
//! Action ids are assigned monotonically by the sending side and echoed in
//! acknowledgements, which is what lets synchronous mode pair each action
//! with its completion.

use std::fmt;

use thiserror::Error;

use crate::term::{eval_arith, Subst, Term, TermKind};

/// Motor command verbs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    /// Run forward at given speeds (degrees/second).
    Fwd,
    /// Run backward at given speeds.
    Bwd,
    /// Rotate by relative angles (degrees), blocking if block mode is on.
    Rot,
    /// Reverse current direction of the listed motors.
    Rev,
    /// Set speeds without changing direction or mode.
    Spd,
    /// Stop the listed motors.
    Stp,
    /// Toggle blocking-rotation mode (arg 1 = on, 0 = off).
    Blk,
}

impl Verb {
    pub fn as_str(self) -> &'static str {
        match self {
            Verb::Fwd => "FWD",
            Verb::Bwd => "BWD",
            Verb::Rot => "ROT",
            Verb::Rev => "REV",
            Verb::Spd => "SPD",
            Verb::Stp => "STP",
            Verb::Blk => "BLK",
        }
    }

    fn from_str(s: &str) -> Option<Verb> {
        Some(match s {
            "FWD" => Verb::Fwd,
            "BWD" => Verb::Bwd,
            "ROT" => Verb::Rot,
            "REV" => Verb::Rev,
            "SPD" => Verb::Spd,
            "STP" => Verb::Stp,
            "BLK" => Verb::Blk,
            _ => return None,
        })
    }
}

impl fmt::Display for Verb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The three motor ports of a brick.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Motor {
    A,
    B,
    C,
}

impl Motor {
    pub fn as_str(self) -> &'static str {
        match self {
            Motor::A => "a",
            Motor::B => "b",
            Motor::C => "c",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Motor::A => 0,
            Motor::B => 1,
            Motor::C => 2,
        }
    }

    fn from_str(s: &str) -> Option<Motor> {
        Some(match s {
            "a" => Motor::A,
            "b" => Motor::B,
            "c" => Motor::C,
            _ => return None,
        })
    }
}

impl fmt::Display for Motor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sensor channels as named on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SensorChannel {
    Light,
    Obstacle,
    Touching,
    Sound,
}

impl SensorChannel {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorChannel::Light => "LIGHT",
            SensorChannel::Obstacle => "OBSTACLE",
            SensorChannel::Touching => "TOUCHING",
            SensorChannel::Sound => "SOUND",
        }
    }

    /// The functor of the belief this channel's percepts become.
    pub fn functor(self) -> &'static str {
        match self {
            SensorChannel::Light => "light",
            SensorChannel::Obstacle => "obstacle",
            SensorChannel::Touching => "touching",
            SensorChannel::Sound => "sound",
        }
    }

    fn from_str(s: &str) -> Option<SensorChannel> {
        Some(match s {
            "LIGHT" => SensorChannel::Light,
            "OBSTACLE" => SensorChannel::Obstacle,
            "TOUCHING" => SensorChannel::Touching,
            "SOUND" => SensorChannel::Sound,
            _ => return None,
        })
    }
}

impl fmt::Display for SensorChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One wire line, parsed.
#[derive(Clone, Debug, PartialEq)]
pub enum WireRecord {
    Action { id: u64, verb: Verb, motors: Vec<Motor>, args: Vec<i64> },
    Percept { kind: SensorChannel, port: u8, value: i64 },
    Ack { id: u64, ok: bool },
    Exit,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WireError {
    #[error("malformed wire record '{line}': {reason}")]
    MalformedRecord { line: String, reason: String },
    #[error("unknown action '{0}'")]
    UnknownAction(String),
    #[error("malformed action '{action}': {reason}")]
    MalformedAction { action: String, reason: String },
    #[error("invalid percept '{record}': {reason}")]
    InvalidPercept { record: String, reason: String },
}

impl WireRecord {
    /// Serializes to one line (no trailing newline).
    pub fn to_line(&self) -> String {
        match self {
            WireRecord::Action { id, verb, motors, args } => {
                let ms: Vec<&str> = motors.iter().map(|m| m.as_str()).collect();
                let xs: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                format!("A|{id}|{verb}|{}|{}", ms.join(","), xs.join(","))
            }
            WireRecord::Percept { kind, port, value } => format!("P|{kind}|{port}|{value}"),
            WireRecord::Ack { id, ok: true } => format!("K|{id}"),
            WireRecord::Ack { id, ok: false } => format!("K|{id}|ERR"),
            WireRecord::Exit => "X".to_string(),
        }
    }

    /// Parses one line. Strict: field counts, verbs, channels and integers
    /// must all be exact.
    pub fn parse_line(line: &str) -> Result<WireRecord, WireError> {
        let bad = |reason: &str| WireError::MalformedRecord {
            line: line.to_string(),
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split('|').collect();
        match fields[0] {
            "A" => {
                if fields.len() != 5 {
                    return Err(bad("an action record has exactly 5 fields"));
                }
                let id: u64 = fields[1].parse().map_err(|_| bad("bad action id"))?;
                let verb = Verb::from_str(fields[2]).ok_or_else(|| bad("unknown verb"))?;
                let motors = if fields[3].is_empty() {
                    Vec::new()
                } else {
                    fields[3]
                        .split(',')
                        .map(|m| Motor::from_str(m).ok_or_else(|| bad("bad motor name")))
                        .collect::<Result<Vec<_>, _>>()?
                };
                let args = if fields[4].is_empty() {
                    Vec::new()
                } else {
                    fields[4]
                        .split(',')
                        .map(|a| a.parse::<i64>().map_err(|_| bad("bad numeric argument")))
                        .collect::<Result<Vec<_>, _>>()?
                };
                Ok(WireRecord::Action { id, verb, motors, args })
            }
            "P" => {
                if fields.len() != 4 {
                    return Err(bad("a percept record has exactly 4 fields"));
                }
                let kind =
                    SensorChannel::from_str(fields[1]).ok_or_else(|| bad("unknown channel"))?;
                let port: u8 = fields[2].parse().map_err(|_| bad("bad port"))?;
                let value: i64 = fields[3].parse().map_err(|_| bad("bad value"))?;
                Ok(WireRecord::Percept { kind, port, value })
            }
            "K" => {
                if fields.len() != 2 && fields.len() != 3 {
                    return Err(bad("an ack record has 2 or 3 fields"));
                }
                let id: u64 = fields[1].parse().map_err(|_| bad("bad action id"))?;
                let ok = match fields.get(2) {
                    None => true,
                    Some(&"ERR") => false,
                    Some(_) => return Err(bad("third ack field must be ERR")),
                };
                Ok(WireRecord::Ack { id, ok })
            }
            "X" => {
                if fields.len() != 1 {
                    return Err(bad("an exit record has no fields"));
                }
                Ok(WireRecord::Exit)
            }
            _ => Err(bad("unknown record tag")),
        }
    }
}

/// An action term translated for the wire, minus the id (the transport
/// assigns ids at send time).
#[derive(Clone, Debug, PartialEq)]
pub enum EncodedAction {
    Exit,
    Motor(ActionPayload),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionPayload {
    pub verb: Verb,
    pub motors: Vec<Motor>,
    pub args: Vec<i64>,
}

fn motor_list(t: &Term, action: &Term) -> Result<Vec<Motor>, WireError> {
    let bad = |reason: String| WireError::MalformedAction {
        action: action.to_string(),
        reason,
    };
    let TermKind::List(items) = &t.kind else {
        return Err(bad(format!("expected a motor list, found '{t}'")));
    };
    if items.is_empty() {
        return Err(bad("motor list is empty".into()));
    }
    items
        .iter()
        .map(|m| match &m.kind {
            TermKind::Atom(name) => Motor::from_str(name)
                .ok_or_else(|| bad(format!("'{name}' is not a motor (use a, b or c)"))),
            other => Err(bad(format!("'{}' is not a motor (use a, b or c)", Term {
                kind: other.clone(),
                annots: Vec::new()
            }))),
        })
        .collect()
}

fn number_list(t: &Term, action: &Term) -> Result<Vec<i64>, WireError> {
    let bad = |reason: String| WireError::MalformedAction {
        action: action.to_string(),
        reason,
    };
    let TermKind::List(items) = &t.kind else {
        return Err(bad(format!("expected a number list, found '{t}'")));
    };
    items
        .iter()
        .map(|n| {
            let v = eval_arith(n, &Subst::new())
                .map_err(|e| bad(format!("'{n}' is not a number: {e}")))?;
            if v.is_finite() {
                // Truncation toward zero mirrors integer casts on the brick.
                Ok(v as i64)
            } else {
                Err(bad(format!("'{n}' is not finite")))
            }
        })
        .collect()
}

/// Translates an action term (fully substituted) into its wire payload.
pub fn encode_action(action: &Term) -> Result<EncodedAction, WireError> {
    let bad = |reason: &str| WireError::MalformedAction {
        action: action.to_string(),
        reason: reason.to_string(),
    };
    let Some((functor, arity)) = action.functor_arity() else {
        return Err(bad("an action must be an atom or a structure"));
    };
    let args = action.args();
    let payload = |verb: Verb, motors: Vec<Motor>, xs: Vec<i64>| {
        Ok(EncodedAction::Motor(ActionPayload { verb, motors, args: xs }))
    };
    match (functor, arity) {
        ("exit", 0) => Ok(EncodedAction::Exit),
        ("forward", 2) | ("backward", 2) | ("rotate", 2) | ("speed", 2) => {
            let motors = motor_list(&args[0], action)?;
            let xs = number_list(&args[1], action)?;
            if motors.len() != xs.len() {
                return Err(bad("motor list and number list must have the same length"));
            }
            let verb = match functor {
                "forward" => Verb::Fwd,
                "backward" => Verb::Bwd,
                "rotate" => Verb::Rot,
                _ => Verb::Spd,
            };
            payload(verb, motors, xs)
        }
        ("reverse", 1) => payload(Verb::Rev, motor_list(&args[0], action)?, Vec::new()),
        ("stop", 1) => payload(Verb::Stp, motor_list(&args[0], action)?, Vec::new()),
        ("block", 1) => match &args[0].kind {
            TermKind::Atom(b) if b == "true" => payload(Verb::Blk, Vec::new(), vec![1]),
            TermKind::Atom(b) if b == "false" => payload(Verb::Blk, Vec::new(), vec![0]),
            other => Err(bad(&format!(
                "block takes true or false, found '{}'",
                Term { kind: other.clone(), annots: Vec::new() }
            ))),
        },
        ("exit", _) | ("forward", _) | ("backward", _) | ("rotate", _) | ("speed", _)
        | ("reverse", _) | ("stop", _) | ("block", _) => {
            Err(bad("wrong number of arguments"))
        }
        _ => Err(WireError::UnknownAction(action.to_string())),
    }
}

/// Turns a percept record into the belief term the agent will hold,
/// annotated with `source(percept)`. Validates ranges: ports are 1–4,
/// light/sound read 0–1023, obstacle reads 0–255 and touching is 0/1
/// (becoming the atoms `false`/`true`).
pub fn decode_percept(record: &WireRecord) -> Result<Term, WireError> {
    let WireRecord::Percept { kind, port, value } = record else {
        return Err(WireError::InvalidPercept {
            record: record.to_line(),
            reason: "not a percept record".into(),
        });
    };
    let bad = |reason: String| WireError::InvalidPercept {
        record: record.to_line(),
        reason,
    };
    if !(1..=4).contains(port) {
        return Err(bad(format!("port {port} out of range 1–4")));
    }
    let value_term = match kind {
        SensorChannel::Light | SensorChannel::Sound => {
            if !(0..=1023).contains(value) {
                return Err(bad(format!("value {value} out of range 0–1023")));
            }
            Term::number(*value as f64)
        }
        SensorChannel::Obstacle => {
            if !(0..=255).contains(value) {
                return Err(bad(format!("value {value} out of range 0–255")));
            }
            Term::number(*value as f64)
        }
        SensorChannel::Touching => match value {
            0 => Term::atom("false"),
            1 => Term::atom("true"),
            _ => return Err(bad(format!("touching value {value} must be 0 or 1"))),
        },
    };
    Ok(Term::structure(kind.functor(), vec![Term::number(*port as f64), value_term])
        .annotated(Term::structure("source", vec![Term::atom("percept")])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_term;
    use proptest::prelude::*;

    fn encode(src: &str) -> Result<EncodedAction, WireError> {
        encode_action(&parse_term(src).unwrap())
    }

    #[test]
    fn encode_motion_commands() {
        assert_eq!(
            encode("forward([a,b],[300,300])").unwrap(),
            EncodedAction::Motor(ActionPayload {
                verb: Verb::Fwd,
                motors: vec![Motor::A, Motor::B],
                args: vec![300, 300],
            })
        );
        assert_eq!(
            encode("rotate([a,b],[100,-100])").unwrap(),
            EncodedAction::Motor(ActionPayload {
                verb: Verb::Rot,
                motors: vec![Motor::A, Motor::B],
                args: vec![100, -100],
            })
        );
        assert_eq!(
            encode("stop([a,b])").unwrap(),
            EncodedAction::Motor(ActionPayload {
                verb: Verb::Stp,
                motors: vec![Motor::A, Motor::B],
                args: vec![],
            })
        );
        assert_eq!(
            encode("reverse([c])").unwrap(),
            EncodedAction::Motor(ActionPayload {
                verb: Verb::Rev,
                motors: vec![Motor::C],
                args: vec![],
            })
        );
        assert_eq!(
            encode("block(true)").unwrap(),
            EncodedAction::Motor(ActionPayload {
                verb: Verb::Blk,
                motors: vec![],
                args: vec![1],
            })
        );
        assert_eq!(encode("exit").unwrap(), EncodedAction::Exit);
    }

    #[test]
    fn encode_rejects_unknown_and_malformed() {
        assert!(matches!(encode("fly([a])"), Err(WireError::UnknownAction(_))));
        assert!(matches!(
            encode("forward([a],[60,60])"),
            Err(WireError::MalformedAction { .. })
        ));
        assert!(matches!(
            encode("forward([a,d],[60,60])"),
            Err(WireError::MalformedAction { .. })
        ));
        assert!(matches!(encode("block(maybe)"), Err(WireError::MalformedAction { .. })));
        assert!(matches!(encode("forward([a,b])"), Err(WireError::MalformedAction { .. })));
        assert!(matches!(encode("stop([])"), Err(WireError::MalformedAction { .. })));
    }

    #[test]
    fn encode_truncates_fractional_speeds_toward_zero() {
        let EncodedAction::Motor(p) = encode("forward([a,b],[60.9,-60.9])").unwrap() else {
            panic!()
        };
        assert_eq!(p.args, vec![60, -60]);
    }

    #[test]
    fn record_lines() {
        let action = WireRecord::Action {
            id: 7,
            verb: Verb::Fwd,
            motors: vec![Motor::A, Motor::B],
            args: vec![60, 60],
        };
        assert_eq!(action.to_line(), "A|7|FWD|a,b|60,60");
        assert_eq!(
            WireRecord::Percept { kind: SensorChannel::Light, port: 1, value: 360 }.to_line(),
            "P|LIGHT|1|360"
        );
        assert_eq!(WireRecord::Ack { id: 7, ok: true }.to_line(), "K|7");
        assert_eq!(WireRecord::Ack { id: 7, ok: false }.to_line(), "K|7|ERR");
        assert_eq!(WireRecord::Exit.to_line(), "X");
        // Empty motor/arg fields survive (a BLK action has no motors).
        let blk = WireRecord::Action { id: 1, verb: Verb::Blk, motors: vec![], args: vec![1] };
        assert_eq!(blk.to_line(), "A|1|BLK||1");
        assert_eq!(WireRecord::parse_line("A|1|BLK||1").unwrap(), blk);
    }

    #[test]
    fn parse_rejects_malformed_lines() {
        for line in [
            "", "Z", "A|x|FWD|a|60", "A|1|FLY|a|60", "A|1|FWD|a", "A|1|FWD|d|60",
            "A|1|FWD|a|sixty", "P|LIGHT|1", "P|LASER|1|3", "P|LIGHT|one|3", "K|x", "K|1|NO",
            "X|1", "A|1|FWD|a|60|extra",
        ] {
            assert!(
                WireRecord::parse_line(line).is_err(),
                "'{line}' should not parse"
            );
        }
    }

    #[test]
    fn decode_percepts() {
        let t = decode_percept(&WireRecord::parse_line("P|LIGHT|1|360").unwrap()).unwrap();
        assert_eq!(t.to_string(), "light(1,360)[source(percept)]");
        let t = decode_percept(&WireRecord::parse_line("P|TOUCHING|1|1").unwrap()).unwrap();
        assert_eq!(t.to_string(), "touching(1,true)[source(percept)]");
        let t = decode_percept(&WireRecord::parse_line("P|OBSTACLE|2|255").unwrap()).unwrap();
        assert_eq!(t.to_string(), "obstacle(2,255)[source(percept)]");
        let t = decode_percept(&WireRecord::parse_line("P|SOUND|3|55").unwrap()).unwrap();
        assert_eq!(t.to_string(), "sound(3,55)[source(percept)]");
    }

    #[test]
    fn decode_validates_ranges() {
        for line in [
            "P|LIGHT|5|360",
            "P|LIGHT|0|360",
            "P|LIGHT|1|1024",
            "P|LIGHT|1|-1",
            "P|OBSTACLE|1|256",
            "P|TOUCHING|1|2",
            "P|SOUND|1|9999",
        ] {
            let rec = WireRecord::parse_line(line).unwrap();
            assert!(decode_percept(&rec).is_err(), "'{line}' should not decode");
        }
    }

    fn arb_record() -> impl Strategy<Value = WireRecord> {
        let verb = prop_oneof![
            Just(Verb::Fwd),
            Just(Verb::Bwd),
            Just(Verb::Rot),
            Just(Verb::Rev),
            Just(Verb::Spd),
            Just(Verb::Stp),
            Just(Verb::Blk),
        ];
        let motor = prop_oneof![Just(Motor::A), Just(Motor::B), Just(Motor::C)];
        let channel = prop_oneof![
            Just(SensorChannel::Light),
            Just(SensorChannel::Obstacle),
            Just(SensorChannel::Touching),
            Just(SensorChannel::Sound),
        ];
        prop_oneof![
            (
                any::<u64>(),
                verb,
                proptest::collection::vec(motor, 0..4),
                proptest::collection::vec(any::<i64>(), 0..4),
            )
                .prop_map(|(id, verb, motors, args)| WireRecord::Action {
                    id,
                    verb,
                    motors,
                    args
                }),
            (channel, any::<u8>(), any::<i64>())
                .prop_map(|(kind, port, value)| WireRecord::Percept { kind, port, value }),
            (any::<u64>(), any::<bool>()).prop_map(|(id, ok)| WireRecord::Ack { id, ok }),
            Just(WireRecord::Exit),
        ]
    }

    proptest! {
        #[test]
        fn line_round_trip(rec in arb_record()) {
            let line = rec.to_line();
            prop_assert_eq!(WireRecord::parse_line(&line).unwrap(), rec);
        }

        #[test]
        fn distinct_records_have_distinct_lines(a in arb_record(), b in arb_record()) {
            prop_assert_eq!(a.to_line() == b.to_line(), a == b);
        }
    }
}

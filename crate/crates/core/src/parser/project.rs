//! Parser for robot-project files.
//!
//! A project file lists one agent block per robot:
//!
//! ```text
//! follower follower.asl
//!     [btname="NXT", btaddress="00:16:53:01:02:03",
//!      motora="true", motorb="true", motorc="false",
//!      sensor1="light", sensor2="light", sensor3="none", sensor4="none"]
//!     agentArchClass arch.LEGOAgArchitecture
//!     beliefBaseClass agent.UniqueBelsBB("light(port,_)");
//! ```
//!
//! The architecture / belief-base class names are kept as opaque
//! identifiers; the quoted pattern list after the belief-base class is the
//! part that matters, each entry becoming a [`UniquenessPattern`].

use std::fmt;
use std::path::Path;

use crate::beliefs::UniquenessPattern;

use super::asl::parse_term;
use super::ParseError;

/// What kind of sensor occupies one of the four ports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SensorKind {
    Touch,
    Light,
    Sound,
    Ultrasonic,
    None,
}

impl SensorKind {
    fn from_value(s: &str) -> Option<SensorKind> {
        Some(match s {
            "touch" => SensorKind::Touch,
            "light" => SensorKind::Light,
            "sound" => SensorKind::Sound,
            "ultrasonic" => SensorKind::Ultrasonic,
            "none" => SensorKind::None,
            _ => return None,
        })
    }

    /// The percept functor this sensor kind produces, if any.
    pub fn percept_functor(self) -> Option<&'static str> {
        match self {
            SensorKind::Touch => Some("touching"),
            SensorKind::Light => Some("light"),
            SensorKind::Sound => Some("sound"),
            SensorKind::Ultrasonic => Some("obstacle"),
            SensorKind::None => None,
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensorKind::Touch => "touch",
            SensorKind::Light => "light",
            SensorKind::Sound => "sound",
            SensorKind::Ultrasonic => "ultrasonic",
            SensorKind::None => "none",
        })
    }
}

/// One agent block from a project file.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub name: String,
    /// Source path of the agent program, as written (resolved relative to
    /// the project file by the harness).
    pub source: String,
    pub btname: String,
    pub btaddress: String,
    /// Which of motors A, B, C are connected.
    pub motors: [bool; 3],
    /// What is plugged into ports 1–4.
    pub sensors: [SensorKind; 4],
    /// Milliseconds between sensor sampling batches.
    pub sleep_ms: u64,
    pub arch_class: String,
    pub belief_base_class: String,
    pub patterns: Vec<UniquenessPattern>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProjectConfig {
    pub agents: Vec<AgentConfig>,
}

/// Failure to load a project file from disk.
#[derive(Debug, thiserror::Error)]
pub enum ProjectError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Syntax(#[from] ParseError),
}

// --- tokens --------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum PTok {
    /// Any run of characters that is not whitespace or punctuation; covers
    /// agent names, file paths and dotted class names.
    Word(String),
    Str(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Semi,
    Eq,
    Eof,
}

impl fmt::Display for PTok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PTok::Word(w) => write!(f, "'{w}'"),
            PTok::Str(_) => write!(f, "quoted string"),
            PTok::LBracket => write!(f, "'['"),
            PTok::RBracket => write!(f, "']'"),
            PTok::LParen => write!(f, "'('"),
            PTok::RParen => write!(f, "')'"),
            PTok::Comma => write!(f, "','"),
            PTok::Semi => write!(f, "';'"),
            PTok::Eq => write!(f, "'='"),
            PTok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct PToken {
    tok: PTok,
    line: usize,
    col: usize,
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '[' | ']' | '(' | ')' | ',' | ';' | '"' | '=')
}

fn plex(src: &str) -> Result<Vec<PToken>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let (mut pos, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut out = Vec::new();

    let bump = |pos: &mut usize, line: &mut usize, col: &mut usize, chars: &[char]| {
        if let Some(&c) = chars.get(*pos) {
            *pos += 1;
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
    };

    loop {
        // Whitespace and // comments.
        loop {
            match chars.get(pos) {
                Some(c) if c.is_whitespace() => bump(&mut pos, &mut line, &mut col, &chars),
                Some('/') if chars.get(pos + 1) == Some(&'/') => {
                    while chars.get(pos).is_some_and(|&c| c != '\n') {
                        bump(&mut pos, &mut line, &mut col, &chars);
                    }
                }
                _ => break,
            }
        }
        let (tline, tcol) = (line, col);
        let Some(&c) = chars.get(pos) else {
            out.push(PToken { tok: PTok::Eof, line: tline, col: tcol });
            return Ok(out);
        };
        let tok = match c {
            '[' => {
                bump(&mut pos, &mut line, &mut col, &chars);
                PTok::LBracket
            }
            ']' => {
                bump(&mut pos, &mut line, &mut col, &chars);
                PTok::RBracket
            }
            '(' => {
                bump(&mut pos, &mut line, &mut col, &chars);
                PTok::LParen
            }
            ')' => {
                bump(&mut pos, &mut line, &mut col, &chars);
                PTok::RParen
            }
            ',' => {
                bump(&mut pos, &mut line, &mut col, &chars);
                PTok::Comma
            }
            ';' => {
                bump(&mut pos, &mut line, &mut col, &chars);
                PTok::Semi
            }
            '=' => {
                bump(&mut pos, &mut line, &mut col, &chars);
                PTok::Eq
            }
            '"' => {
                bump(&mut pos, &mut line, &mut col, &chars);
                let mut s = String::new();
                loop {
                    match chars.get(pos) {
                        None => {
                            return Err(ParseError {
                                line: tline,
                                col: tcol,
                                message: "unterminated string literal".into(),
                            })
                        }
                        Some('"') => {
                            bump(&mut pos, &mut line, &mut col, &chars);
                            break;
                        }
                        Some(&other) => {
                            s.push(other);
                            bump(&mut pos, &mut line, &mut col, &chars);
                        }
                    }
                }
                PTok::Str(s)
            }
            w if is_word_char(w) => {
                let mut s = String::new();
                while chars.get(pos).copied().is_some_and(is_word_char) {
                    s.push(chars[pos]);
                    bump(&mut pos, &mut line, &mut col, &chars);
                }
                PTok::Word(s)
            }
            other => {
                return Err(ParseError {
                    line: tline,
                    col: tcol,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        out.push(PToken { tok, line: tline, col: tcol });
    }
}

// --- parser ---------------------------------------------------------------

struct PParser {
    toks: Vec<PToken>,
    pos: usize,
}

impl PParser {
    fn peek(&self) -> &PToken {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> PToken {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &PTok) -> bool {
        if &self.peek().tok == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: PTok) -> Result<(), ParseError> {
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

    fn expect_word(&mut self, what: &str) -> Result<(String, usize, usize), ParseError> {
        let t = self.peek().clone();
        if let PTok::Word(w) = t.tok {
            self.bump();
            Ok((w, t.line, t.col))
        } else {
            Err(self.err_here(format!("expected {what}, found {}", t.tok)))
        }
    }

    fn expect_str(&mut self, what: &str) -> Result<(String, usize, usize), ParseError> {
        let t = self.peek().clone();
        if let PTok::Str(s) = t.tok {
            self.bump();
            Ok((s, t.line, t.col))
        } else {
            Err(self.err_here(format!("expected {what}, found {}", t.tok)))
        }
    }

    fn parse_agent(&mut self) -> Result<AgentConfig, ParseError> {
        let (name, nline, ncol) = self.expect_word("an agent name")?;
        if !is_identifier(&name) {
            return Err(ParseError {
                line: nline,
                col: ncol,
                message: format!(
                    "agent name '{name}' must be a lowercase identifier (letters, digits, '_')"
                ),
            });
        }
        let (source, ..) = self.expect_word(&format!("a source path for agent '{name}'"))?;
        self.expect(PTok::LBracket)?;

        let mut params: Vec<(String, String, usize, usize)> = Vec::new();
        if !self.eat(&PTok::RBracket) {
            loop {
                let (key, kline, kcol) = self.expect_word("a parameter name")?;
                self.expect(PTok::Eq)?;
                let (value, ..) = self.expect_str(&format!(
                    "a quoted value for parameter '{key}' of agent '{name}'"
                ))?;
                params.push((key, value, kline, kcol));
                if self.eat(&PTok::Comma) {
                    continue;
                }
                self.expect(PTok::RBracket)?;
                break;
            }
        }

        let (kw, kline, kcol) = self.expect_word("'agentArchClass'")?;
        if kw != "agentArchClass" {
            return Err(ParseError {
                line: kline,
                col: kcol,
                message: format!("agent '{name}': expected 'agentArchClass', found '{kw}'"),
            });
        }
        let (arch_class, ..) = self.expect_word("an architecture class name")?;
        let (kw, kline, kcol) = self.expect_word("'beliefBaseClass'")?;
        if kw != "beliefBaseClass" {
            return Err(ParseError {
                line: kline,
                col: kcol,
                message: format!("agent '{name}': expected 'beliefBaseClass', found '{kw}'"),
            });
        }
        let (belief_base_class, ..) = self.expect_word("a belief base class name")?;

        let mut patterns = Vec::new();
        if self.eat(&PTok::LParen) {
            loop {
                let (s, sline, scol) = self.expect_str("a uniqueness pattern string")?;
                let bad = |msg: String| ParseError {
                    line: sline,
                    col: scol,
                    message: format!("agent '{name}': invalid uniqueness pattern \"{s}\": {msg}"),
                };
                let term = parse_term(&s).map_err(|e| bad(e.message.clone()))?;
                patterns.push(UniquenessPattern::from_term(&term).map_err(bad)?);
                if self.eat(&PTok::Comma) {
                    continue;
                }
                self.expect(PTok::RParen)?;
                break;
            }
        }
        self.eat(&PTok::Semi);

        build_agent(name, nline, ncol, source, params, arch_class, belief_base_class, patterns)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn valid_btaddress(s: &str) -> bool {
    let parts: Vec<&str> = s.split(':').collect();
    parts.len() == 6
        && parts.iter().all(|p| p.len() == 2 && p.chars().all(|c| c.is_ascii_hexdigit()))
}

const KNOWN_KEYS: [&str; 10] = [
    "btname", "btaddress", "motora", "motorb", "motorc", "sensor1", "sensor2", "sensor3",
    "sensor4", "sleep",
];

#[allow(clippy::too_many_arguments)]
fn build_agent(
    name: String,
    nline: usize,
    ncol: usize,
    source: String,
    params: Vec<(String, String, usize, usize)>,
    arch_class: String,
    belief_base_class: String,
    patterns: Vec<UniquenessPattern>,
) -> Result<AgentConfig, ParseError> {
    for (i, (key, _, kline, kcol)) in params.iter().enumerate() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ParseError {
                line: *kline,
                col: *kcol,
                message: format!("agent '{name}': unknown parameter '{key}'"),
            });
        }
        if params[..i].iter().any(|(k, ..)| k == key) {
            return Err(ParseError {
                line: *kline,
                col: *kcol,
                message: format!("agent '{name}': duplicate parameter '{key}'"),
            });
        }
    }

    let get = |key: &str| params.iter().find(|(k, ..)| k == key);
    let mandatory = |key: &str| {
        get(key).map(|(_, v, l, c)| (v.clone(), *l, *c)).ok_or_else(|| ParseError {
            line: nline,
            col: ncol,
            message: format!("agent '{name}': missing mandatory parameter '{key}'"),
        })
    };

    let (btname, ..) = mandatory("btname")?;
    let (btaddress, aline, acol) = mandatory("btaddress")?;
    if !valid_btaddress(&btaddress) {
        return Err(ParseError {
            line: aline,
            col: acol,
            message: format!(
                "agent '{name}': btaddress \"{btaddress}\" must have the form HH:HH:HH:HH:HH:HH"
            ),
        });
    }

    let mut motors = [false; 3];
    for (i, key) in ["motora", "motorb", "motorc"].iter().enumerate() {
        let (v, l, c) = mandatory(key)?;
        motors[i] = match v.as_str() {
            "true" => true,
            "false" => false,
            other => {
                return Err(ParseError {
                    line: l,
                    col: c,
                    message: format!(
                        "agent '{name}': {key} must be \"true\" or \"false\", found \"{other}\""
                    ),
                })
            }
        };
    }

    let mut sensors = [SensorKind::None; 4];
    for (i, key) in ["sensor1", "sensor2", "sensor3", "sensor4"].iter().enumerate() {
        let (v, l, c) = mandatory(key)?;
        sensors[i] = SensorKind::from_value(&v).ok_or_else(|| ParseError {
            line: l,
            col: c,
            message: format!(
                "agent '{name}': {key} must be one of touch, light, sound, ultrasonic or none, \
                 found \"{v}\""
            ),
        })?;
    }

    let sleep_ms = match get("sleep") {
        None => 50,
        Some((_, v, l, c)) => match v.parse::<u64>() {
            Ok(ms) if ms >= 1 => ms,
            _ => {
                return Err(ParseError {
                    line: *l,
                    col: *c,
                    message: format!(
                        "agent '{name}': sleep must be an integer number of milliseconds \
                         (at least 1), found \"{v}\""
                    ),
                })
            }
        },
    };

    Ok(AgentConfig {
        name,
        source,
        btname,
        btaddress,
        motors,
        sensors,
        sleep_ms,
        arch_class,
        belief_base_class,
        patterns,
    })
}

/// Parses a complete project description.
pub fn parse_project_str(src: &str) -> Result<ProjectConfig, ParseError> {
    let mut p = PParser { toks: plex(src)?, pos: 0 };
    let mut agents: Vec<AgentConfig> = Vec::new();
    while p.peek().tok != PTok::Eof {
        let at = (p.peek().line, p.peek().col);
        let agent = p.parse_agent()?;
        if let Some(prev) = agents.iter().find(|a| a.name == agent.name) {
            return Err(ParseError {
                line: at.0,
                col: at.1,
                message: format!("duplicate agent name '{}'", prev.name),
            });
        }
        if let Some(prev) = agents.iter().find(|a| a.btname == agent.btname) {
            return Err(ParseError {
                line: at.0,
                col: at.1,
                message: format!(
                    "agents '{}' and '{}' share btname \"{}\"",
                    prev.name, agent.name, agent.btname
                ),
            });
        }
        agents.push(agent);
    }
    Ok(ProjectConfig { agents })
}

/// Reads and parses a project file.
pub fn parse_project_file(path: impl AsRef<Path>) -> Result<ProjectConfig, ProjectError> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path)
        .map_err(|e| ProjectError::Io { path: path.display().to_string(), source: e })?;
    Ok(parse_project_str(&src)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        agentname agentsource.asl
            [btname="NXT", btaddress="00:16:53:01:02:03",
            motora="true", motorb="true", motorc="false",
            sensor1="light", sensor2="ultrasonic", sensor3="none",
            sensor4="none"]
            agentArchClass arch.LEGOAgArchitecture
            beliefBaseClass agent.UniqueBelsBB("light(port,_)","sound(port,_)",
                                "obstacle(port,_)","touching(port,_)");
    "#;

    #[test]
    fn sample_block_parses() {
        let p = parse_project_str(SAMPLE).unwrap();
        assert_eq!(p.agents.len(), 1);
        let a = &p.agents[0];
        assert_eq!(a.name, "agentname");
        assert_eq!(a.source, "agentsource.asl");
        assert_eq!(a.btname, "NXT");
        assert_eq!(a.motors, [true, true, false]);
        assert_eq!(
            a.sensors,
            [SensorKind::Light, SensorKind::Ultrasonic, SensorKind::None, SensorKind::None]
        );
        assert_eq!(a.sleep_ms, 50, "sleep defaults to 50 ms when omitted");
        assert_eq!(a.arch_class, "arch.LEGOAgArchitecture");
        assert_eq!(a.belief_base_class, "agent.UniqueBelsBB");
        assert_eq!(a.patterns.len(), 4);
        assert_eq!(a.patterns[0].functor, "light");
        assert_eq!(a.patterns[0].arity, 2);
        assert_eq!(a.patterns[0].key_positions, vec![0]);
    }

    #[test]
    fn empty_project_is_valid() {
        let p = parse_project_str("// nothing here\n").unwrap();
        assert!(p.agents.is_empty());
    }

    #[test]
    fn explicit_sleep_and_no_semicolon() {
        let src = SAMPLE.replace("sensor4=\"none\"", "sensor4=\"touch\", sleep=\"120\"");
        let src = src.replace(';', "");
        let a = &parse_project_str(&src).unwrap().agents[0];
        assert_eq!(a.sleep_ms, 120);
        assert_eq!(a.sensors[3], SensorKind::Touch);
    }

    #[test]
    fn short_btaddress_rejected() {
        let src = SAMPLE.replace("00:16:53:01:02:03", "12:34");
        let err = parse_project_str(&src).unwrap_err();
        assert!(err.message.contains("btaddress"), "{}", err.message);
        assert!(err.message.contains("agentname"), "{}", err.message);
        assert!(err.message.contains("HH:HH"), "{}", err.message);
    }

    #[test]
    fn missing_mandatory_parameter_rejected() {
        let src = SAMPLE.replace("motorc=\"false\",", "");
        let err = parse_project_str(&src).unwrap_err();
        assert!(err.message.contains("missing mandatory parameter 'motorc'"), "{}", err.message);
    }

    #[test]
    fn unknown_and_duplicate_keys_rejected() {
        let src = SAMPLE.replace("motorc=\"false\"", "motord=\"true\", motorc=\"false\"");
        let err = parse_project_str(&src).unwrap_err();
        assert!(err.message.contains("unknown parameter 'motord'"), "{}", err.message);

        let src = SAMPLE.replace("motorc=\"false\"", "motorc=\"false\", motorc=\"false\"");
        let err = parse_project_str(&src).unwrap_err();
        assert!(err.message.contains("duplicate parameter 'motorc'"), "{}", err.message);
    }

    #[test]
    fn bad_sensor_and_motor_values_rejected() {
        let src = SAMPLE.replace("sensor1=\"light\"", "sensor1=\"laser\"");
        let err = parse_project_str(&src).unwrap_err();
        assert!(err.message.contains("sensor1"), "{}", err.message);

        let src = SAMPLE.replace("motora=\"true\"", "motora=\"yes\"");
        let err = parse_project_str(&src).unwrap_err();
        assert!(err.message.contains("motora"), "{}", err.message);
    }

    #[test]
    fn zero_sleep_rejected() {
        let src = SAMPLE.replace("sensor4=\"none\"", "sensor4=\"none\", sleep=\"0\"");
        let err = parse_project_str(&src).unwrap_err();
        assert!(err.message.contains("sleep"), "{}", err.message);
    }

    #[test]
    fn duplicate_agent_names_and_btnames_rejected() {
        let two = format!("{SAMPLE}\n{SAMPLE}");
        let err = parse_project_str(&two).unwrap_err();
        assert!(err.message.contains("duplicate agent name"), "{}", err.message);

        let second = SAMPLE.replace("agentname agentsource", "other agentsource");
        let err = parse_project_str(&format!("{SAMPLE}\n{second}")).unwrap_err();
        assert!(err.message.contains("share btname"), "{}", err.message);
    }

    #[test]
    fn malformed_pattern_names_the_agent() {
        let src = SAMPLE.replace("\"light(port,_)\"", "\"light(port,\"");
        let err = parse_project_str(&src).unwrap_err();
        assert!(err.message.contains("agentname"), "{}", err.message);
        assert!(err.message.contains("uniqueness pattern"), "{}", err.message);
    }

    #[test]
    fn uppercase_agent_name_rejected() {
        let src = SAMPLE.replace("agentname agentsource", "AgentName agentsource");
        let err = parse_project_str(&src).unwrap_err();
        assert!(err.message.contains("lowercase identifier"), "{}", err.message);
    }
}

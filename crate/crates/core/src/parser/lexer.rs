//! Tokenizer for agent programs and trigger patterns.
//!
//! Whitespace (including tabs) is insignificant; `//` runs to end of line
//! and `/* ... */` blocks are skipped. Every token records the 1-based
//! line/column where it starts so parse errors point at real source.

use std::fmt;

use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    /// Lowercase-initial identifier: atoms, functors, keywords (`not`).
    Ident(String),
    /// Uppercase- or `_`-initial identifier.
    Var(String),
    Num(f64),
    Str(String),
    /// `.name` — an internal-action name (the dot is part of the token).
    Internal(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Dot,
    Colon,
    /// `<-`
    Arrow,
    /// `:-`
    ColonDash,
    Amp,
    Plus,
    Minus,
    /// `-+`
    MinusPlus,
    Bang,
    /// `!!`
    BangBang,
    Question,
    Lt,
    Le,
    Gt,
    Ge,
    /// `==`
    EqEq,
    /// `\==`
    Ne,
    Eq,
    Star,
    Slash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Var(s) => write!(f, "variable '{s}'"),
            Tok::Num(v) => write!(f, "number {}", crate::term::fmt_number(*v)),
            Tok::Str(_) => write!(f, "string literal"),
            Tok::Internal(s) => write!(f, "'.{s}'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::LBracket => write!(f, "'['"),
            Tok::RBracket => write!(f, "']'"),
            Tok::Comma => write!(f, "','"),
            Tok::Semi => write!(f, "';'"),
            Tok::Dot => write!(f, "'.'"),
            Tok::Colon => write!(f, "':'"),
            Tok::Arrow => write!(f, "'<-'"),
            Tok::ColonDash => write!(f, "':-'"),
            Tok::Amp => write!(f, "'&'"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::MinusPlus => write!(f, "'-+'"),
            Tok::Bang => write!(f, "'!'"),
            Tok::BangBang => write!(f, "'!!'"),
            Tok::Question => write!(f, "'?'"),
            Tok::Lt => write!(f, "'<'"),
            Tok::Le => write!(f, "'<='"),
            Tok::Gt => write!(f, "'>'"),
            Tok::Ge => write!(f, "'>='"),
            Tok::EqEq => write!(f, "'=='"),
            Tok::Ne => write!(f, "'\\=='"),
            Tok::Eq => write!(f, "'='"),
            Tok::Star => write!(f, "'*'"),
            Tok::Slash => write!(f, "'/'"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<char> {
        self.chars.get(self.pos + 1).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, col: usize, message: impl Into<String>) -> ParseError {
        ParseError { line, col, message: message.into() }
    }

    fn ident_tail(&mut self, first: char) -> String {
        let mut s = String::new();
        s.push(first);
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }
}

/// Tokenizes `src`, appending an `Eof` token so parsers always have a
/// position to report.
pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer { chars: src.chars().collect(), pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();

    loop {
        // Skip whitespace and comments.
        loop {
            match lx.peek() {
                Some(c) if c.is_whitespace() => {
                    lx.bump();
                }
                Some('/') if lx.peek2() == Some('/') => {
                    while let Some(c) = lx.peek() {
                        if c == '\n' {
                            break;
                        }
                        lx.bump();
                    }
                }
                Some('/') if lx.peek2() == Some('*') => {
                    let (line, col) = (lx.line, lx.col);
                    lx.bump();
                    lx.bump();
                    let mut closed = false;
                    while let Some(c) = lx.bump() {
                        if c == '*' && lx.peek() == Some('/') {
                            lx.bump();
                            closed = true;
                            break;
                        }
                    }
                    if !closed {
                        return Err(lx.err(line, col, "unterminated block comment"));
                    }
                }
                _ => break,
            }
        }

        let (line, col) = (lx.line, lx.col);
        let Some(c) = lx.peek() else {
            out.push(Token { tok: Tok::Eof, line, col });
            return Ok(out);
        };

        let tok = match c {
            '(' => {
                lx.bump();
                Tok::LParen
            }
            ')' => {
                lx.bump();
                Tok::RParen
            }
            '[' => {
                lx.bump();
                Tok::LBracket
            }
            ']' => {
                lx.bump();
                Tok::RBracket
            }
            ',' => {
                lx.bump();
                Tok::Comma
            }
            ';' => {
                lx.bump();
                Tok::Semi
            }
            '&' => {
                lx.bump();
                Tok::Amp
            }
            '+' => {
                lx.bump();
                Tok::Plus
            }
            '*' => {
                lx.bump();
                Tok::Star
            }
            '/' => {
                lx.bump();
                Tok::Slash
            }
            '?' => {
                lx.bump();
                Tok::Question
            }
            '-' => {
                lx.bump();
                if lx.peek() == Some('+') {
                    lx.bump();
                    Tok::MinusPlus
                } else {
                    Tok::Minus
                }
            }
            '!' => {
                lx.bump();
                if lx.peek() == Some('!') {
                    lx.bump();
                    Tok::BangBang
                } else {
                    Tok::Bang
                }
            }
            ':' => {
                lx.bump();
                if lx.peek() == Some('-') {
                    lx.bump();
                    Tok::ColonDash
                } else {
                    Tok::Colon
                }
            }
            '<' => {
                lx.bump();
                match lx.peek() {
                    Some('-') => {
                        lx.bump();
                        Tok::Arrow
                    }
                    Some('=') => {
                        lx.bump();
                        Tok::Le
                    }
                    _ => Tok::Lt,
                }
            }
            '>' => {
                lx.bump();
                if lx.peek() == Some('=') {
                    lx.bump();
                    Tok::Ge
                } else {
                    Tok::Gt
                }
            }
            '=' => {
                lx.bump();
                if lx.peek() == Some('=') {
                    lx.bump();
                    Tok::EqEq
                } else {
                    Tok::Eq
                }
            }
            '\\' => {
                lx.bump();
                if lx.peek() == Some('=') && lx.peek2() == Some('=') {
                    lx.bump();
                    lx.bump();
                    Tok::Ne
                } else {
                    return Err(lx.err(line, col, "expected '\\==' after '\\'"));
                }
            }
            '.' => {
                lx.bump();
                match lx.peek() {
                    Some(n) if n.is_ascii_lowercase() => {
                        lx.bump();
                        Tok::Internal(lx.ident_tail(n))
                    }
                    _ => Tok::Dot,
                }
            }
            '"' => {
                lx.bump();
                let mut s = String::new();
                loop {
                    match lx.bump() {
                        None => return Err(lx.err(line, col, "unterminated string literal")),
                        Some('"') => break,
                        Some('\\') => match lx.bump() {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some(other) => {
                                return Err(lx.err(
                                    lx.line,
                                    lx.col,
                                    format!("unknown escape sequence '\\{other}'"),
                                ))
                            }
                            None => {
                                return Err(lx.err(line, col, "unterminated string literal"))
                            }
                        },
                        Some(other) => s.push(other),
                    }
                }
                Tok::Str(s)
            }
            d if d.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(c) = lx.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        lx.bump();
                    } else {
                        break;
                    }
                }
                if lx.peek() == Some('.') && lx.peek2().is_some_and(|c| c.is_ascii_digit()) {
                    s.push('.');
                    lx.bump();
                    while let Some(c) = lx.peek() {
                        if c.is_ascii_digit() {
                            s.push(c);
                            lx.bump();
                        } else {
                            break;
                        }
                    }
                }
                let v: f64 = s
                    .parse()
                    .map_err(|_| lx.err(line, col, format!("malformed number '{s}'")))?;
                Tok::Num(v)
            }
            a if a.is_ascii_lowercase() => {
                lx.bump();
                Tok::Ident(lx.ident_tail(a))
            }
            v if v.is_ascii_uppercase() || v == '_' => {
                lx.bump();
                Tok::Var(lx.ident_tail(v))
            }
            other => return Err(lx.err(line, col, format!("unexpected character '{other}'"))),
        };
        out.push(Token { tok, line, col });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn punctuation_and_operators() {
        assert_eq!(
            toks("<- :- -+ !! \\== <= >= == = < > ! - + ? & ; ."),
            vec![
                Tok::Arrow,
                Tok::ColonDash,
                Tok::MinusPlus,
                Tok::BangBang,
                Tok::Ne,
                Tok::Le,
                Tok::Ge,
                Tok::EqEq,
                Tok::Eq,
                Tok::Lt,
                Tok::Gt,
                Tok::Bang,
                Tok::Minus,
                Tok::Plus,
                Tok::Question,
                Tok::Amp,
                Tok::Semi,
                Tok::Dot,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn idents_vars_numbers() {
        assert_eq!(
            toks("bars_passed(0) BarsPassed _ light2 3.5"),
            vec![
                Tok::Ident("bars_passed".into()),
                Tok::LParen,
                Tok::Num(0.0),
                Tok::RParen,
                Tok::Var("BarsPassed".into()),
                Tok::Var("_".into()),
                Tok::Ident("light2".into()),
                Tok::Num(3.5),
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn internal_action_names_versus_end_of_statement() {
        assert_eq!(
            toks("!move.\n.wait(\"+light(_,_)\")"),
            vec![
                Tok::Bang,
                Tok::Ident("move".into()),
                Tok::Dot,
                Tok::Internal("wait".into()),
                Tok::LParen,
                Tok::Str("+light(_,_)".into()),
                Tok::RParen,
                Tok::Eof,
            ]
        );
        assert_eq!(
            toks(".drop_all_desires;"),
            vec![Tok::Internal("drop_all_desires".into()), Tok::Semi, Tok::Eof]
        );
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            toks("// header\nx. /* block\nspanning */ y."),
            vec![
                Tok::Ident("x".into()),
                Tok::Dot,
                Tok::Ident("y".into()),
                Tok::Dot,
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn string_escapes() {
        assert_eq!(toks(r#""a\"b\\c""#), vec![Tok::Str("a\"b\\c".into()), Tok::Eof]);
        let err = lex("\"unterminated").unwrap_err();
        assert_eq!((err.line, err.col), (1, 1));
        let err = lex(r#""bad \q escape""#).unwrap_err();
        assert!(err.message.contains("escape"));
    }

    #[test]
    fn error_positions_are_one_based() {
        let err = lex("ok.\n  @").unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
    }
}

//! Lexer shared by the city and agenda rule languages.

use std::fmt;

use super::error::RuleError;
use super::Pos;

/// Time-unit suffix of a numeric literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TimeUnit {
    Hours,
    Minutes,
    Seconds,
}

impl TimeUnit {
    pub fn seconds(self) -> f64 {
        match self {
            TimeUnit::Hours => 3600.0,
            TimeUnit::Minutes => 60.0,
            TimeUnit::Seconds => 1.0,
        }
    }

    pub fn suffix(self) -> char {
        match self {
            TimeUnit::Hours => 'h',
            TimeUnit::Minutes => 'm',
            TimeUnit::Seconds => 's',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    /// Literal value, already normalized to seconds when a unit is present.
    Number {
        value: f64,
        unit: Option<TimeUnit>,
    },
    Str(String),
    /// `@Name` or `@Name(arg, ...)`; arguments are kept as their literal text.
    Annotation {
        name: String,
        args: Vec<String>,
    },
    Arrow,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Pipe,
    Star,
    Tilde,
    Quote,
    Plus,
    Minus,
    Slash,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    AndAnd,
    OrOr,
    Bang,
    Assign,
    Ellipsis,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Number { value, .. } => write!(f, "number {value}"),
            TokenKind::Str(s) => write!(f, "string {s:?}"),
            TokenKind::Annotation { name, .. } => write!(f, "annotation @{name}"),
            TokenKind::Arrow => f.write_str("`-->`"),
            TokenKind::LParen => f.write_str("`(`"),
            TokenKind::RParen => f.write_str("`)`"),
            TokenKind::LBrace => f.write_str("`{`"),
            TokenKind::RBrace => f.write_str("`}`"),
            TokenKind::LBracket => f.write_str("`[`"),
            TokenKind::RBracket => f.write_str("`]`"),
            TokenKind::Comma => f.write_str("`,`"),
            TokenKind::Colon => f.write_str("`:`"),
            TokenKind::Pipe => f.write_str("`|`"),
            TokenKind::Star => f.write_str("`*`"),
            TokenKind::Tilde => f.write_str("`~`"),
            TokenKind::Quote => f.write_str("`'`"),
            TokenKind::Plus => f.write_str("`+`"),
            TokenKind::Minus => f.write_str("`-`"),
            TokenKind::Slash => f.write_str("`/`"),
            TokenKind::Lt => f.write_str("`<`"),
            TokenKind::Le => f.write_str("`<=`"),
            TokenKind::Gt => f.write_str("`>`"),
            TokenKind::Ge => f.write_str("`>=`"),
            TokenKind::EqEq => f.write_str("`==`"),
            TokenKind::Ne => f.write_str("`!=`"),
            TokenKind::AndAnd => f.write_str("`&&`"),
            TokenKind::OrOr => f.write_str("`||`"),
            TokenKind::Bang => f.write_str("`!`"),
            TokenKind::Assign => f.write_str("`=`"),
            TokenKind::Ellipsis => f.write_str("`...`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

struct Lexer<'s> {
    chars: Vec<char>,
    idx: usize,
    line: u32,
    col: u32,
    _src: &'s str,
}

impl<'s> Lexer<'s> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.idx).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.idx + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.idx).copied()?;
        self.idx += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn error(&self, pos: Pos, msg: impl Into<String>) -> RuleError {
        RuleError::Lex { pos, msg: msg.into() }
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn ident(&mut self) -> String {
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                s.push(c);
                self.bump();
            } else if c == '.' && self.peek_at(1).is_some_and(|n| n.is_alphabetic() || n == '_') {
                // dotted names such as `person.id`
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        s
    }

    fn number(&mut self, start: Pos) -> Result<TokenKind, RuleError> {
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|n| n.is_ascii_digit())) {
                text.push(c);
                self.bump();
            } else {
                break;
            }
        }
        let mut value: f64 = text.parse().map_err(|_| self.error(start, format!("malformed number `{text}`")))?;
        let mut unit = None;
        if let Some(c) = self.peek() {
            if c.is_alphabetic() || c == '_' {
                let trailing_ident = self.peek_at(1).is_some_and(|n| n.is_alphanumeric() || n == '_');
                unit = match c {
                    'h' if !trailing_ident => Some(TimeUnit::Hours),
                    'm' if !trailing_ident => Some(TimeUnit::Minutes),
                    's' if !trailing_ident => Some(TimeUnit::Seconds),
                    _ => return Err(self.error(self.pos(), format!("illegal suffix after number `{text}`"))),
                };
                self.bump();
            }
        }
        if let Some(u) = unit {
            value *= u.seconds();
        }
        Ok(TokenKind::Number { value, unit })
    }

    fn string(&mut self, start: Pos) -> Result<String, RuleError> {
        self.bump(); // opening quote
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.error(start, "unterminated string literal")),
                Some('"') => return Ok(s),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    _ => return Err(self.error(start, "invalid escape in string literal")),
                },
                Some(c) => s.push(c),
            }
        }
    }

    fn annotation(&mut self, start: Pos) -> Result<TokenKind, RuleError> {
        self.bump(); // '@'
        if !self.peek().is_some_and(|c| c.is_alphabetic() || c == '_') {
            return Err(self.error(start, "expected annotation name after `@`"));
        }
        let name = self.ident();
        let mut args = Vec::new();
        if self.peek() == Some('(') {
            self.bump();
            loop {
                self.skip_trivia();
                let here = self.pos();
                match self.peek() {
                    Some(')') => {
                        self.bump();
                        break;
                    }
                    Some('"') => args.push(self.string(here)?),
                    Some(c) if c.is_ascii_digit() => {
                        if let TokenKind::Number { value, .. } = self.number(here)? {
                            args.push(value.to_string());
                        }
                    }
                    Some(c) if c.is_alphabetic() || c == '_' => args.push(self.ident()),
                    _ => return Err(self.error(here, format!("malformed arguments to @{name}"))),
                }
                self.skip_trivia();
                match self.peek() {
                    Some(',') => {
                        self.bump();
                    }
                    Some(')') => {}
                    _ => return Err(self.error(self.pos(), format!("expected `,` or `)` in @{name}(...)"))),
                }
            }
        }
        Ok(TokenKind::Annotation { name, args })
    }

    fn next_token(&mut self) -> Result<Option<Token>, RuleError> {
        self.skip_trivia();
        let pos = self.pos();
        let Some(c) = self.peek() else { return Ok(None) };
        let kind = match c {
            '@' => self.annotation(pos)?,
            '"' => TokenKind::Str(self.string(pos)?),
            c if c.is_ascii_digit() => self.number(pos)?,
            '.' if self.peek_at(1).is_some_and(|n| n.is_ascii_digit()) => self.number(pos)?,
            '.' if self.peek_at(1) == Some('.') && self.peek_at(2) == Some('.') => {
                self.bump();
                self.bump();
                self.bump();
                TokenKind::Ellipsis
            }
            c if c.is_alphabetic() || c == '_' => TokenKind::Ident(self.ident()),
            '-' => {
                if self.peek_at(1) == Some('-') && self.peek_at(2) == Some('-') && self.peek_at(3) == Some('>') {
                    return Err(self.error(pos, "`--->` is not a rule arrow; use `-->`"));
                }
                if self.peek_at(1) == Some('-') && self.peek_at(2) == Some('>') {
                    self.bump();
                    self.bump();
                    self.bump();
                    TokenKind::Arrow
                } else if self.peek_at(1) == Some('>') {
                    self.bump();
                    self.bump();
                    TokenKind::Arrow
                } else {
                    self.bump();
                    TokenKind::Minus
                }
            }
            _ => {
                self.bump();
                let two = |lx: &mut Self, next: char, yes: TokenKind, no: TokenKind| {
                    if lx.peek() == Some(next) {
                        lx.bump();
                        yes
                    } else {
                        no
                    }
                };
                match c {
                    '(' => TokenKind::LParen,
                    ')' => TokenKind::RParen,
                    '{' => TokenKind::LBrace,
                    '}' => TokenKind::RBrace,
                    '[' => TokenKind::LBracket,
                    ']' => TokenKind::RBracket,
                    ',' => TokenKind::Comma,
                    ':' => TokenKind::Colon,
                    '*' => TokenKind::Star,
                    '~' => TokenKind::Tilde,
                    '\'' => TokenKind::Quote,
                    '+' => TokenKind::Plus,
                    '/' => TokenKind::Slash,
                    '<' => two(self, '=', TokenKind::Le, TokenKind::Lt),
                    '>' => two(self, '=', TokenKind::Ge, TokenKind::Gt),
                    '!' => two(self, '=', TokenKind::Ne, TokenKind::Bang),
                    '=' => two(self, '=', TokenKind::EqEq, TokenKind::Assign),
                    '|' => two(self, '|', TokenKind::OrOr, TokenKind::Pipe),
                    '&' => {
                        if self.peek() == Some('&') {
                            self.bump();
                            TokenKind::AndAnd
                        } else {
                            return Err(self.error(pos, "illegal character `&`"));
                        }
                    }
                    other => return Err(self.error(pos, format!("illegal character `{other}`"))),
                }
            }
        };
        Ok(Some(Token { kind, pos }))
    }
}

/// Splits rule-file source into tokens. `#` starts a line comment.
pub fn tokenize(source: &str) -> Result<Vec<Token>, RuleError> {
    let mut lexer = Lexer { chars: source.chars().collect(), idx: 0, line: 1, col: 1, _src: source };
    let mut out = Vec::new();
    while let Some(tok) = lexer.next_token()? {
        out.push(tok);
    }
    Ok(out)
}

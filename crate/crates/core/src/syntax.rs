//! Lexer and surface expression grammar shared by the Verilog and PSL
//! frontends, plus lowering of surface expressions to [`ir::Expr`].

use std::fmt;

use thiserror::Error;

use crate::ir::{self, BinaryOp, BitVec, Expr, UnaryOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{pos}: [{code}] {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    /// Stable diagnostic code, e.g. `syntax` or `unsupported-construct`.
    pub code: &'static str,
    pub message: String,
}

impl SyntaxError {
    pub fn new(pos: Pos, code: &'static str, message: impl Into<String>) -> Self {
        SyntaxError {
            pos,
            code,
            message: message.into(),
        }
    }

    pub fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        Self::new(pos, "syntax", message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// A literal; `width` is `None` for plain decimals.
    Number {
        width: Option<u32>,
        value: u64,
    },
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number {
                width: Some(w),
                value,
            } => write!(f, "`{w}'d{value}`"),
            Tok::Number { width: None, value } => write!(f, "`{value}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

const PUNCTS: &[&str] = &[
    "...", "->", "&&", "||", "==", "!=", "~^", "^~", "<=", "(", ")", "[", "]", "{", "}", ";", ",",
    ":", ".", "=", "?", "~", "&", "|", "^", "!", "+", "@", "#", "*", "<", ">", "-", "'",
];

/// Tokenizes Verilog-flavoured text. `dotted` lets identifiers contain `.`
/// (hierarchical names in PSL).
pub fn lex(text: &str, dotted: bool) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col, 2);
            loop {
                if i + 1 >= chars.len() {
                    return Err(SyntaxError::syntax(pos, "unterminated block comment"));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    advance(&mut i, &mut line, &mut col, 2);
                    break;
                }
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c == '`' {
            return Err(SyntaxError::new(
                pos,
                "unsupported-construct",
                "preprocessor directives are not supported",
            ));
        }
        if c == '\\' {
            let start = i + 1;
            let mut j = start;
            while j < chars.len() && !chars[j].is_whitespace() {
                j += 1;
            }
            if j == start {
                return Err(SyntaxError::syntax(pos, "empty escaped identifier"));
            }
            let name: String = chars[start..j].iter().collect();
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            out.push(Token {
                tok: Tok::Ident(name),
                pos,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            let start = i;
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_ascii_alphanumeric()
                    || chars[j] == '_'
                    || chars[j] == '$'
                    || (dotted
                        && chars[j] == '.'
                        && chars
                            .get(j + 1)
                            .is_some_and(|n| n.is_ascii_alphabetic() || *n == '_')))
            {
                j += 1;
            }
            let name: String = chars[start..j].iter().collect();
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            out.push(Token {
                tok: Tok::Ident(name),
                pos,
            });
            continue;
        }
        if c.is_ascii_digit()
            || (c == '\'' && chars.get(i + 1).is_some_and(|n| "bBdDhHoO".contains(*n)))
        {
            let (tok, len) = lex_number(&chars[i..], pos)?;
            advance(&mut i, &mut line, &mut col, len);
            out.push(Token { tok, pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        if let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            advance(&mut i, &mut line, &mut col, p.chars().count());
            out.push(Token {
                tok: Tok::Punct(p),
                pos,
            });
            continue;
        }
        return Err(SyntaxError::syntax(
            pos,
            format!("unexpected character `{c}`"),
        ));
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}

fn lex_number(chars: &[char], pos: Pos) -> Result<(Tok, usize), SyntaxError> {
    let mut j = 0;
    while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '_') {
        j += 1;
    }
    let size_txt: String = chars[..j].iter().filter(|c| **c != '_').collect();
    if chars.get(j) != Some(&'\'') {
        let value = size_txt
            .parse::<u64>()
            .map_err(|_| SyntaxError::syntax(pos, "decimal literal out of range"))?;
        return Ok((Tok::Number { width: None, value }, j));
    }
    let width = if size_txt.is_empty() {
        None
    } else {
        let w: u32 = size_txt
            .parse()
            .map_err(|_| SyntaxError::syntax(pos, "bad literal size"))?;
        if w == 0 || w > ir::MAX_WIDTH {
            return Err(SyntaxError::new(
                pos,
                "unsupported-construct",
                format!("literal width {w} outside 1..={}", ir::MAX_WIDTH),
            ));
        }
        Some(w)
    };
    j += 1;
    let base = match chars.get(j).map(|c| c.to_ascii_lowercase()) {
        Some('b') => 2,
        Some('d') => 10,
        Some('h') => 16,
        Some('o') => 8,
        _ => return Err(SyntaxError::syntax(pos, "expected base after `'`")),
    };
    j += 1;
    let start = j;
    while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
        j += 1;
    }
    let digits: String = chars[start..j].iter().filter(|c| **c != '_').collect();
    if digits.is_empty() {
        return Err(SyntaxError::syntax(pos, "literal without digits"));
    }
    if digits
        .chars()
        .any(|c| matches!(c.to_ascii_lowercase(), 'x' | 'z' | '?'))
    {
        return Err(SyntaxError::new(
            pos,
            "unsupported-construct",
            "X/Z literal values are not supported",
        ));
    }
    let value = u64::from_str_radix(&digits, base)
        .map_err(|_| SyntaxError::syntax(pos, format!("bad digits `{digits}` for base {base}")))?;
    if let Some(w) = width {
        if value & !ir::mask(w) != 0 {
            return Err(SyntaxError::syntax(
                pos,
                format!("literal value does not fit in {w} bits"),
            ));
        }
    }
    Ok((Tok::Number { width, value }, j))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SUnary {
    Not,
    LNot,
    RedAnd,
    RedOr,
    RedXor,
    RedXnor,
}

impl SUnary {
    fn symbol(self) -> &'static str {
        match self {
            SUnary::Not => "~",
            SUnary::LNot => "!",
            SUnary::RedAnd => "&",
            SUnary::RedOr => "|",
            SUnary::RedXor => "^",
            SUnary::RedXnor => "~^",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SBinary {
    And,
    Or,
    Xor,
    Xnor,
    LAnd,
    LOr,
    Eq,
    Ne,
    Add,
}

impl SBinary {
    fn symbol(self) -> &'static str {
        match self {
            SBinary::And => "&",
            SBinary::Or => "|",
            SBinary::Xor => "^",
            SBinary::Xnor => "~^",
            SBinary::LAnd => "&&",
            SBinary::LOr => "||",
            SBinary::Eq => "==",
            SBinary::Ne => "!=",
            SBinary::Add => "+",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            SBinary::LOr => 1,
            SBinary::LAnd => 2,
            SBinary::Or => 3,
            SBinary::Xor | SBinary::Xnor => 4,
            SBinary::And => 5,
            SBinary::Eq | SBinary::Ne => 6,
            SBinary::Add => 7,
        }
    }
}

/// Source-level expression. The temporal forms only come out of the PSL
/// parser.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SExpr {
    Ident(String),
    Literal { width: Option<u32>, value: u64 },
    Index(Box<SExpr>, u32),
    Range(Box<SExpr>, u32, u32),
    Concat(Vec<SExpr>),
    Replicate(u32, Box<SExpr>),
    Unary(SUnary, Box<SExpr>),
    Binary(SBinary, Box<SExpr>, Box<SExpr>),
    Ternary(Box<SExpr>, Box<SExpr>, Box<SExpr>),
    Always(Box<SExpr>),
    Never(Box<SExpr>),
    Next(Box<SExpr>),
    Implies(Box<SExpr>, Box<SExpr>),
}

impl SExpr {
    pub fn ident(s: impl Into<String>) -> SExpr {
        SExpr::Ident(s.into())
    }

    pub fn sized(width: u32, value: u64) -> SExpr {
        SExpr::Literal {
            width: Some(width),
            value,
        }
    }

    pub fn unary(op: SUnary, e: SExpr) -> SExpr {
        SExpr::Unary(op, Box::new(e))
    }

    pub fn binary(op: SBinary, a: SExpr, b: SExpr) -> SExpr {
        SExpr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn index(self, i: u32) -> SExpr {
        SExpr::Index(Box::new(self), i)
    }

    pub fn range(self, m: u32, l: u32) -> SExpr {
        SExpr::Range(Box::new(self), m, l)
    }

    fn is_atomic(&self) -> bool {
        matches!(
            self,
            SExpr::Ident(_)
                | SExpr::Literal { .. }
                | SExpr::Index(..)
                | SExpr::Range(..)
                | SExpr::Concat(_)
                | SExpr::Replicate(..)
        )
    }

    pub fn is_temporal(&self) -> bool {
        match self {
            SExpr::Always(_) | SExpr::Never(_) | SExpr::Next(_) | SExpr::Implies(..) => true,
            SExpr::Ident(_) | SExpr::Literal { .. } => false,
            SExpr::Index(e, _)
            | SExpr::Range(e, _, _)
            | SExpr::Unary(_, e)
            | SExpr::Replicate(_, e) => e.is_temporal(),
            SExpr::Concat(es) => es.iter().any(SExpr::is_temporal),
            SExpr::Binary(_, a, b) => a.is_temporal() || b.is_temporal(),
            SExpr::Ternary(a, b, c) => a.is_temporal() || b.is_temporal() || c.is_temporal(),
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &SExpr) -> fmt::Result {
    if e.is_atomic() {
        write!(f, "{e}")
    } else {
        write!(f, "({e})")
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Ident(s) => {
                if s.chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
                    && !s.starts_with(|c: char| c.is_ascii_digit())
                {
                    write!(f, "{s}")
                } else {
                    write!(f, "\\{s} ")
                }
            }
            SExpr::Literal { width: None, value } => write!(f, "{value}"),
            SExpr::Literal {
                width: Some(w),
                value,
            } => write!(f, "{w}'b{}", ir::to_binary(*value, *w)),
            SExpr::Index(e, i) => {
                write_operand(f, e)?;
                write!(f, "[{i}]")
            }
            SExpr::Range(e, m, l) => {
                write_operand(f, e)?;
                write!(f, "[{m}:{l}]")
            }
            SExpr::Concat(es) => {
                write!(f, "{{")?;
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "}}")
            }
            SExpr::Replicate(n, e) => write!(f, "{{{n}{{{e}}}}}"),
            SExpr::Unary(op, e) => {
                write!(f, "{}", op.symbol())?;
                write_operand(f, e)
            }
            SExpr::Binary(op, a, b) => {
                write_infix_operand(f, a)?;
                write!(f, " {} ", op.symbol())?;
                write_infix_operand(f, b)
            }
            SExpr::Ternary(c, a, b) => {
                write_infix_operand(f, c)?;
                write!(f, " ? ")?;
                write_infix_operand(f, a)?;
                write!(f, " : ")?;
                write_infix_operand(f, b)
            }
            SExpr::Always(e) => {
                write!(f, "always ")?;
                write_paren(f, e)
            }
            SExpr::Never(e) => {
                write!(f, "never ")?;
                write_paren(f, e)
            }
            SExpr::Next(e) => {
                write!(f, "next ")?;
                write_operand(f, e)
            }
            SExpr::Implies(a, c) => {
                write_infix_operand(f, a)?;
                write!(f, " -> ")?;
                if matches!(**c, SExpr::Next(_)) {
                    write!(f, "{c}")
                } else {
                    write_operand(f, c)
                }
            }
        }
    }
}

/// Operands of binary operators only need parentheses around other
/// infix forms; unary operators bind tighter.
fn write_infix_operand(f: &mut fmt::Formatter<'_>, e: &SExpr) -> fmt::Result {
    if e.is_atomic() || matches!(e, SExpr::Unary(..)) {
        write!(f, "{e}")
    } else {
        write!(f, "({e})")
    }
}

fn write_paren(f: &mut fmt::Formatter<'_>, e: &SExpr) -> fmt::Result {
    write!(f, "({e})")
}

/// Cursor over a token stream with the expression grammar.
pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Accept PSL temporal operators.
    pub temporal: bool,
}

impl Parser {
    pub fn new(toks: Vec<Token>, temporal: bool) -> Self {
        Parser {
            toks,
            pos: 0,
            temporal,
        }
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    pub fn here(&self) -> Pos {
        self.toks[self.pos].pos
    }

    pub fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    pub fn at_keyword(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == k)
    }

    pub fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, k: &str) -> bool {
        if self.at_keyword(k) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn unexpected(&self, what: &str) -> SyntaxError {
        SyntaxError::syntax(
            self.here(),
            format!("expected {what}, found {}", self.peek()),
        )
    }

    pub fn expect_punct(&mut self, p: &str) -> Result<(), SyntaxError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    pub fn expect_keyword(&mut self, k: &str) -> Result<(), SyntaxError> {
        if self.eat_keyword(k) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{k}`")))
        }
    }

    pub fn expect_ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    pub fn expect_uint(&mut self) -> Result<u32, SyntaxError> {
        match *self.peek() {
            Tok::Number { value, .. } if value <= u32::MAX as u64 => {
                self.bump();
                Ok(value as u32)
            }
            _ => Err(self.unexpected("integer")),
        }
    }

    /// Top-level expression: a temporal formula when `temporal` is set,
    /// otherwise a plain (ternary-level) expression.
    pub fn expr(&mut self) -> Result<SExpr, SyntaxError> {
        if self.temporal {
            self.fl()
        } else {
            self.ternary()
        }
    }

    fn fl(&mut self) -> Result<SExpr, SyntaxError> {
        if self.eat_keyword("always") {
            return Ok(SExpr::Always(Box::new(self.fl()?)));
        }
        if self.eat_keyword("never") {
            return Ok(SExpr::Never(Box::new(self.fl()?)));
        }
        if self.eat_keyword("next") {
            return Ok(SExpr::Next(Box::new(self.fl()?)));
        }
        let lhs = self.ternary()?;
        if self.eat_punct("->") {
            let rhs = self.fl()?;
            return Ok(SExpr::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn ternary(&mut self) -> Result<SExpr, SyntaxError> {
        let c = self.binary(0)?;
        if self.eat_punct("?") {
            let a = self.ternary()?;
            self.expect_punct(":")?;
            let b = self.ternary()?;
            return Ok(SExpr::Ternary(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn binop(&self) -> Option<SBinary> {
        let Tok::Punct(p) = self.peek() else {
            return None;
        };
        Some(match *p {
            "||" => SBinary::LOr,
            "&&" => SBinary::LAnd,
            "|" => SBinary::Or,
            "^" => SBinary::Xor,
            "~^" | "^~" => SBinary::Xnor,
            "&" => SBinary::And,
            "==" => SBinary::Eq,
            "!=" => SBinary::Ne,
            "+" => SBinary::Add,
            "-" | "*" | "<" | ">" => return None,
            _ => return None,
        })
    }

    fn binary(&mut self, min: u8) -> Result<SExpr, SyntaxError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec <= min {
                break;
            }
            self.bump();
            let rhs = self.binary(prec)?;
            lhs = SExpr::binary(op, lhs, rhs);
        }
        if let Tok::Punct(p @ ("-" | "*" | "<" | ">")) = self.peek() {
            return Err(SyntaxError::new(
                self.here(),
                "unsupported-construct",
                format!("operator `{p}` is outside the supported subset"),
            ));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<SExpr, SyntaxError> {
        let op = match self.peek() {
            Tok::Punct("~") => Some(SUnary::Not),
            Tok::Punct("!") => Some(SUnary::LNot),
            Tok::Punct("&") => Some(SUnary::RedAnd),
            Tok::Punct("|") => Some(SUnary::RedOr),
            Tok::Punct("^") => Some(SUnary::RedXor),
            Tok::Punct("~^") | Tok::Punct("^~") => Some(SUnary::RedXnor),
            _ => None,
        };
        if let Some(op) = op {
            self.bump();
            let e = self.unary()?;
            return Ok(SExpr::unary(op, e));
        }
        if self.temporal && self.at_keyword("next") {
            self.bump();
            return Ok(SExpr::Next(Box::new(self.unary()?)));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<SExpr, SyntaxError> {
        let mut e = self.primary()?;
        while self.eat_punct("[") {
            let m = self.expect_uint()?;
            if self.eat_punct(":") {
                let l = self.expect_uint()?;
                self.expect_punct("]")?;
                e = e.range(m, l);
            } else {
                self.expect_punct("]")?;
                e = e.index(m);
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<SExpr, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                if self.temporal && matches!(s.as_str(), "always" | "never") {
                    return self.fl();
                }
                self.bump();
                Ok(SExpr::Ident(s))
            }
            Tok::Number { width, value } => {
                self.bump();
                Ok(SExpr::Literal { width, value })
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Punct("{") => {
                self.bump();
                if let Tok::Number { width: None, value } = *self.peek() {
                    if matches!(self.peek_at(1), Tok::Punct("{")) {
                        self.bump();
                        self.bump();
                        let e = self.ternary()?;
                        self.expect_punct("}")?;
                        self.expect_punct("}")?;
                        if value == 0 {
                            return Err(SyntaxError::syntax(self.here(), "zero replication"));
                        }
                        return Ok(SExpr::Replicate(value as u32, Box::new(e)));
                    }
                }
                let mut parts = vec![self.ternary()?];
                while self.eat_punct(",") {
                    parts.push(self.ternary()?);
                }
                self.expect_punct("}")?;
                Ok(SExpr::Concat(parts))
            }
            Tok::Punct("#") => Err(SyntaxError::new(
                self.here(),
                "unsupported-construct",
                "delays are not supported",
            )),
            _ => Err(self.unexpected("expression")),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LowerError {
    #[error("unknown identifier `{0}`")]
    Unknown(String),
    #[error("{0}")]
    Type(String),
    #[error("temporal operator in a plain expression")]
    Temporal,
}

/// Lowers a surface expression to IR. `resolve` yields the IR expression
/// and width for an identifier. Unsized literals take the width their
/// context demands (`expected`, or the other operand), defaulting to 32.
pub fn lower(
    e: &SExpr,
    resolve: &dyn Fn(&str) -> Option<(Expr, u32)>,
    expected: Option<u32>,
) -> Result<(Expr, u32), LowerError> {
    let rec = |x: &SExpr, exp: Option<u32>| lower(x, resolve, exp);
    Ok(match e {
        SExpr::Ident(n) => resolve(n).ok_or_else(|| LowerError::Unknown(n.clone()))?,
        SExpr::Literal { width, value } => {
            let w = width.or(expected).unwrap_or(32);
            if *value & !ir::mask(w) != 0 {
                return Err(LowerError::Type(format!(
                    "literal {value} does not fit in {w} bits"
                )));
            }
            (Expr::Const(BitVec::new(w, *value)), w)
        }
        SExpr::Index(x, i) => {
            let (x, w) = rec(x, None)?;
            if *i >= w {
                return Err(LowerError::Type(format!(
                    "bit index {i} out of range for width {w}"
                )));
            }
            (x.bit(*i), 1)
        }
        SExpr::Range(x, m, l) => {
            let (x, w) = rec(x, None)?;
            if m < l || *m >= w {
                return Err(LowerError::Type(format!(
                    "range [{m}:{l}] out of range for width {w}"
                )));
            }
            (x.part(*m, *l), m - l + 1)
        }
        SExpr::Concat(parts) => {
            let mut es = Vec::new();
            let mut total = 0;
            for p in parts {
                if let SExpr::Literal { width: None, .. } = p {
                    return Err(LowerError::Type(
                        "unsized literal inside concatenation".into(),
                    ));
                }
                let (x, w) = rec(p, None)?;
                total += w;
                es.push(x);
            }
            check_width(total)?;
            (Expr::Concat(es), total)
        }
        SExpr::Replicate(n, x) => {
            let (x, w) = rec(x, None)?;
            let total = w * n;
            check_width(total)?;
            (Expr::Concat(vec![x; *n as usize]), total)
        }
        SExpr::Unary(op, x) => match op {
            SUnary::Not => {
                let (x, w) = rec(x, expected)?;
                (Expr::not(x), w)
            }
            SUnary::LNot => (Expr::unary(UnaryOp::LNot, rec(x, None)?.0), 1),
            SUnary::RedAnd => (Expr::unary(UnaryOp::RedAnd, rec(x, None)?.0), 1),
            SUnary::RedOr => (Expr::unary(UnaryOp::RedOr, rec(x, None)?.0), 1),
            SUnary::RedXor => (Expr::unary(UnaryOp::RedXor, rec(x, None)?.0), 1),
            SUnary::RedXnor => (Expr::not(Expr::unary(UnaryOp::RedXor, rec(x, None)?.0)), 1),
        },
        SExpr::Binary(op, a, b) => match op {
            SBinary::LAnd | SBinary::LOr => {
                let (x, _) = rec(a, None)?;
                let (y, _) = rec(b, None)?;
                let bop = if *op == SBinary::LAnd {
                    BinaryOp::LAnd
                } else {
                    BinaryOp::LOr
                };
                (Expr::binary(bop, x, y), 1)
            }
            _ => {
                let operand_ctx = match op {
                    SBinary::Eq | SBinary::Ne => None,
                    _ => expected,
                };
                let (x, y, w) =
                    lower_pair(a, b, resolve, operand_ctx, &format!("`{}`", op.symbol()))?;
                match op {
                    SBinary::And => (Expr::binary(BinaryOp::And, x, y), w),
                    SBinary::Or => (Expr::binary(BinaryOp::Or, x, y), w),
                    SBinary::Xor => (Expr::binary(BinaryOp::Xor, x, y), w),
                    SBinary::Xnor => (Expr::not(Expr::binary(BinaryOp::Xor, x, y)), w),
                    SBinary::Add => (Expr::binary(BinaryOp::Add, x, y), w),
                    SBinary::Eq => (Expr::binary(BinaryOp::Eq, x, y), 1),
                    SBinary::Ne => (Expr::binary(BinaryOp::Ne, x, y), 1),
                    SBinary::LAnd | SBinary::LOr => unreachable!(),
                }
            }
        },
        SExpr::Ternary(c, a, b) => {
            let c = condition(c, resolve)?;
            let (x, y, w) = lower_pair(a, b, resolve, expected, "`?:`")?;
            (Expr::mux(c, x, y), w)
        }
        SExpr::Always(_) | SExpr::Never(_) | SExpr::Next(_) | SExpr::Implies(..) => {
            return Err(LowerError::Temporal)
        }
    })
}

fn check_width(w: u32) -> Result<(), LowerError> {
    if w > ir::MAX_WIDTH {
        Err(LowerError::Type(format!(
            "width {w} exceeds {}",
            ir::MAX_WIDTH
        )))
    } else {
        Ok(())
    }
}

fn is_unsized(e: &SExpr) -> bool {
    match e {
        SExpr::Literal { width: None, .. } => true,
        SExpr::Unary(SUnary::Not, x) => is_unsized(x),
        _ => false,
    }
}

fn lower_pair(
    a: &SExpr,
    b: &SExpr,
    resolve: &dyn Fn(&str) -> Option<(Expr, u32)>,
    expected: Option<u32>,
    what: &str,
) -> Result<(Expr, Expr, u32), LowerError> {
    let (x, y, wx, wy) = match (is_unsized(a), is_unsized(b)) {
        (true, false) => {
            let (y, wy) = lower(b, resolve, expected)?;
            let (x, wx) = lower(a, resolve, Some(wy))?;
            (x, y, wx, wy)
        }
        (false, true) => {
            let (x, wx) = lower(a, resolve, expected)?;
            let (y, wy) = lower(b, resolve, Some(wx))?;
            (x, y, wx, wy)
        }
        _ => {
            let (x, wx) = lower(a, resolve, expected)?;
            let (y, wy) = lower(b, resolve, expected)?;
            (x, y, wx, wy)
        }
    };
    if wx != wy {
        return Err(LowerError::Type(format!(
            "operands of {what} have widths {wx} and {wy}"
        )));
    }
    Ok((x, y, wx))
}

/// Lowers a condition; multi-bit conditions test for non-zero.
pub fn condition(
    e: &SExpr,
    resolve: &dyn Fn(&str) -> Option<(Expr, u32)>,
) -> Result<Expr, LowerError> {
    let (x, w) = lower(e, resolve, Some(1))?;
    Ok(if w == 1 {
        x
    } else {
        Expr::unary(UnaryOp::RedOr, x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str, temporal: bool) -> SExpr {
        let mut p = Parser::new(lex(s, temporal).unwrap(), temporal);
        let e = p.expr().unwrap();
        assert_eq!(*p.peek(), Tok::Eof, "trailing input in {s}");
        e
    }

    #[test]
    fn literals_ignore_underscores() {
        let t = lex("4'b1_000 8'hff 12 3'd5", false).unwrap();
        assert_eq!(
            t[0].tok,
            Tok::Number {
                width: Some(4),
                value: 8
            }
        );
        assert_eq!(
            t[1].tok,
            Tok::Number {
                width: Some(8),
                value: 255
            }
        );
        assert_eq!(
            t[2].tok,
            Tok::Number {
                width: None,
                value: 12
            }
        );
        assert_eq!(
            t[3].tok,
            Tok::Number {
                width: Some(3),
                value: 5
            }
        );
    }

    #[test]
    fn xz_literal_rejected() {
        let e = lex("4'b10x0", false).unwrap_err();
        assert_eq!(e.code, "unsupported-construct");
    }

    #[test]
    fn precedence_and_printing() {
        let e = parse("a & ~(^b) | c == 2'b01", false);
        assert_eq!(e.to_string(), "(a & ~(^b)) | (c == 2'b01)");
        assert_eq!(parse(&e.to_string(), false), e);
    }

    #[test]
    fn temporal_implication() {
        let e = parse("always ((EC & ~(^ED)) -> next HE)", true);
        assert_eq!(e.to_string(), "always ((EC & ~(^ED)) -> next HE)");
        let e2 = parse("always ( ~(^I) -> next HE)", true);
        assert_eq!(e2.to_string(), "always (~(^I) -> next HE)");
    }

    #[test]
    fn unsized_literal_adapts_to_other_operand() {
        let resolve = |n: &str| (n == "c").then(|| (Expr::sig("c"), 3));
        let (e, w) = lower(&parse("c + 1", false), &resolve, None).unwrap();
        assert_eq!(w, 3);
        assert_eq!(
            e,
            Expr::binary(BinaryOp::Add, Expr::sig("c"), Expr::konst(3, 1))
        );
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let resolve = |n: &str| match n {
            "a" => Some((Expr::sig("a"), 3)),
            "b" => Some((Expr::sig("b"), 4)),
            _ => None,
        };
        assert!(matches!(
            lower(&parse("a & b", false), &resolve, None),
            Err(LowerError::Type(_))
        ));
    }
}

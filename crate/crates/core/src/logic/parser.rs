//! Concrete syntax for node classifiers.
//!
//! ```text
//! formula  = or ;
//! or       = and , { "|" , and } ;
//! and      = unary , { "&" , unary } ;
//! unary    = "!" , unary | modal | primary ;
//! modal    = "<" , param , ">" , [ "^" , ">=" , INT ] , unary ;
//! primary  = "True" | NAME , "(" , "x" , ")" | "(" , formula , ")" ;
//! param    = pand , { "|" , pand } ;
//! pand     = punary , { "&" , punary } ;
//! punary   = "!" , punary | "id" | "e" , [ INT ] | "(" , param , ")" ;
//! ```
//!
//! A modality without `^>=N` counts at least one node; `e` is `e1`.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::ast::{Formula, FormulaAst, ModalParam};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

/// Maps atom names to node color ids.
#[derive(Debug, Clone)]
pub struct Palette {
    names: HashMap<String, usize>,
}

pub const DEFAULT_COLOR_NAMES: [&str; 10] = [
    "Red", "Blue", "Green", "Yellow", "Orange", "Purple", "Cyan", "Magenta", "Brown", "Gray",
];

impl Default for Palette {
    /// `Red = 0`, `Blue = 1`, then the rest of [`DEFAULT_COLOR_NAMES`].
    /// Names `C<n>` always resolve to color `n`.
    fn default() -> Self {
        Self::from_names(&DEFAULT_COLOR_NAMES)
    }
}

impl Palette {
    pub fn from_names(names: &[&str]) -> Self {
        Self {
            names: names
                .iter()
                .enumerate()
                .map(|(i, n)| (n.to_string(), i))
                .collect(),
        }
    }

    pub fn resolve(&self, name: &str) -> Option<usize> {
        if let Some(&c) = self.names.get(name) {
            return Some(c);
        }
        name.strip_prefix('C')?.parse().ok()
    }

    pub fn name_of(&self, color: usize) -> String {
        self.names
            .iter()
            .find(|(_, &c)| c == color)
            .map(|(n, _)| n.clone())
            .unwrap_or_else(|| format!("C{color}"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub palette: Palette,
    /// Largest allowed hop predicate index, if bounded.
    pub max_hop: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(usize),
    LParen,
    RParen,
    And,
    Or,
    Not,
    Lt,
    Gt,
    Caret,
    Ge,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::And => write!(f, "`&`"),
            Tok::Or => write!(f, "`|`"),
            Tok::Not => write!(f, "`!`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::End => write!(f, "end of input"),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '&' => Some(Tok::And),
            '|' => Some(Tok::Or),
            '!' => Some(Tok::Not),
            '<' => Some(Tok::Lt),
            '^' => Some(Tok::Caret),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, line: l0, column: c0 });
            i += 1;
            col += 1;
            continue;
        }
        if c == '>' {
            if chars.get(i + 1) == Some(&'=') {
                out.push(Spanned { tok: Tok::Ge, line: l0, column: c0 });
                i += 2;
                col += 2;
            } else {
                out.push(Spanned { tok: Tok::Gt, line: l0, column: c0 });
                i += 1;
                col += 1;
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let n = s.parse().map_err(|_| ParseError {
                line: l0,
                column: c0,
                message: format!("integer {s} too large"),
            })?;
            col += i - start;
            out.push(Spanned { tok: Tok::Int(n), line: l0, column: c0 });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Spanned {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: l0,
                column: c0,
            });
            continue;
        }
        return Err(ParseError {
            line: l0,
            column: c0,
            message: format!("unexpected character {c:?}"),
        });
    }
    out.push(Spanned { tok: Tok::End, line, column: col });
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Spanned>,
    pos: usize,
    opts: &'a ParseOptions,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {tok}, found {}", self.peek())))
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conj()?;
        while *self.peek() == Tok::Or {
            self.pos += 1;
            lhs = Formula::or(lhs, self.conj()?);
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.pos += 1;
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Tok::Not => {
                self.pos += 1;
                Ok(Formula::not(self.unary()?))
            }
            Tok::Lt => {
                self.pos += 1;
                let param = self.param()?;
                self.expect(Tok::Gt)?;
                let mut count = 1;
                if *self.peek() == Tok::Caret {
                    self.pos += 1;
                    self.expect(Tok::Ge)?;
                    match *self.peek() {
                        Tok::Int(n) if n >= 1 => {
                            count = n;
                            self.pos += 1;
                        }
                        _ => return Err(self.error("expected a count >= 1 after `>=`")),
                    }
                }
                Ok(Formula::modal(param, count, self.unary()?))
            }
            Tok::LParen => {
                self.pos += 1;
                let f = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(name) if name == "True" => {
                self.pos += 1;
                Ok(Formula::True)
            }
            Tok::Ident(name) => {
                let color = self
                    .opts
                    .palette
                    .resolve(&name)
                    .ok_or_else(|| self.error(format!("unknown color `{name}`")))?;
                self.pos += 1;
                self.expect(Tok::LParen)?;
                match self.peek() {
                    Tok::Ident(v) if v == "x" => self.pos += 1,
                    other => return Err(self.error(format!("expected `x`, found {other}"))),
                }
                self.expect(Tok::RParen)?;
                Ok(Formula::Atom { name, color })
            }
            other => Err(self.error(format!("expected a formula, found {other}"))),
        }
    }

    fn param(&mut self) -> Result<ModalParam, ParseError> {
        let mut lhs = self.param_and()?;
        while *self.peek() == Tok::Or {
            self.pos += 1;
            lhs = ModalParam::Union(Box::new(lhs), Box::new(self.param_and()?));
        }
        Ok(lhs)
    }

    fn param_and(&mut self) -> Result<ModalParam, ParseError> {
        let mut lhs = self.param_unary()?;
        while *self.peek() == Tok::And {
            self.pos += 1;
            lhs = ModalParam::Inter(Box::new(lhs), Box::new(self.param_unary()?));
        }
        Ok(lhs)
    }

    fn param_unary(&mut self) -> Result<ModalParam, ParseError> {
        match self.peek().clone() {
            Tok::Not => {
                self.pos += 1;
                Ok(ModalParam::Not(Box::new(self.param_unary()?)))
            }
            Tok::LParen => {
                self.pos += 1;
                let p = self.param()?;
                self.expect(Tok::RParen)?;
                Ok(p)
            }
            Tok::Ident(name) if name == "id" => {
                self.pos += 1;
                Ok(ModalParam::Id)
            }
            Tok::Ident(name) if name.starts_with('e') => {
                let digits = &name[1..];
                let hop = if digits.is_empty() {
                    1
                } else {
                    digits
                        .parse::<usize>()
                        .map_err(|_| self.error(format!("bad hop predicate `{name}`")))?
                };
                if hop == 0 {
                    return Err(self.error("hop predicates start at e1"));
                }
                if let Some(k) = self.opts.max_hop {
                    if hop > k {
                        return Err(self.error(format!("hop predicate e{hop} exceeds k = {k}")));
                    }
                }
                self.pos += 1;
                Ok(ModalParam::Edge(hop))
            }
            other => Err(self.error(format!("expected a modal parameter, found {other}"))),
        }
    }
}

pub fn parse_formula(text: &str) -> Result<FormulaAst, ParseError> {
    parse_formula_with(text, &ParseOptions::default())
}

pub fn parse_formula_with(text: &str, opts: &ParseOptions) -> Result<FormulaAst, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, opts };
    let f = p.formula()?;
    if *p.peek() != Tok::End {
        return Err(p.error(format!("unexpected {} after formula", p.peek())));
    }
    Ok(FormulaAst::new(f))
}

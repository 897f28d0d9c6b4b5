//! Concrete syntax: lexer, recursive-descent parser and minimal-parentheses
//! printer for terms and linear specifications.
//!
//! Binding strength, loosest first: `+`, then `//` `||` `|` `<<` (one level,
//! left-associative), then `;`, then the unary forms `u :: P`, `a . P` and
//! `<items> . P`, then atoms and function forms.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::alphabet::{Action, ActionId};
use crate::term::{LinearSpec, LocWord, PrefixItem, RelabelRef, SetRef, Summand, Term};

/// A position in the source text (1-based line and column).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
    pub offset: usize,
}

/// A half-open region of the source text.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: Pos,
    pub end: Pos,
}

/// A parse diagnostic.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    /// Renders as `file:line:col: message`.
    pub fn render(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.span.start.line, self.span.start.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u32),
    ColonColon,
    Dot,
    Semi,
    Plus,
    SlashSlash,
    BarBar,
    Bar,
    LtLt,
    Lt,
    Gt,
    Comma,
    LParen,
    RParen,
    LBrace,
    RBrace,
    At,
    Eq,
    Arrow,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Int(n) => return write!(f, "`{n}`"),
            Tok::ColonColon => "`::`",
            Tok::Dot => "`.`",
            Tok::Semi => "`;`",
            Tok::Plus => "`+`",
            Tok::SlashSlash => "`//`",
            Tok::BarBar => "`||`",
            Tok::Bar => "`|`",
            Tok::LtLt => "`<<`",
            Tok::Lt => "`<`",
            Tok::Gt => "`>`",
            Tok::Comma => "`,`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::At => "`@`",
            Tok::Eq => "`=`",
            Tok::Arrow => "`->`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: SourceSpan,
}

const KEYWORDS: &[&str] = &["tau", "d", "eps", "theta", "unless", "encap", "hide", "pi", "restrict", "relabel", "spec"];

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    let pos_at = |offset: usize, line: usize, col: usize| Pos { line, col, offset };
    while i < chars.len() {
        let (off, c) = chars[i];
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
        if c == '#' {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        let start = pos_at(off, line, col);
        let next = chars.get(i + 1).map(|p| p.1);
        let (tok, len) = if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].1.is_ascii_alphanumeric() || chars[j].1 == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().map(|p| p.1).collect();
            (Tok::Ident(word), j - i)
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].1.is_ascii_digit() {
                j += 1;
            }
            let word: String = chars[i..j].iter().map(|p| p.1).collect();
            let n = word.parse::<u32>().map_err(|_| ParseError {
                span: SourceSpan { start, end: start },
                message: format!("number `{word}` is too large"),
                expected: vec![],
            })?;
            (Tok::Int(n), j - i)
        } else {
            match (c, next) {
                (':', Some(':')) => (Tok::ColonColon, 2),
                ('/', Some('/')) => (Tok::SlashSlash, 2),
                ('|', Some('|')) => (Tok::BarBar, 2),
                ('<', Some('<')) => (Tok::LtLt, 2),
                ('-', Some('>')) => (Tok::Arrow, 2),
                ('|', _) => (Tok::Bar, 1),
                ('<', _) => (Tok::Lt, 1),
                ('>', _) => (Tok::Gt, 1),
                ('.', _) => (Tok::Dot, 1),
                (';', _) => (Tok::Semi, 1),
                ('+', _) => (Tok::Plus, 1),
                (',', _) => (Tok::Comma, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                ('@', _) => (Tok::At, 1),
                ('=', _) => (Tok::Eq, 1),
                _ => {
                    return Err(ParseError {
                        span: SourceSpan { start, end: start },
                        message: format!("unexpected character `{c}`"),
                        expected: vec![],
                    })
                }
            }
        };
        i += len;
        col += len;
        let end_off = chars.get(i).map(|p| p.0).unwrap_or(src.len());
        out.push(Token { tok, span: SourceSpan { start, end: pos_at(end_off, line, col) } });
    }
    let end = pos_at(src.len(), line, col);
    out.push(Token { tok: Tok::Eof, span: SourceSpan { start: end, end } });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

fn is_action_name(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_lowercase()) && !KEYWORDS.contains(&s)
}

fn is_const_name(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_uppercase())
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let found = self.peek();
        ParseError {
            span: self.span(),
            message: format!("unexpected {found}"),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.error(&[&tok.to_string()]))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Term, ParseError> {
        let mut t = self.par()?;
        while self.eat(&Tok::Plus) {
            let r = self.par()?;
            t = Term::alt(t, r);
        }
        Ok(t)
    }

    fn par(&mut self) -> Result<Term, ParseError> {
        let mut t = self.seq()?;
        loop {
            let op = self.peek().clone();
            let build: fn(Term, Term) -> Term = match op {
                Tok::SlashSlash => Term::par,
                Tok::BarBar => Term::merge,
                Tok::Bar => Term::comm,
                Tok::LtLt => Term::left_merge,
                _ => return Ok(t),
            };
            self.bump();
            let r = self.seq()?;
            t = build(t, r);
        }
    }

    fn seq(&mut self) -> Result<Term, ParseError> {
        let mut t = self.unary()?;
        while self.eat(&Tok::Semi) {
            let r = self.unary()?;
            t = Term::seq(t, r);
        }
        Ok(t)
    }

    // Length of an `ident(.ident)*` run at the cursor that is followed by
    // `::`, if any.
    fn locword_ahead(&self) -> Option<usize> {
        let mut k = 0;
        loop {
            match self.peek_at(k) {
                Tok::Ident(_) => k += 1,
                _ => return None,
            }
            match self.peek_at(k) {
                Tok::ColonColon => return Some(k),
                Tok::Dot => k += 1,
                _ => return None,
            }
        }
    }

    fn locword(&mut self) -> Result<LocWord, ParseError> {
        let mut names = Vec::new();
        loop {
            let span = self.span();
            match self.bump().tok {
                Tok::Ident(s) if s == "eps" => {}
                Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => {
                    return Err(ParseError {
                        span,
                        message: format!("`{s}` cannot be used as a location name"),
                        expected: vec!["location name".into()],
                    })
                }
                Tok::Ident(s) => names.push(s),
                _ => unreachable!("locword_ahead checked the shape"),
            }
            if !self.eat(&Tok::Dot) {
                break;
            }
        }
        Ok(LocWord::from_names(names.iter().map(String::as_str)))
    }

    fn unary(&mut self) -> Result<Term, ParseError> {
        if self.locword_ahead().is_some() {
            let u = self.locword()?;
            self.expect(Tok::ColonColon)?;
            let body = self.unary()?;
            return Ok(Term::loc(u, body));
        }
        match self.peek().clone() {
            Tok::Ident(s) if (is_action_name(&s) || s == "tau") && *self.peek_at(1) == Tok::Dot => {
                self.bump();
                self.bump();
                let action = if s == "tau" { ActionId::Tau } else { ActionId::visible(&s) };
                let body = self.unary()?;
                Ok(Term::prefix(vec![PrefixItem::new(LocWord::epsilon(), action)], body))
            }
            Tok::Lt => {
                let items = self.items()?;
                self.expect(Tok::Dot)?;
                let body = self.unary()?;
                Ok(Term::prefix(items, body))
            }
            _ => self.primary(),
        }
    }

    /// `< item (, item)* >`; `//` is accepted as a separator too.
    fn items(&mut self) -> Result<Vec<PrefixItem>, ParseError> {
        self.expect(Tok::Lt)?;
        let mut items = vec![self.item()?];
        while matches!(self.peek(), Tok::Comma | Tok::SlashSlash) {
            self.bump();
            items.push(self.item()?);
        }
        self.expect(Tok::Gt)?;
        Ok(items)
    }

    fn item(&mut self) -> Result<PrefixItem, ParseError> {
        let at = if self.locword_ahead().is_some() {
            let u = self.locword()?;
            self.expect(Tok::ColonColon)?;
            u
        } else {
            LocWord::epsilon()
        };
        match self.peek().clone() {
            Tok::Ident(s) if s == "tau" => {
                self.bump();
                Ok(PrefixItem::new(at, ActionId::Tau))
            }
            Tok::Ident(s) if is_action_name(&s) => {
                self.bump();
                Ok(PrefixItem::new(at, ActionId::visible(&s)))
            }
            _ => Err(self.error(&["action", "tau", "location word"])),
        }
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        let tok = self.peek().clone();
        match tok {
            Tok::Int(0) => {
                self.bump();
                Ok(Term::Nil)
            }
            Tok::LParen => {
                self.bump();
                let t = self.sum()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(s) => match s.as_str() {
                "d" => {
                    self.bump();
                    Ok(Term::Delta)
                }
                "tau" => {
                    self.bump();
                    Ok(Term::Tau)
                }
                "theta" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let x = self.sum()?;
                    self.expect(Tok::RParen)?;
                    Ok(Term::theta(x))
                }
                "unless" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let x = self.sum()?;
                    self.expect(Tok::Comma)?;
                    let y = self.sum()?;
                    self.expect(Tok::RParen)?;
                    Ok(Term::unless(x, y))
                }
                "encap" | "hide" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let set = self.set_ref()?;
                    self.expect(Tok::Comma)?;
                    let x = self.sum()?;
                    self.expect(Tok::RParen)?;
                    Ok(if s == "encap" { Term::Encap(set, Box::new(x)) } else { Term::Hide(set, Box::new(x)) })
                }
                "pi" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let n = match self.peek() {
                        Tok::Int(n) => *n,
                        _ => return Err(self.error(&["number"])),
                    };
                    self.bump();
                    self.expect(Tok::Comma)?;
                    let x = self.sum()?;
                    self.expect(Tok::RParen)?;
                    Ok(Term::Proj(n, Box::new(x)))
                }
                "restrict" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let set = self.set_literal()?;
                    self.expect(Tok::Comma)?;
                    let x = self.sum()?;
                    self.expect(Tok::RParen)?;
                    Ok(Term::Restrict(set, Box::new(x)))
                }
                "relabel" => {
                    self.bump();
                    self.expect(Tok::LParen)?;
                    let f = self.relabel_ref()?;
                    self.expect(Tok::Comma)?;
                    let x = self.sum()?;
                    self.expect(Tok::RParen)?;
                    Ok(Term::Relabel(f, Box::new(x)))
                }
                "eps" | "spec" => Err(self.error(&["term"])),
                _ if is_const_name(&s) => {
                    self.bump();
                    if self.eat(&Tok::At) {
                        match self.bump().tok {
                            Tok::Ident(e) => Ok(Term::Var(s, e)),
                            _ => {
                                self.pos -= 1;
                                Err(self.error(&["specification name"]))
                            }
                        }
                    } else {
                        Ok(Term::Const(s))
                    }
                }
                _ => {
                    self.bump();
                    Ok(Term::Act(Action::new(&s)))
                }
            },
            _ => Err(self.error(&["term", "`(`", "action", "`0`", "`d`", "`tau`", "`<`"])),
        }
    }

    fn action_name(&mut self) -> Result<Action, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if is_action_name(&s) => {
                self.bump();
                Ok(Action::new(&s))
            }
            _ => Err(self.error(&["action"])),
        }
    }

    fn set_literal(&mut self) -> Result<BTreeSet<Action>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut set = BTreeSet::new();
        if !self.eat(&Tok::RBrace) {
            set.insert(self.action_name()?);
            while self.eat(&Tok::Comma) {
                set.insert(self.action_name()?);
            }
            self.expect(Tok::RBrace)?;
        }
        Ok(set)
    }

    fn set_ref(&mut self) -> Result<SetRef, ParseError> {
        match self.peek().clone() {
            Tok::LBrace => Ok(SetRef::Literal(self.set_literal()?)),
            Tok::Ident(s) => {
                self.bump();
                Ok(SetRef::Named(s))
            }
            _ => Err(self.error(&["set name", "`{`"])),
        }
    }

    fn relabel_ref(&mut self) -> Result<RelabelRef, ParseError> {
        match self.peek().clone() {
            Tok::LBrace => {
                self.bump();
                let mut pairs = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        let a = self.action_name()?;
                        self.expect(Tok::Arrow)?;
                        let b = self.action_name()?;
                        pairs.push((a, b));
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                    self.expect(Tok::RBrace)?;
                }
                Ok(RelabelRef::Literal(pairs))
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(RelabelRef::Named(s))
            }
            _ => Err(self.error(&["relabelling name", "`{`"])),
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.error(&["end of input", "operator"]))
        }
    }

    fn spec(&mut self) -> Result<LinearSpec, ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == "spec" => {
                self.bump();
            }
            _ => return Err(self.error(&["`spec`"])),
        }
        let name = match self.peek().clone() {
            Tok::Ident(s) if is_const_name(&s) => {
                self.bump();
                s
            }
            _ => return Err(self.error(&["specification name"])),
        };
        self.expect(Tok::LBrace)?;
        let mut equations: Vec<(String, Vec<Summand>)> = Vec::new();
        let mut targets: Vec<(String, SourceSpan)> = Vec::new();
        while *self.peek() != Tok::RBrace {
            let span = self.span();
            let var = match self.peek().clone() {
                Tok::Ident(s) if is_const_name(&s) => {
                    self.bump();
                    s
                }
                _ => return Err(self.error(&["variable", "`}`"])),
            };
            if equations.iter().any(|(v, _)| *v == var) {
                return Err(ParseError { span, message: format!("variable `{var}` defined twice"), expected: vec![] });
            }
            self.expect(Tok::Eq)?;
            let mut summands = Vec::new();
            loop {
                let span = self.span();
                if let Some(s) = self.summand(&name)? {
                    if let Some(t) = &s.target {
                        targets.push((t.clone(), span));
                    }
                    summands.push(s);
                }
                if !self.eat(&Tok::Plus) {
                    break;
                }
            }
            summands.sort();
            summands.dedup();
            equations.push((var, summands));
            if !self.eat(&Tok::Semi) && *self.peek() != Tok::RBrace {
                return Err(self.error(&["`;`", "`}`", "`+`"]));
            }
        }
        self.expect(Tok::RBrace)?;
        for (t, span) in targets {
            if !equations.iter().any(|(v, _)| *v == t) {
                return Err(ParseError { span, message: format!("undefined variable `{t}`"), expected: vec![] });
            }
        }
        Ok(LinearSpec { name, equations })
    }

    /// One summand; `None` for an explicit deadlock summand (`d` or `0`).
    fn summand(&mut self, spec: &str) -> Result<Option<Summand>, ParseError> {
        let start = self.span();
        if matches!(self.peek(), Tok::Int(0)) || matches!(self.peek(), Tok::Ident(s) if s == "d") {
            self.bump();
            return Ok(None);
        }
        if *self.peek() == Tok::Lt {
            let items = self.items()?;
            let target = if self.eat(&Tok::Dot) { Some(self.target(spec)?) } else { None };
            return Ok(Some(Summand::new(items, target)));
        }
        // `;` separates equations here, so summands are unary terms joined
        // by `//` or `<<`.
        let mut t = self.unary()?;
        loop {
            let build: fn(Term, Term) -> Term = match self.peek() {
                Tok::SlashSlash => Term::par,
                Tok::LtLt => Term::left_merge,
                _ => break,
            };
            self.bump();
            let r = self.unary()?;
            t = build(t, r);
        }
        let mut span = start;
        span.end = self.span().start;
        let not_linear = |t: &Term| ParseError {
            span,
            message: format!("summand not linear: `{}`", print_term(t)),
            expected: vec![],
        };
        if self.eat(&Tok::Dot) {
            let target = self.target(spec)?;
            let items = term_items(&t).ok_or_else(|| not_linear(&t))?;
            return Ok(Some(Summand::new(items, Some(target))));
        }
        summand_of_term(&t, spec).map(Some).ok_or_else(|| not_linear(&t))
    }

    fn target(&mut self, spec: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if is_const_name(&s) => {
                self.bump();
                if self.eat(&Tok::At) {
                    let span = self.span();
                    match self.bump().tok {
                        Tok::Ident(e) if e == spec => {}
                        _ => {
                            return Err(ParseError {
                                span,
                                message: format!("summand not linear: target must be a variable of `{spec}`"),
                                expected: vec![spec.to_string()],
                            })
                        }
                    }
                }
                Ok(s)
            }
            _ => Err(ParseError {
                span: self.span(),
                message: "summand not linear: expected a variable after `.`".into(),
                expected: vec!["variable".into()],
            }),
        }
    }
}

// Located atoms joined by `//` or `<<`.
fn term_items(t: &Term) -> Option<Vec<PrefixItem>> {
    match t {
        Term::Act(a) => Some(vec![PrefixItem::new(LocWord::epsilon(), ActionId::Visible(a.clone()))]),
        Term::Tau => Some(vec![PrefixItem::new(LocWord::epsilon(), ActionId::Tau)]),
        Term::Loc(u, inner) => {
            let items = term_items(inner)?;
            Some(items.into_iter().map(|it| PrefixItem::new(u.concat(&it.at), it.action)).collect())
        }
        Term::Par(x, y) | Term::LeftMerge(x, y) => {
            let mut items = term_items(x)?;
            items.extend(term_items(y)?);
            Some(items)
        }
        _ => None,
    }
}

fn summand_of_term(t: &Term, spec: &str) -> Option<Summand> {
    let is_var = |body: &Term| match body {
        Term::Const(v) => Some(v.clone()),
        Term::Var(v, e) if e == spec => Some(v.clone()),
        _ => None,
    };
    match t {
        Term::Prefix(items, body) => Some(Summand::new(items.clone(), Some(is_var(body)?))),
        Term::Loc(u, inner) if matches!(**inner, Term::Prefix(..)) => {
            let s = summand_of_term(inner, spec)?;
            let items = s.items.into_iter().map(|it| PrefixItem::new(u.concat(&it.at), it.action)).collect();
            Some(Summand::new(items, s.target))
        }
        _ => Some(Summand::new(term_items(t)?, None)),
    }
}

/// Parses a term.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(src)?;
    let t = p.sum()?;
    p.end()?;
    Ok(t)
}

/// Parses exactly one linear specification.
pub fn parse_spec(src: &str) -> Result<LinearSpec, ParseError> {
    let mut p = Parser::new(src)?;
    let s = p.spec()?;
    p.end()?;
    Ok(s)
}

/// Parses a file holding any number of specifications.
pub fn parse_specs(src: &str) -> Result<Vec<LinearSpec>, ParseError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    while *p.peek() != Tok::Eof {
        out.push(p.spec()?);
    }
    Ok(out)
}

// Binding levels used by the printer.
const SUM: u8 = 0;
const PAR: u8 = 1;
const SEQ: u8 = 2;
const UNARY: u8 = 3;
const ATOM: u8 = 4;

fn level(t: &Term) -> u8 {
    match t {
        Term::Alt(..) => SUM,
        Term::Par(..) | Term::Merge(..) | Term::Comm(..) | Term::LeftMerge(..) => PAR,
        Term::Seq(..) => SEQ,
        Term::Loc(..) | Term::Prefix(..) => UNARY,
        _ => ATOM,
    }
}

/// Renders a term with the fewest parentheses that parse back to it.
pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    write_term(&mut out, t, SUM);
    out
}

fn write_term(out: &mut String, t: &Term, min: u8) {
    let paren = level(t) < min;
    if paren {
        out.push('(');
    }
    let bin = |out: &mut String, x: &Term, op: &str, y: &Term, lvl: u8| {
        write_term(out, x, lvl);
        out.push_str(op);
        write_term(out, y, lvl + 1);
    };
    match t {
        Term::Nil => out.push('0'),
        Term::Delta => out.push('d'),
        Term::Tau => out.push_str("tau"),
        Term::Act(a) => out.push_str(a.as_str()),
        Term::Const(n) => out.push_str(n),
        Term::Var(x, e) => {
            out.push_str(x);
            out.push('@');
            out.push_str(e);
        }
        Term::Alt(x, y) => bin(out, x, " + ", y, SUM),
        Term::Par(x, y) => bin(out, x, " // ", y, PAR),
        Term::Merge(x, y) => bin(out, x, " || ", y, PAR),
        Term::Comm(x, y) => bin(out, x, " | ", y, PAR),
        Term::LeftMerge(x, y) => bin(out, x, " << ", y, PAR),
        Term::Seq(x, y) => bin(out, x, " ; ", y, SEQ),
        Term::Loc(u, x) => {
            out.push_str(&u.to_string());
            out.push_str(" :: ");
            write_term(out, x, UNARY);
        }
        Term::Prefix(items, body) => {
            match items.as_slice() {
                [single] if single.at.is_empty() => out.push_str(&single.action.to_string()),
                _ => {
                    out.push('<');
                    out.push_str(&items.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", "));
                    out.push('>');
                }
            }
            out.push_str(" . ");
            // `a . l1 :: p` would read back with `a.l1` as a location word.
            if matches!(**body, Term::Loc(..)) {
                out.push('(');
                write_term(out, body, SUM);
                out.push(')');
            } else {
                write_term(out, body, UNARY);
            }
        }
        Term::Theta(x) => {
            out.push_str("theta(");
            write_term(out, x, SUM);
            out.push(')');
        }
        Term::Unless(x, y) => {
            out.push_str("unless(");
            write_term(out, x, SUM);
            out.push_str(", ");
            write_term(out, y, SUM);
            out.push(')');
        }
        Term::Encap(h, x) | Term::Hide(h, x) => {
            out.push_str(if matches!(t, Term::Encap(..)) { "encap(" } else { "hide(" });
            match h {
                SetRef::Named(n) => out.push_str(n),
                SetRef::Literal(s) => out.push_str(&set_literal(s)),
            }
            out.push_str(", ");
            write_term(out, x, SUM);
            out.push(')');
        }
        Term::Proj(n, x) => {
            out.push_str(&format!("pi({n}, "));
            write_term(out, x, SUM);
            out.push(')');
        }
        Term::Restrict(l, x) => {
            out.push_str("restrict(");
            out.push_str(&set_literal(l));
            out.push_str(", ");
            write_term(out, x, SUM);
            out.push(')');
        }
        Term::Relabel(f, x) => {
            out.push_str("relabel(");
            match f {
                RelabelRef::Named(n) => out.push_str(n),
                RelabelRef::Literal(pairs) => {
                    let body: Vec<_> = pairs.iter().map(|(a, b)| format!("{a} -> {b}")).collect();
                    out.push_str(&format!("{{{}}}", body.join(", ")));
                }
            }
            out.push_str(", ");
            write_term(out, x, SUM);
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

fn set_literal(s: &BTreeSet<Action>) -> String {
    format!("{{{}}}", s.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", "))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_term(self))
    }
}

/// Renders a summand as it would appear in a specification.
pub fn print_summand(s: &Summand) -> String {
    let items: Vec<_> = s.items.iter().map(|i| i.to_string()).collect();
    match &s.target {
        Some(t) => format!("<{}> . {t}", items.join(", ")),
        None if items.len() == 1 => items[0].clone(),
        None => format!("<{}>", items.join(", ")),
    }
}

/// Renders a specification in the accepted concrete syntax.
pub fn print_spec(spec: &LinearSpec) -> String {
    let mut out = format!("spec {} {{", spec.name);
    for (var, summands) in &spec.equations {
        let rhs = if summands.is_empty() {
            "d".to_string()
        } else {
            summands.iter().map(print_summand).collect::<Vec<_>>().join(" + ")
        };
        out.push_str(&format!(" {var} = {rhs} ;"));
    }
    out.push_str(" }");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Term {
        parse_term(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    fn w(s: &str) -> LocWord {
        LocWord::from_names(s.split('.'))
    }

    #[test]
    fn loc_binds_tighter_than_seq() {
        let expect = Term::seq(Term::loc(w("l1"), Term::act("a")), Term::alt(Term::act("b"), Term::act("c")));
        assert_eq!(p("l1 :: a ; (b + c)"), expect);
    }

    #[test]
    fn multi_prefix_over_constant() {
        let items = vec![
            PrefixItem::new(LocWord::epsilon(), ActionId::visible("a")),
            PrefixItem::new(LocWord::epsilon(), ActionId::visible("b")),
        ];
        assert_eq!(p("<a, b> . P"), Term::prefix(items, Term::Const("P".into())));
    }

    #[test]
    fn incomplete_input_reports_end() {
        let err = parse_term("x +").unwrap_err();
        assert_eq!(err.span.start.col, 4);
        assert!(err.message.contains("end of input"));
        assert!(!err.expected.is_empty());
        assert!(err.render("f.lp").starts_with("f.lp:1:4: "));
    }

    #[test]
    fn printer_examples() {
        assert_eq!(print_term(&Term::alt(Term::act("a"), Term::seq(Term::act("b"), Term::act("c")))), "a + b ; c");
        assert_eq!(print_term(&Term::loc(w("l1.l2"), Term::act("a"))), "l1.l2 :: a");
        let t = Term::Encap(SetRef::Named("H".into()), Box::new(Term::par(Term::act("a"), Term::act("b"))));
        assert_eq!(print_term(&t), "encap(H, a // b)");
    }

    #[test]
    fn associativity_and_parens() {
        assert_eq!(p("a ; b ; c"), Term::seq(Term::seq(Term::act("a"), Term::act("b")), Term::act("c")));
        assert_eq!(print_term(&p("a ; (b ; c)")), "a ; (b ; c)");
        assert_eq!(print_term(&p("a // (b || c) << d")), "a // (b || c) << d");
        assert_eq!(print_term(&p("l1 :: (a ; b)")), "l1 :: (a ; b)");
        assert_eq!(p("l1 :: l2 :: a"), Term::loc(w("l1.l2"), Term::act("a")));
        assert_eq!(print_term(&p("a . b . 0 + tau . 0")), "a . b . 0 + tau . 0");
        assert_eq!(print_term(&p("<l1::a, tau> . 0")), "<tau, l1 :: a> . 0");
    }

    #[test]
    fn function_forms_round_trip() {
        for src in [
            "theta(a + b)",
            "unless(a, b ; c)",
            "hide({a, b}, a // b)",
            "pi(3, X@E)",
            "restrict({a}, a . 0 // b . 0)",
            "relabel(f, a . 0)",
            "relabel({a -> b}, a . 0)",
            "encap({}, d)",
        ] {
            assert_eq!(print_term(&p(src)), src);
        }
    }

    #[test]
    fn parses_linear_specs() {
        let s = parse_spec("spec E { X = <a>.X + b }").unwrap();
        assert_eq!(s.equations.len(), 1);
        let summands = s.summands("X").unwrap();
        assert_eq!(summands.len(), 2);
        assert!(summands.iter().any(|s| s.target.as_deref() == Some("X")));
        assert!(summands.iter().any(|s| s.target.is_none()));
        let s = parse_spec("spec E { X = <l1::a // l2::b> . Y + c ; Y = d ; }").unwrap();
        assert!(s.summands("X").unwrap().iter().any(|s| s.items.len() == 2 && s.target.as_deref() == Some("Y")));
        assert!(s.summands("Y").unwrap().is_empty());
        assert_eq!(parse_spec(&print_spec(&s)).unwrap(), s);
        assert!(parse_spec("spec E { X = <tau>.X }").is_ok());
    }

    #[test]
    fn rejects_nonlinear_summands() {
        let err = parse_spec("spec E { X = (a;b).X }").unwrap_err();
        assert!(err.message.contains("summand not linear"), "{err}");
        let err = parse_spec("spec E { X = a . (X + X) }").unwrap_err();
        assert!(err.message.contains("summand not linear"), "{err}");
        let err = parse_spec("spec E { X = a . Y }").unwrap_err();
        assert!(err.message.contains("undefined variable"), "{err}");
    }

    #[test]
    fn reserved_words() {
        assert!(parse_term("eps").is_err());
        assert_eq!(p("eps :: a"), Term::act("a"));
        assert!(parse_term("a $ b").is_err());
    }
}

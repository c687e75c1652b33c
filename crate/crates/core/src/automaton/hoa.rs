//! Reader and writer for the HOA v1 interchange format, restricted to
//! generalized Büchi acceptance with explicit labels.

use std::fmt::Write as _;

use crate::automaton::gba::Gba;
use crate::automaton::guard::Guard;
use crate::error::{Error, Result};

/// An automaton as written in a HOA file, before acceptance marks are moved
/// onto states.
#[derive(Debug, Clone, PartialEq)]
pub struct HoaAutomaton {
    pub name: Option<String>,
    pub aps: Vec<String>,
    pub start: usize,
    pub num_sets: usize,
    pub states: Vec<HoaState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoaState {
    pub id: usize,
    pub name: Option<String>,
    pub marks: Vec<usize>,
    pub edges: Vec<HoaEdge>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoaEdge {
    pub guard: Guard,
    pub target: usize,
    pub marks: Vec<usize>,
}

impl HoaAutomaton {
    /// Whether any acceptance mark sits on an edge.
    pub fn has_edge_marks(&self) -> bool {
        self.states.iter().any(|s| s.edges.iter().any(|e| !e.marks.is_empty()))
    }

    /// Re-expresses the automaton over `props`, which must contain every AP
    /// it mentions. Propositions absent from the automaton are unconstrained.
    pub fn with_props(&self, props: &[String]) -> Result<Self> {
        let mut map = Vec::with_capacity(self.aps.len());
        for ap in &self.aps {
            match props.iter().position(|p| p == ap) {
                Some(i) => map.push(i),
                None => return Err(Error::ApMismatch(format!("automaton proposition {ap:?} is not declared"))),
            }
        }
        let f = |i: usize| map[i];
        let mut out = self.clone();
        out.aps = props.to_vec();
        for s in &mut out.states {
            for e in &mut s.edges {
                e.guard = e.guard.map_atoms(&f);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Header(String),
    Ident(String),
    Int(usize),
    Str(String),
    Guard(String),
    Punct(char),
    Body,
    End,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax { line, column, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col, '/');
            advance(&mut i, &mut line, &mut col, '*');
            loop {
                if i >= chars.len() {
                    return Err(syntax(l0, c0, "unterminated comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    advance(&mut i, &mut line, &mut col, '*');
                    advance(&mut i, &mut line, &mut col, '/');
                    break;
                }
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
        } else if c == '"' {
            advance(&mut i, &mut line, &mut col, c);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(syntax(l0, c0, "unterminated string")),
                    Some('"') => {
                        advance(&mut i, &mut line, &mut col, '"');
                        break;
                    }
                    Some('\\') => {
                        advance(&mut i, &mut line, &mut col, '\\');
                        if let Some(&e) = chars.get(i) {
                            s.push(e);
                            advance(&mut i, &mut line, &mut col, e);
                        }
                    }
                    Some(&x) => {
                        s.push(x);
                        advance(&mut i, &mut line, &mut col, x);
                    }
                }
            }
            out.push(Spanned { tok: Tok::Str(s), line: l0, column: c0 });
        } else if c == '[' {
            advance(&mut i, &mut line, &mut col, c);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(syntax(l0, c0, "unterminated label")),
                    Some(']') => {
                        advance(&mut i, &mut line, &mut col, ']');
                        break;
                    }
                    Some(&x) => {
                        s.push(x);
                        advance(&mut i, &mut line, &mut col, x);
                    }
                }
            }
            out.push(Spanned { tok: Tok::Guard(s), line: l0, column: c0 });
        } else if c == '-' && chars[i..].starts_with(&['-', '-']) {
            let word: String = chars[i..].iter().take_while(|x| !x.is_whitespace()).collect();
            let tok = match word.as_str() {
                "--BODY--" => Tok::Body,
                "--END--" => Tok::End,
                "--ABORT--" => return Err(syntax(l0, c0, "automaton aborted")),
                _ => return Err(syntax(l0, c0, format!("unknown separator `{word}`"))),
            };
            for x in word.chars() {
                advance(&mut i, &mut line, &mut col, x);
            }
            out.push(Spanned { tok, line: l0, column: c0 });
        } else if c.is_ascii_digit() {
            let mut n = 0usize;
            while let Some(d) = chars.get(i).and_then(|x| x.to_digit(10)) {
                n = n * 10 + d as usize;
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            out.push(Spanned { tok: Tok::Int(n), line: l0, column: c0 });
        } else if c.is_ascii_alphabetic() || c == '_' || c == '@' {
            let mut s = String::new();
            while let Some(&x) = chars.get(i) {
                if x.is_ascii_alphanumeric() || x == '_' || x == '-' || x == '@' || x == '.' {
                    s.push(x);
                    advance(&mut i, &mut line, &mut col, x);
                } else {
                    break;
                }
            }
            if chars.get(i) == Some(&':') {
                advance(&mut i, &mut line, &mut col, ':');
                out.push(Spanned { tok: Tok::Header(s), line: l0, column: c0 });
            } else {
                out.push(Spanned { tok: Tok::Ident(s), line: l0, column: c0 });
            }
        } else if "{}()!&|".contains(c) {
            advance(&mut i, &mut line, &mut col, c);
            out.push(Spanned { tok: Tok::Punct(c), line: l0, column: c0 });
        } else {
            return Err(syntax(l0, c0, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|s| (s.line, s.column)).unwrap_or(self.eof)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        let (l, c) = self.here();
        syntax(l, c, message)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn int(&mut self, what: &str) -> Result<usize> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.err(format!("expected integer for {what}"))),
        }
    }

    fn at_item_boundary(&self) -> bool {
        matches!(self.peek(), None | Some(Tok::Header(_)) | Some(Tok::Body))
    }

    fn marks(&mut self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::Punct('{')) {
            self.pos += 1;
            loop {
                match self.next() {
                    Some(Tok::Int(n)) => out.push(n),
                    Some(Tok::Punct('}')) => break,
                    _ => {
                        self.pos -= 1;
                        return Err(self.err("expected acceptance set index or '}'"));
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }
}

/// Reads the acceptance formula and returns the number of sets if it is a
/// conjunction `Inf(0)&...&Inf(k-1)`.
fn parse_acceptance(p: &mut Parser, k: usize) -> Result<usize> {
    let mut text = String::new();
    let mut infs = Vec::new();
    let mut other = false;
    while !p.at_item_boundary() {
        match p.next().expect("not at boundary") {
            Tok::Ident(id) if id == "Inf" => {
                let open = p.next();
                let idx = p.int("Inf set")?;
                let close = p.next();
                if open != Some(Tok::Punct('(')) || close != Some(Tok::Punct(')')) {
                    return Err(p.err("malformed Inf(..) term"));
                }
                infs.push(idx);
                write!(text, "Inf({idx})").ok();
            }
            Tok::Punct('&') => text.push('&'),
            Tok::Punct(c) => {
                other = other || c != '(' && c != ')';
                text.push(c);
            }
            Tok::Ident(id) => {
                other = true;
                text.push_str(&id);
            }
            Tok::Int(n) => {
                other = true;
                write!(text, "{n}").ok();
            }
            _ => return Err(p.err("unexpected token in acceptance condition")),
        }
    }
    let mut sorted = infs.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if other || k == 0 || sorted != (0..k).collect::<Vec<_>>() {
        return Err(Error::UnsupportedAcceptance(format!("{k} {text}")));
    }
    Ok(k)
}

impl HoaAutomaton {
    pub fn parse(text: &str) -> Result<Self> {
        let toks = lex(text)?;
        let lines = text.lines().count().max(1);
        let mut p = Parser { toks, pos: 0, eof: (lines, 1) };

        match (p.next(), p.next()) {
            (Some(Tok::Header(h)), Some(Tok::Ident(v))) if h == "HOA" && v == "v1" => {}
            _ => {
                p.pos = 0;
                return Err(p.err("expected `HOA: v1`"));
            }
        }

        let mut name = None;
        let mut declared_states = None;
        let mut start = None;
        let mut aps: Option<Vec<String>> = None;
        let mut num_sets = None;
        loop {
            match p.next() {
                Some(Tok::Body) => break,
                Some(Tok::Header(h)) => match h.as_str() {
                    "States" => declared_states = Some(p.int("States")?),
                    "Start" => {
                        if start.is_some() {
                            return Err(p.err("multiple initial states are not supported"));
                        }
                        start = Some(p.int("Start")?);
                        if p.peek() == Some(&Tok::Punct('&')) {
                            return Err(p.err("alternating initial states are not supported"));
                        }
                    }
                    "AP" => {
                        let n = p.int("AP count")?;
                        let mut names = Vec::new();
                        while let Some(Tok::Str(s)) = p.peek() {
                            names.push(s.clone());
                            p.pos += 1;
                        }
                        if names.len() != n {
                            return Err(Error::ApMismatch(format!(
                                "AP header declares {n} propositions but lists {}",
                                names.len()
                            )));
                        }
                        aps = Some(names);
                    }
                    "Acceptance" => {
                        let k = p.int("Acceptance set count")?;
                        num_sets = Some(parse_acceptance(&mut p, k)?);
                    }
                    "acc-name" => {
                        if let Some(Tok::Ident(n)) = p.peek() {
                            let n = n.clone();
                            if !matches!(n.as_str(), "generalized-Buchi" | "Buchi" | "all") {
                                return Err(Error::UnsupportedAcceptance(n));
                            }
                        }
                        while !p.at_item_boundary() {
                            p.pos += 1;
                        }
                    }
                    "name" => {
                        if let Some(Tok::Str(s)) = p.peek() {
                            name = Some(s.clone());
                            p.pos += 1;
                        }
                    }
                    _ => {
                        while !p.at_item_boundary() {
                            p.pos += 1;
                        }
                    }
                },
                None => return Err(p.err("missing --BODY--")),
                Some(_) => {
                    p.pos -= 1;
                    return Err(p.err("expected a header item"));
                }
            }
        }
        let num_sets = num_sets.ok_or_else(|| p.err("missing `Acceptance:` header"))?;
        let start = start.ok_or_else(|| p.err("missing `Start:` header"))?;
        let aps = aps.unwrap_or_default();

        let mut states: Vec<HoaState> = Vec::new();
        loop {
            match p.next() {
                Some(Tok::End) => break,
                Some(Tok::Header(h)) if h == "State" => {
                    if matches!(p.peek(), Some(Tok::Guard(_))) {
                        return Err(p.err("state labels are not supported"));
                    }
                    let id = p.int("state id")?;
                    let sname = match p.peek() {
                        Some(Tok::Str(s)) => {
                            let s = s.clone();
                            p.pos += 1;
                            Some(s)
                        }
                        _ => None,
                    };
                    let marks = p.marks()?;
                    let mut edges = Vec::new();
                    while let Some(Tok::Guard(g)) = p.peek() {
                        let (gl, gc) = p.here();
                        let g = g.clone();
                        p.pos += 1;
                        let guard = Guard::parse(&g).map_err(|e| match e {
                            Error::Syntax { column, message, .. } => syntax(gl, gc + column, message),
                            other => other,
                        })?;
                        if let Some(m) = guard.max_atom() {
                            if m >= aps.len() {
                                return Err(Error::ApMismatch(format!(
                                    "guard `{g}` uses proposition {m} but only {} are declared",
                                    aps.len()
                                )));
                            }
                        }
                        let target = p.int("edge target")?;
                        if p.peek() == Some(&Tok::Punct('&')) {
                            return Err(p.err("universal branching is not supported"));
                        }
                        let marks = p.marks()?;
                        edges.push(HoaEdge { guard, target, marks });
                    }
                    if matches!(p.peek(), Some(Tok::Int(_))) {
                        return Err(p.err("implicit edge labels are not supported"));
                    }
                    states.push(HoaState { id, name: sname, marks, edges });
                }
                None => return Err(p.err("missing --END--")),
                Some(_) => {
                    p.pos -= 1;
                    return Err(p.err("expected `State:`"));
                }
            }
        }

        let n = declared_states.unwrap_or_else(|| {
            states
                .iter()
                .flat_map(|s| std::iter::once(s.id).chain(s.edges.iter().map(|e| e.target)))
                .max()
                .map_or(0, |m| m + 1)
                .max(start + 1)
        });
        let mut by_id: Vec<Option<HoaState>> = vec![None; n];
        for s in states {
            if s.id >= n {
                return Err(syntax(p.eof.0, 1, format!("state {} exceeds declared count {n}", s.id)));
            }
            if let Some(e) = s.edges.iter().find(|e| e.target >= n) {
                return Err(syntax(p.eof.0, 1, format!("edge target {} exceeds declared count {n}", e.target)));
            }
            if s.marks.iter().chain(s.edges.iter().flat_map(|e| e.marks.iter())).any(|&m| m >= num_sets) {
                return Err(Error::UnsupportedAcceptance(format!("state {} uses an undeclared set", s.id)));
            }
            let id = s.id;
            by_id[id] = Some(s);
        }
        if start >= n {
            return Err(syntax(1, 1, format!("start state {start} out of range")));
        }
        let states = by_id
            .into_iter()
            .enumerate()
            .map(|(id, s)| s.unwrap_or(HoaState { id, name: None, marks: Vec::new(), edges: Vec::new() }))
            .collect();
        Ok(HoaAutomaton { name, aps, start, num_sets, states })
    }
}

/// Parses a HOA file into a state-based generalized Büchi automaton.
pub fn parse_hoa(text: &str) -> Result<Gba> {
    Gba::from_hoa(&HoaAutomaton::parse(text)?, &[])
}

/// Writes `gba` as state-based HOA. ε-edges are not part of HOA and are
/// omitted; they belong in the scenario manifest.
pub fn emit_hoa(gba: &Gba) -> String {
    let mut out = String::new();
    let f = gba.num_sets();
    writeln!(out, "HOA: v1").ok();
    writeln!(out, "States: {}", gba.num_states()).ok();
    writeln!(out, "Start: {}", gba.initial()).ok();
    write!(out, "AP: {}", gba.props().len()).ok();
    for ap in gba.props() {
        write!(out, " \"{}\"", ap.replace('\\', "\\\\").replace('"', "\\\"")).ok();
    }
    writeln!(out).ok();
    writeln!(out, "acc-name: generalized-Buchi {f}").ok();
    let terms: Vec<String> = (0..f).map(|i| format!("Inf({i})")).collect();
    writeln!(out, "Acceptance: {f} {}", terms.join("&")).ok();
    writeln!(out, "properties: trans-labels explicit-labels state-acc").ok();
    writeln!(out, "--BODY--").ok();
    for q in 0..gba.num_states() {
        write!(out, "State: {q} \"{}\"", gba.state_name(q)).ok();
        let m = gba.membership(q);
        if m != 0 {
            let sets: Vec<String> = (0..f).filter(|i| m & (1 << i) != 0).map(|i| i.to_string()).collect();
            write!(out, " {{{}}}", sets.join(" ")).ok();
        }
        writeln!(out).ok();
        for e in gba.edges(q) {
            writeln!(out, "[{}] {}", e.guard, e.target).ok();
        }
    }
    writeln!(out, "--END--").ok();
    out
}

//! Boolean transition guards over proposition indices.

use std::fmt;

use crate::error::{Error, Result};
use crate::label::LabelSet;

/// Largest alphabet [`Guard::letters`] will enumerate.
pub const MAX_ENUMERABLE_PROPS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Guard {
    True,
    False,
    Atom(usize),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn not(g: Guard) -> Guard {
        Guard::Not(Box::new(g))
    }

    pub fn and(a: Guard, b: Guard) -> Guard {
        Guard::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Guard, b: Guard) -> Guard {
        Guard::Or(Box::new(a), Box::new(b))
    }

    /// The conjunction of literals that holds exactly on `l` over `n` propositions.
    pub fn minterm(l: LabelSet, n: usize) -> Guard {
        (0..n)
            .map(|i| if l.contains(i) { Guard::Atom(i) } else { Guard::not(Guard::Atom(i)) })
            .reduce(Guard::and)
            .unwrap_or(Guard::True)
    }

    pub fn eval(&self, l: LabelSet) -> bool {
        match self {
            Guard::True => true,
            Guard::False => false,
            Guard::Atom(i) => l.contains(*i),
            Guard::Not(g) => !g.eval(l),
            Guard::And(a, b) => a.eval(l) && b.eval(l),
            Guard::Or(a, b) => a.eval(l) || b.eval(l),
        }
    }

    /// Renames every atom through `f`.
    pub fn map_atoms(&self, f: &impl Fn(usize) -> usize) -> Guard {
        match self {
            Guard::True => Guard::True,
            Guard::False => Guard::False,
            Guard::Atom(i) => Guard::Atom(f(*i)),
            Guard::Not(g) => Guard::not(g.map_atoms(f)),
            Guard::And(a, b) => Guard::and(a.map_atoms(f), b.map_atoms(f)),
            Guard::Or(a, b) => Guard::or(a.map_atoms(f), b.map_atoms(f)),
        }
    }

    /// Largest proposition index mentioned, if any.
    pub fn max_atom(&self) -> Option<usize> {
        match self {
            Guard::True | Guard::False => None,
            Guard::Atom(i) => Some(*i),
            Guard::Not(g) => g.max_atom(),
            Guard::And(a, b) | Guard::Or(a, b) => a.max_atom().max(b.max_atom()),
        }
    }

    /// All letters over `num_props` propositions that satisfy the guard.
    pub fn letters(&self, num_props: usize) -> Result<Vec<LabelSet>> {
        if num_props > MAX_ENUMERABLE_PROPS {
            return Err(Error::AlphabetTooLarge(num_props));
        }
        Ok(LabelSet::all(num_props).filter(|l| self.eval(*l)).collect())
    }

    /// Parses the HOA label-expression syntax: `t`, `f`, integers, `!`, `&`, `|`
    /// and parentheses, with `!` binding tighter than `&`, and `&` than `|`.
    pub fn parse(text: &str) -> Result<Guard> {
        let mut p = GuardParser { chars: text.char_indices().peekable(), text };
        let g = p.or_expr()?;
        p.skip_ws();
        match p.chars.peek() {
            None => Ok(g),
            Some(&(i, c)) => Err(p.error(i, format!("unexpected '{c}' in guard"))),
        }
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn prec(g: &Guard) -> u8 {
            match g {
                Guard::Or(..) => 0,
                Guard::And(..) => 1,
                _ => 2,
            }
        }
        fn wrap(g: &Guard, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            if prec(g) < min {
                write!(f, "({g})")
            } else {
                write!(f, "{g}")
            }
        }
        match self {
            Guard::True => f.write_str("t"),
            Guard::False => f.write_str("f"),
            Guard::Atom(i) => write!(f, "{i}"),
            Guard::Not(g) => {
                f.write_str("!")?;
                wrap(g, 2, f)
            }
            Guard::And(a, b) => {
                wrap(a, 1, f)?;
                f.write_str(" & ")?;
                wrap(b, 2, f)
            }
            Guard::Or(a, b) => {
                wrap(a, 0, f)?;
                f.write_str(" | ")?;
                wrap(b, 1, f)
            }
        }
    }
}

struct GuardParser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    text: &'a str,
}

impl GuardParser<'_> {
    fn error(&self, offset: usize, message: String) -> Error {
        Error::Syntax { line: 1, column: offset + 1, message: format!("{message} in `{}`", self.text) }
    }

    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|(_, c)| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn or_expr(&mut self) -> Result<Guard> {
        let mut g = self.and_expr()?;
        loop {
            self.skip_ws();
            if self.chars.peek().is_some_and(|(_, c)| *c == '|') {
                self.chars.next();
                g = Guard::or(g, self.and_expr()?);
            } else {
                return Ok(g);
            }
        }
    }

    fn and_expr(&mut self) -> Result<Guard> {
        let mut g = self.unary()?;
        loop {
            self.skip_ws();
            if self.chars.peek().is_some_and(|(_, c)| *c == '&') {
                self.chars.next();
                g = Guard::and(g, self.unary()?);
            } else {
                return Ok(g);
            }
        }
    }

    fn unary(&mut self) -> Result<Guard> {
        self.skip_ws();
        let end = self.text.len();
        match self.chars.next() {
            Some((_, '!')) => Ok(Guard::not(self.unary()?)),
            Some((_, 't')) => Ok(Guard::True),
            Some((_, 'f')) => Ok(Guard::False),
            Some((i, '(')) => {
                let g = self.or_expr()?;
                self.skip_ws();
                match self.chars.next() {
                    Some((_, ')')) => Ok(g),
                    _ => Err(self.error(i, "unbalanced parenthesis".into())),
                }
            }
            Some((_, c)) if c.is_ascii_digit() => {
                let mut n = c.to_digit(10).unwrap() as usize;
                while let Some(&(_, d)) = self.chars.peek() {
                    let Some(v) = d.to_digit(10) else { break };
                    n = n * 10 + v as usize;
                    self.chars.next();
                }
                Ok(Guard::Atom(n))
            }
            Some((i, c)) => Err(self.error(i, format!("unexpected '{c}' in guard"))),
            None => Err(self.error(end, "unexpected end of guard".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(props: &[usize]) -> LabelSet {
        LabelSet::from_props(props.iter().copied())
    }

    #[test]
    fn eval_examples() {
        let g = Guard::parse("0 & !1").unwrap();
        assert!(g.eval(l(&[0])));
        assert!(!g.eval(l(&[0, 1])));
        assert!(Guard::True.eval(l(&[3])));
    }

    #[test]
    fn letters_examples() {
        assert_eq!(Guard::Atom(0).letters(2).unwrap(), vec![l(&[0]), l(&[0, 1])]);
        assert!(Guard::False.letters(2).unwrap().is_empty());
        assert!(matches!(Guard::True.letters(21), Err(Error::AlphabetTooLarge(21))));
    }

    #[test]
    fn precedence_and_display_round_trip() {
        let g = Guard::parse("!0 & 1 | 2 & !(3 | 0)").unwrap();
        let again = Guard::parse(&g.to_string()).unwrap();
        assert_eq!(g, again);
        assert_eq!(Guard::parse("0|1&2").unwrap(), Guard::or(Guard::Atom(0), Guard::and(Guard::Atom(1), Guard::Atom(2))));
    }

    #[test]
    fn malformed_guards_fail() {
        assert!(Guard::parse("0 &").is_err());
        assert!(Guard::parse("(0 | 1").is_err());
        assert!(Guard::parse("0 1").is_err());
    }

    #[test]
    fn minterm_holds_only_on_its_letter() {
        let m = Guard::minterm(l(&[1]), 3);
        assert_eq!(m.letters(3).unwrap(), vec![l(&[1])]);
    }
}

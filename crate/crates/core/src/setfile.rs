//! Plain-text set literals.
//!
//! ```text
//! # comment
//! N 12
//! 0 3
//! 5 7
//! ```
//!
//! The header gives the modulus; each further line holds one point `k m`, or one
//! residue `k` for subsets of `Z_N`. Residues are 0-based. Text after `#` is ignored.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::zn::{GridSet, LineSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetLiteral {
    Line(LineSet),
    Grid(GridSet),
}

impl SetLiteral {
    pub fn modulus(&self) -> usize {
        match self {
            SetLiteral::Line(s) => s.modulus(),
            SetLiteral::Grid(s) => s.modulus(),
        }
    }
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn residue(token: &str, line: usize, modulus: usize) -> Result<usize> {
    let v: usize = token.parse().map_err(|_| parse_error(line, format!("'{token}' is not a nonnegative integer")))?;
    if v >= modulus {
        return Err(parse_error(line, format!("{v} lies outside [0, {modulus})")));
    }
    Ok(v)
}

/// Parses a set literal; the arity follows the first data line, and an empty body gives an empty grid set.
pub fn parse(text: &str) -> Result<SetLiteral> {
    let mut modulus = None;
    let mut singles = Vec::new();
    let mut pairs = Vec::new();
    let mut arity = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some(n) = modulus else {
            match tokens.as_slice() {
                ["N", value] => {
                    let n: usize = value.parse().map_err(|_| parse_error(line, format!("bad modulus '{value}'")))?;
                    if n == 0 {
                        return Err(parse_error(line, "modulus must be positive"));
                    }
                    modulus = Some(n);
                    continue;
                }
                _ => return Err(parse_error(line, "expected header 'N <modulus>'")),
            }
        };
        if *arity.get_or_insert(tokens.len()) != tokens.len() {
            return Err(parse_error(line, "points mix one and two coordinates"));
        }
        match tokens.as_slice() {
            [k] => singles.push(residue(k, line, n)?),
            [k, m] => pairs.push((residue(k, line, n)?, residue(m, line, n)?)),
            _ => return Err(parse_error(line, format!("expected 1 or 2 coordinates, found {}", tokens.len()))),
        }
    }
    let n = modulus.ok_or_else(|| parse_error(text.lines().count().max(1), "missing header 'N <modulus>'"))?;
    Ok(match arity {
        Some(1) => SetLiteral::Line(LineSet::new(n, singles)?),
        _ => SetLiteral::Grid(GridSet::new(n, pairs)?),
    })
}

pub fn parse_grid(text: &str) -> Result<GridSet> {
    match parse(text)? {
        SetLiteral::Grid(g) => Ok(g),
        SetLiteral::Line(_) => Err(Error::InvalidParameter("expected a set of points 'k m'".into())),
    }
}

/// A 1-D literal; an empty body gives the empty set.
pub fn parse_line(text: &str) -> Result<LineSet> {
    match parse(text)? {
        SetLiteral::Line(s) => Ok(s),
        SetLiteral::Grid(g) if g.is_empty() => Ok(LineSet::empty(g.modulus())),
        SetLiteral::Grid(_) => Err(Error::InvalidParameter("expected a set of residues 'k'".into())),
    }
}

pub fn write_grid(set: &GridSet) -> String {
    let mut out = format!("N {}\n", set.modulus());
    for (k, m) in set.iter() {
        writeln!(out, "{k} {m}").expect("writing to a string");
    }
    out
}

pub fn write_line(set: &LineSet) -> String {
    let mut out = format!("N {}\n", set.modulus());
    for k in set.iter() {
        writeln!(out, "{k}").expect("writing to a string");
    }
    out
}

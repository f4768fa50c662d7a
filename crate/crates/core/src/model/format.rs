//! Line-oriented text format for parfactor models.
//!
//! ```text
//! # smokers
//! domain X = {alice, bob}
//! domain Y = {alice, bob}
//! prv Friends(X, Y)
//! prv Smokes(X)
//! parfactor psi (Friends(X,Y), Smokes(X), Smokes(Y)) | (X, Y) in {(alice, bob), (bob, alice)}
//! 0 0 0 1
//! ...
//! 1 1 1 7.39
//! ```
//!
//! A `domain` line declares a logvar and its constants. The constraint after
//! `|` is optional (`top` when omitted). Each parfactor header is followed by
//! `2^n` potential lines in canonical row order; for `n = 0` the single line
//! holds only the potential.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::{Constraint, Logvar, Parfactor, ParfactorModel, Prv, Tuples};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Word(String),
    Sym(char),
}

pub(crate) fn tokenize(line: usize, s: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let mut chars = s.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if "(){},=|:!^".contains(c) {
            out.push(Tok::Sym(c));
            chars.next();
        } else if c.is_alphanumeric() || "_.-+".contains(c) {
            let mut w = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_alphanumeric() || "_.-+".contains(c) {
                    w.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Tok::Word(w));
        } else {
            return Err(Error::parse(line, format!("unexpected character '{c}'")));
        }
    }
    Ok(out)
}

/// Cursor over the tokens of one line.
pub(crate) struct Cursor<'a> {
    pub line: usize,
    toks: &'a [Tok],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(line: usize, toks: &'a [Tok]) -> Self {
        Cursor { line, toks, pos: 0 }
    }

    pub fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn is_sym(&self, c: char) -> bool {
        self.peek() == Some(&Tok::Sym(c))
    }

    pub fn eat_sym(&mut self, c: char) -> bool {
        if self.is_sym(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("'{c}'")))
        }
    }

    pub fn word(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    pub fn ident(&mut self) -> Result<String> {
        let w = self.word()?;
        let ok = w.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
            && w.chars().all(|c| c.is_alphanumeric() || c == '_');
        if ok {
            Ok(w)
        } else {
            Err(Error::parse(self.line, format!("invalid identifier '{w}'")))
        }
    }

    pub fn unexpected(&self, wanted: &str) -> Error {
        match self.peek() {
            Some(Tok::Word(w)) => Error::parse(self.line, format!("expected {wanted}, found '{w}'")),
            Some(Tok::Sym(c)) => Error::parse(self.line, format!("expected {wanted}, found '{c}'")),
            None => Error::parse(self.line, format!("expected {wanted}, found end of line")),
        }
    }

    pub fn finish(&self) -> Result<()> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.unexpected("end of line"))
        }
    }

    /// `{a, b, c}`
    pub fn braced_names(&mut self) -> Result<Vec<String>> {
        self.expect_sym('{')?;
        let mut out = Vec::new();
        if self.eat_sym('}') {
            return Ok(out);
        }
        loop {
            out.push(self.word()?);
            if self.eat_sym('}') {
                return Ok(out);
            }
            self.expect_sym(',')?;
        }
    }

    /// `(a, b)`, possibly empty.
    pub fn paren_names(&mut self) -> Result<Vec<String>> {
        self.expect_sym('(')?;
        let mut out = Vec::new();
        if self.eat_sym(')') {
            return Ok(out);
        }
        loop {
            out.push(self.ident()?);
            if self.eat_sym(')') {
                return Ok(out);
            }
            self.expect_sym(',')?;
        }
    }

    /// Like [`Cursor::paren_names`] but accepts any word, for constants.
    pub fn paren_words(&mut self) -> Result<Vec<String>> {
        self.expect_sym('(')?;
        let mut out = Vec::new();
        if self.eat_sym(')') {
            return Ok(out);
        }
        loop {
            out.push(self.word()?);
            if self.eat_sym(')') {
                return Ok(out);
            }
            self.expect_sym(',')?;
        }
    }

    /// `Name` or `Name(L1, ..., Ln)`.
    pub fn prv(&mut self) -> Result<Prv> {
        let name = self.ident()?;
        let params = if self.is_sym('(') {
            self.paren_names()?
        } else {
            Vec::new()
        };
        Ok(Prv { name, params })
    }

    /// `top`, `X in {a, b}` or `(X, Y) in {(a, b), ...}`.
    pub fn constraint(&mut self, default_logvars: Vec<String>) -> Result<Constraint> {
        if let Some(Tok::Word(w)) = self.peek() {
            if w == "top" {
                self.pos += 1;
                return Ok(Constraint::top(default_logvars));
            }
        }
        let logvars = if self.is_sym('(') {
            self.paren_names()?
        } else {
            vec![self.ident()?]
        };
        match self.word()?.as_str() {
            "in" => {}
            other => return Err(Error::parse(self.line, format!("expected 'in', found '{other}'"))),
        }
        self.expect_sym('{')?;
        let mut tuples = BTreeSet::new();
        if !self.eat_sym('}') {
            loop {
                let t = if self.is_sym('(') {
                    self.paren_words()?
                } else {
                    vec![self.word()?]
                };
                if t.len() != logvars.len() {
                    return Err(Error::parse(
                        self.line,
                        format!("constraint tuple has {} entries, expected {}", t.len(), logvars.len()),
                    ));
                }
                tuples.insert(t);
                if self.eat_sym('}') {
                    break;
                }
                self.expect_sym(',')?;
            }
        }
        Ok(Constraint {
            logvars,
            tuples: Tuples::Explicit(tuples),
        })
    }
}

pub(crate) fn strip_comment<'a>(raw: &'a str, marker: &str) -> &'a str {
    raw.find(marker).map_or(raw, |i| &raw[..i]).trim()
}

/// Rejects a range annotation other than the Boolean `{0, 1}`.
pub(crate) fn boolean_range(cur: &mut Cursor<'_>, prv: &Prv) -> Result<()> {
    if !cur.eat_sym(':') {
        return Ok(());
    }
    let range = cur
        .braced_names()
        .map_err(|_| Error::parse(cur.line, format!("range of {prv} must be written as {{0, 1}}")))?;
    let mut sorted = range.clone();
    sorted.sort();
    if sorted != ["0", "1"] {
        return Err(Error::parse(
            cur.line,
            format!(
                "non-Boolean range {{{}}} for {prv}: only Boolean PRVs are supported",
                range.join(", ")
            ),
        ));
    }
    Ok(())
}

struct PendingParfactor {
    header_line: usize,
    name: String,
    args: Vec<Prv>,
    constraint: Constraint,
    potentials: Vec<f64>,
}

pub fn parse_model(text: &str) -> Result<ParfactorModel> {
    let mut logvars = Vec::new();
    let mut prvs = Vec::new();
    let mut parfactors = Vec::new();
    let mut pending: Option<PendingParfactor> = None;

    let close = |p: PendingParfactor| -> Result<Parfactor> {
        let expected = 1usize << p.args.len();
        if p.potentials.len() != expected {
            return Err(Error::parse(
                p.header_line,
                format!(
                    "parfactor {} needs {expected} potential lines, found {}",
                    p.name,
                    p.potentials.len()
                ),
            ));
        }
        Parfactor::with_constraint(p.name, p.args, p.potentials, p.constraint).map_err(|e| anchor(p.header_line, e))
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(raw, "#");
        if body.is_empty() {
            continue;
        }
        let keyword = body.split_whitespace().next().unwrap_or("");
        if matches!(keyword, "domain" | "prv" | "parfactor") {
            if let Some(p) = pending.take() {
                parfactors.push(close(p)?);
            }
            let toks = tokenize(line, &body[keyword.len()..])?;
            let mut cur = Cursor::new(line, &toks);
            match keyword {
                "domain" => {
                    let name = cur.ident()?;
                    cur.expect_sym('=')?;
                    let consts = cur.braced_names()?;
                    cur.finish()?;
                    logvars.push(Logvar::new(name, consts).map_err(|e| anchor(line, e))?);
                }
                "prv" => {
                    let prv = cur.prv()?;
                    boolean_range(&mut cur, &prv)?;
                    cur.finish()?;
                    prvs.push(prv);
                }
                _ => {
                    let name = cur.ident()?;
                    cur.expect_sym('(')?;
                    let mut args = Vec::new();
                    if !cur.eat_sym(')') {
                        loop {
                            args.push(cur.prv()?);
                            if cur.eat_sym(')') {
                                break;
                            }
                            cur.expect_sym(',')?;
                        }
                    }
                    let own = super::logvars_of(&args);
                    let constraint = if cur.eat_sym('|') {
                        cur.constraint(own)?
                    } else {
                        Constraint::top(own)
                    };
                    cur.finish()?;
                    pending = Some(PendingParfactor {
                        header_line: line,
                        name,
                        args,
                        constraint,
                        potentials: Vec::new(),
                    });
                }
            }
            continue;
        }

        let Some(p) = pending.as_mut() else {
            return Err(Error::parse(
                line,
                format!("unexpected '{keyword}' outside a parfactor"),
            ));
        };
        let fields: Vec<&str> = body.split_whitespace().collect();
        let n = p.args.len();
        let row = p.potentials.len();
        if row >= 1 << n {
            return Err(Error::parse(
                line,
                format!("too many potential lines for parfactor {}", p.name),
            ));
        }
        if fields.len() != n + 1 {
            return Err(Error::parse(
                line,
                format!(
                    "expected {n} argument values and a potential, found {} fields",
                    fields.len()
                ),
            ));
        }
        let expected = super::row_assignment(row, n);
        for (i, (f, want)) in fields[..n].iter().zip(expected).enumerate() {
            let v = match *f {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::parse(
                        line,
                        format!(
                            "non-Boolean value '{other}' for {}: only Boolean PRVs are supported",
                            p.args[i]
                        ),
                    ))
                }
            };
            if v != want {
                return Err(Error::parse(
                    line,
                    format!(
                        "row out of canonical order (expected row {row} of parfactor {})",
                        p.name
                    ),
                ));
            }
        }
        let pot: f64 = fields[n]
            .parse()
            .map_err(|_| Error::parse(line, format!("invalid potential '{}'", fields[n])))?;
        if !(pot.is_finite() && pot > 0.0) {
            return Err(Error::invalid(format!(
                "line {line}: potential {pot} is not strictly positive"
            )));
        }
        p.potentials.push(pot);
    }
    if let Some(p) = pending.take() {
        parfactors.push(close(p)?);
    }
    ParfactorModel::new(logvars, prvs, parfactors)
}

fn anchor(line: usize, e: Error) -> Error {
    match e {
        Error::Validation(msg) => Error::Validation(format!("line {line}: {msg}")),
        other => other,
    }
}

pub(crate) fn write_constraint(out: &mut String, c: &Constraint) {
    if let Tuples::Explicit(set) = &c.tuples {
        let tuples: Vec<String> = set.iter().map(|t| format!("({})", t.join(", "))).collect();
        let _ = write!(out, " | ({}) in {{{}}}", c.logvars.join(", "), tuples.join(", "));
    }
}

pub fn serialize_model(model: &ParfactorModel) -> String {
    let mut out = String::new();
    for lv in model.logvars().values() {
        let _ = writeln!(out, "domain {} = {{{}}}", lv.name(), lv.domain().join(", "));
    }
    for p in model.prvs().values() {
        let _ = writeln!(out, "prv {p}");
    }
    for pf in model.parfactors() {
        let args: Vec<String> = pf.args().iter().map(ToString::to_string).collect();
        let _ = write!(out, "parfactor {} ({})", pf.name(), args.join(", "));
        write_constraint(&mut out, pf.constraint());
        out.push('\n');
        for (vals, pot) in pf.enumerate_rows() {
            for v in vals {
                out.push_str(if v { "1 " } else { "0 " });
            }
            let _ = writeln!(out, "{pot}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKERS: &str = "\
# smokers
domain X = {bob, alice}
domain Y = {alice, bob}
prv Friends(X, Y)
prv Smokes(X)
parfactor psi (Friends(X,Y), Smokes(X), Smokes(Y))
0 0 0 1
0 0 1 1
0 1 0 1
0 1 1 1
1 0 0 1
1 0 1 1
1 1 0 1
1 1 1 7.39  # the only non-unit entry
";

    #[test]
    fn parses_smokers() {
        let m = parse_model(SMOKERS).unwrap();
        assert_eq!(m.logvars()["X"].domain(), ["alice", "bob"]);
        let psi = &m.parfactors()[0];
        assert_eq!(psi.arity(), 3);
        assert_eq!(psi.potentials()[7], 7.39);
        assert!(psi.constraint().is_top());
    }

    #[test]
    fn round_trips() {
        let m = parse_model(SMOKERS).unwrap();
        let text = serialize_model(&m);
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn explicit_constraint_round_trips() {
        let text = SMOKERS.replace("Smokes(Y))\n", "Smokes(Y)) | (Y, X) in {(alice, bob), (bob, alice)}\n");
        let m = parse_model(&text).unwrap();
        assert_eq!(m.ground().unwrap().len(), 2);
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn zero_arity_parfactor() {
        let m = parse_model("parfactor k ()\n3.5\n").unwrap();
        assert_eq!(m.parfactors()[0].potentials(), &[3.5]);
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_non_boolean_range() {
        let err = parse_model("domain X = {a}\nprv Color(X) : {red, green, blue}\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("non-Boolean"));
        let err = parse_model("parfactor g (A)\n0 1\n2 1\n").unwrap_err();
        assert!(err.to_string().contains("non-Boolean"), "{err}");
    }

    #[test]
    fn rejects_zero_potential() {
        let err = parse_model("parfactor g (A)\n0 1\n1 0\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn rejects_wrong_row_count_and_order() {
        let err = parse_model("parfactor g (A)\n0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
        let err = parse_model("parfactor g (A)\n1 1\n0 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn names_the_offending_token() {
        let err = parse_model("domain X = {a, b\n").unwrap_err();
        assert!(err.to_string().contains("end of line"), "{err}");
        let err = parse_model("domain X = {a; b}\n").unwrap_err();
        assert!(err.to_string().contains("';'"), "{err}");
    }
}

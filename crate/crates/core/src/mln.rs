//! Markov logic networks: weighted formulas, their distribution, the `.mln`
//! text format and the end-to-end extraction driver [`cofe`].
//!
//! Each formula keeps the logvars of the parfactor it came from, even when
//! minimization removed every atom mentioning one of them. The number of
//! true groundings, and so the distribution, depends on that quantification.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::logic::{bucket_by_weight, formula_length, minimize, BoolFormula, Implicant};
use crate::model::format::{boolean_range, strip_comment, tokenize, write_constraint, Cursor, Tok};
use crate::model::{
    ground_atoms_of, logvars_of, Constraint, GroundAtom, JointTable, Logvar, Parfactor, ParfactorModel, Prv,
};
use crate::reduction::{reduce_cluster, reduce_quantile, select_reduction, ReductionParams, ReductionResult};

/// `pred(L1, ..., Ln)` inside a formula; `predicate` is the declared PRV name.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: String,
    pub logvars: Vec<String>,
}

impl Atom {
    /// Lowercased predicate with the original logvar names.
    pub fn render(&self) -> String {
        let name = self.predicate.to_lowercase();
        if self.logvars.is_empty() {
            name
        } else {
            format!("{name}({})", self.logvars.join(","))
        }
    }

    fn as_prv(&self) -> Prv {
        Prv::new(self.predicate.clone(), self.logvars.iter().cloned())
    }
}

#[derive(Debug, Clone)]
pub struct MlnFormula {
    pub weight: f64,
    pub atoms: Vec<Atom>,
    /// DNF over positions of `atoms`.
    pub formula: BoolFormula,
    /// Universally quantified logvars with their allowed tuples.
    pub constraint: Constraint,
}

impl PartialEq for MlnFormula {
    fn eq(&self, other: &Self) -> bool {
        self.weight.to_bits() == other.weight.to_bits()
            && self.atoms == other.atoms
            && self.formula.arity == other.formula.arity
            && self.formula.implicants == other.formula.implicants
            && self.constraint == other.constraint
    }
}

impl MlnFormula {
    pub fn length(&self) -> usize {
        formula_length(&self.formula)
    }

    pub fn logvars(&self) -> &[String] {
        &self.constraint.logvars
    }

    pub fn render(&self) -> String {
        let names: Vec<String> = self.atoms.iter().map(Atom::render).collect();
        let body = self.formula.render(&names);
        let mentioned = logvars_of(&self.atoms.iter().map(Atom::as_prv).collect::<Vec<_>>());
        let mut out = String::new();
        if mentioned != self.constraint.logvars {
            let _ = write!(out, "forall {}: ", self.constraint.logvars.join(", "));
        }
        out.push_str(&body);
        write_constraint(&mut out, &self.constraint);
        out
    }

    /// Rewrites the formula into the form the parser produces: unused atoms
    /// dropped, atoms numbered by first appearance, mentioned logvars first.
    fn canonical(weight: f64, args: &[Prv], formula: &BoolFormula, constraint: &Constraint) -> MlnFormula {
        let n = formula.arity;
        let mut order: Vec<usize> = Vec::new();
        for imp in &formula.implicants {
            for p in 0..n {
                if imp.literal(p, n).is_some() && !order.contains(&p) {
                    order.push(p);
                }
            }
        }
        let m = order.len();
        let implicants = formula
            .implicants
            .iter()
            .map(|imp| {
                let mut out = Implicant { care: 0, value: 0 };
                for (j, &p) in order.iter().enumerate() {
                    if let Some(v) = imp.literal(p, n) {
                        out.care |= 1 << (m - 1 - j);
                        if v {
                            out.value |= 1 << (m - 1 - j);
                        }
                    }
                }
                out
            })
            .collect::<Vec<_>>();
        let implicants = if m == 0 {
            vec![Implicant { care: 0, value: 0 }]
        } else {
            implicants
        };
        let atoms: Vec<Atom> = order
            .iter()
            .map(|&p| Atom {
                predicate: args[p].name.clone(),
                logvars: args[p].params.clone(),
            })
            .collect();
        let mut logvars = logvars_of(&atoms.iter().map(Atom::as_prv).collect::<Vec<_>>());
        for lv in &constraint.logvars {
            if !logvars.contains(lv) {
                logvars.push(lv.clone());
            }
        }
        MlnFormula {
            weight,
            atoms,
            formula: BoolFormula {
                arity: m,
                implicants,
                minimal: formula.minimal,
            },
            constraint: constraint.reordered(&logvars),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mln {
    logvars: BTreeMap<String, Logvar>,
    predicates: BTreeMap<String, Prv>,
    formulas: Vec<MlnFormula>,
}

const RESERVED: [&str; 4] = ["v", "true", "forall", "in"];

impl Mln {
    pub fn new(
        logvars: impl IntoIterator<Item = Logvar>,
        predicates: impl IntoIterator<Item = Prv>,
        formulas: Vec<MlnFormula>,
    ) -> Result<Self> {
        let logvars: BTreeMap<String, Logvar> = logvars.into_iter().map(|l| (l.name().to_string(), l)).collect();
        let predicates: BTreeMap<String, Prv> = predicates.into_iter().map(|p| (p.name.clone(), p)).collect();
        let mut lowered = BTreeSet::new();
        for p in predicates.values() {
            let low = p.name.to_lowercase();
            if RESERVED.contains(&low.as_str()) {
                return Err(Error::invalid(format!(
                    "predicate name {} is reserved in the .mln format",
                    p.name
                )));
            }
            if !lowered.insert(low) {
                return Err(Error::invalid(format!(
                    "predicate {} collides with another predicate after lowercasing",
                    p.name
                )));
            }
            for lv in &p.params {
                if !logvars.contains_key(lv) {
                    return Err(Error::invalid(format!("predicate {p} uses undeclared logvar {lv}")));
                }
            }
        }
        for f in &formulas {
            if f.formula.arity != f.atoms.len() {
                return Err(Error::invalid("formula arity does not match its atoms"));
            }
            for a in &f.atoms {
                let decl = predicates
                    .get(&a.predicate)
                    .ok_or_else(|| Error::invalid(format!("undeclared predicate {}", a.predicate)))?;
                if decl.params.len() != a.logvars.len() {
                    return Err(Error::invalid(format!(
                        "{} does not match signature {decl}",
                        a.render()
                    )));
                }
                for (used, formal) in a.logvars.iter().zip(&decl.params) {
                    let u = logvars
                        .get(used)
                        .ok_or_else(|| Error::invalid(format!("undeclared logvar {used}")))?;
                    if u.domain() != logvars[formal].domain() {
                        return Err(Error::invalid(format!(
                            "{} binds {used} whose domain differs from {formal}",
                            a.render()
                        )));
                    }
                    if !f.constraint.logvars.contains(used) {
                        return Err(Error::invalid(format!("logvar {used} is not quantified")));
                    }
                }
            }
            for lv in &f.constraint.logvars {
                if !logvars.contains_key(lv) {
                    return Err(Error::invalid(format!("undeclared logvar {lv}")));
                }
            }
        }
        Ok(Mln {
            logvars,
            predicates,
            formulas,
        })
    }

    pub fn logvars(&self) -> &BTreeMap<String, Logvar> {
        &self.logvars
    }

    pub fn predicates(&self) -> &BTreeMap<String, Prv> {
        &self.predicates
    }

    pub fn formulas(&self) -> &[MlnFormula] {
        &self.formulas
    }

    /// Drops weight-0 formulas. Each contributes `exp(0) = 1` to every
    /// world, so the distribution is unchanged.
    pub fn without_zero_weights(&self) -> Mln {
        Mln {
            logvars: self.logvars.clone(),
            predicates: self.predicates.clone(),
            formulas: self.formulas.iter().filter(|f| f.weight != 0.0).cloned().collect(),
        }
    }

    pub fn ground_atoms(&self) -> Vec<GroundAtom> {
        ground_atoms_of(&self.logvars, self.predicates.values())
    }
}

/// How [`cofe_with`] reduces each table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyChoice {
    /// Both strategies, best admissible result.
    #[default]
    Auto,
    Quantile,
    /// Clustering, discarded when it exceeds the budget.
    Cluster,
    /// No reduction: the canonical transformation.
    None,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CofeOptions {
    pub strategy: StrategyChoice,
    /// Remove weight-0 formulas after extraction.
    pub drop_zero_weights: bool,
}

/// Per-parfactor diagnostics of one extraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParfactorExtraction {
    pub name: String,
    pub reduction: ReductionResult,
    pub distinct_before: usize,
    pub distinct_after: usize,
    /// Literal count of every emitted formula, ascending weight.
    pub formula_lengths: Vec<usize>,
    /// False if any bucket fell back to a greedy cover.
    pub minimal: bool,
}

#[derive(Debug, Clone)]
pub struct CofeOutput {
    pub mln: Mln,
    pub parfactors: Vec<ParfactorExtraction>,
}

impl CofeOutput {
    /// `model` with every table replaced by its reduced version.
    pub fn reduced_model(&self, model: &ParfactorModel) -> Result<ParfactorModel> {
        model.with_tables(self.parfactors.iter().map(|p| p.reduction.mapped.clone()).collect())
    }
}

/// Reduction, extraction and minimization for every parfactor of `model`.
pub fn cofe(model: &ParfactorModel, params: &ReductionParams) -> Result<CofeOutput> {
    cofe_with(model, params, &CofeOptions::default())
}

pub fn cofe_with(model: &ParfactorModel, params: &ReductionParams, opts: &CofeOptions) -> Result<CofeOutput> {
    params.validate()?;
    let mut formulas = Vec::new();
    let mut reports = Vec::new();
    for pf in model.parfactors() {
        let reduction = reduce_table(pf.potentials(), params, opts.strategy)?;
        let (emitted, lengths, minimal) = extract_formulas(pf, &reduction.mapped)?;
        formulas.extend(emitted);
        reports.push(ParfactorExtraction {
            name: pf.name().to_string(),
            distinct_before: crate::metrics::distinct_count(pf.potentials()),
            distinct_after: reduction.distinct_count(),
            reduction,
            formula_lengths: lengths,
            minimal,
        });
    }
    let mln = Mln::new(
        model.logvars().values().cloned(),
        model.prvs().values().cloned(),
        formulas,
    )?;
    let mln = if opts.drop_zero_weights {
        mln.without_zero_weights()
    } else {
        mln
    };
    Ok(CofeOutput {
        mln,
        parfactors: reports,
    })
}

fn reduce_table(t: &[f64], params: &ReductionParams, choice: StrategyChoice) -> Result<ReductionResult> {
    match choice {
        StrategyChoice::Auto => select_reduction(t, params),
        StrategyChoice::Quantile => reduce_quantile(t, params.epsilon),
        StrategyChoice::Cluster => {
            let r = reduce_cluster(t, params)?;
            Ok(if r.distance <= params.epsilon {
                r
            } else {
                ReductionResult::identity(t)
            })
        }
        StrategyChoice::None => Ok(ReductionResult::identity(t)),
    }
}

fn extract_formulas(pf: &Parfactor, mapped: &[f64]) -> Result<(Vec<MlnFormula>, Vec<usize>, bool)> {
    let mut out = Vec::new();
    let mut lengths = Vec::new();
    let mut minimal = true;
    for bucket in bucket_by_weight(mapped, pf.arity())? {
        let f = minimize(&bucket)?;
        minimal &= f.minimal;
        lengths.push(formula_length(&f));
        out.push(MlnFormula::canonical(bucket.weight, pf.args(), &f, pf.constraint()));
    }
    Ok((out, lengths, minimal))
}

/// The canonical transformation: one minterm formula per row, no reduction
/// and no minimization.
pub fn canonical_mln(model: &ParfactorModel) -> Result<Mln> {
    let mut formulas = Vec::new();
    for pf in model.parfactors() {
        let n = pf.arity();
        for (m, w) in crate::logic::canonical_extract(pf)? {
            let f = BoolFormula {
                arity: n,
                implicants: vec![Implicant::minterm(m.bits, n)],
                minimal: true,
            };
            formulas.push(MlnFormula::canonical(w, pf.args(), &f, pf.constraint()));
        }
    }
    Mln::new(
        model.logvars().values().cloned(),
        model.prvs().values().cloned(),
        formulas,
    )
}

/// `P_M` over all groundings of the declared predicates, by enumeration.
pub fn mln_joint(mln: &Mln, cap: usize) -> Result<JointTable> {
    let atoms = mln.ground_atoms();
    if atoms.len() > cap {
        return Err(Error::TooLarge {
            what: "ground randvar set",
            size: atoms.len(),
            cap,
        });
    }
    let index: BTreeMap<&GroundAtom, usize> = atoms.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let m = atoms.len();
    // (weight, formula, ground atom indices) per grounding
    let mut groundings: Vec<(f64, &BoolFormula, Vec<usize>)> = Vec::new();
    for f in mln.formulas() {
        let lvs = &f.constraint.logvars;
        for tuple in f.constraint.enumerate(mln.logvars())? {
            let subst: BTreeMap<&str, &str> = lvs
                .iter()
                .map(String::as_str)
                .zip(tuple.iter().map(String::as_str))
                .collect();
            let vars = f
                .atoms
                .iter()
                .map(|a| {
                    let g = GroundAtom::new(a.predicate.clone(), a.logvars.iter().map(|lv| subst[lv.as_str()]));
                    index[&g]
                })
                .collect();
            groundings.push((f.weight, &f.formula, vars));
        }
    }
    let logw = (0..1usize << m)
        .map(|world| {
            groundings
                .iter()
                .filter(|(_, formula, vars)| {
                    let bits = vars
                        .iter()
                        .fold(0u32, |acc, &v| (acc << 1) | ((world >> (m - 1 - v)) & 1) as u32);
                    formula.eval(bits)
                })
                .map(|(w, _, _)| w)
                .sum()
        })
        .collect();
    Ok(JointTable::from_log_weights(atoms, logw))
}

/// Writes the `.mln` text form: declarations, then one `<weight>  <formula>`
/// line per formula. Weights use the shortest representation that parses
/// back to the same double.
pub fn serialize_mln(mln: &Mln) -> String {
    let mut out = String::new();
    for lv in mln.logvars.values() {
        let _ = writeln!(out, "domain {} = {{{}}}", lv.name(), lv.domain().join(", "));
    }
    for p in mln.predicates.values() {
        let _ = writeln!(out, "prv {p}");
    }
    if !mln.formulas.is_empty() {
        out.push('\n');
    }
    for f in &mln.formulas {
        let _ = writeln!(out, "{:?}  {}", f.weight, f.render());
    }
    out
}

pub fn parse_mln(text: &str) -> Result<Mln> {
    let mut logvars = Vec::new();
    let mut predicates: Vec<Prv> = Vec::new();
    let mut pending: Vec<(usize, f64, Vec<Tok>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = strip_comment(raw, "//");
        if body.is_empty() {
            continue;
        }
        let first = body.split_whitespace().next().unwrap_or("");
        match first {
            "domain" => {
                let toks = tokenize(line, &body[first.len()..])?;
                let mut cur = Cursor::new(line, &toks);
                let name = cur.ident()?;
                cur.expect_sym('=')?;
                let consts = cur.braced_names()?;
                cur.finish()?;
                logvars.push(Logvar::new(name, consts).map_err(|e| anchor(line, e))?);
            }
            "prv" => {
                let toks = tokenize(line, &body[first.len()..])?;
                let mut cur = Cursor::new(line, &toks);
                let p = cur.prv()?;
                boolean_range(&mut cur, &p)?;
                cur.finish()?;
                predicates.push(p);
            }
            _ => {
                let weight: f64 = first
                    .parse()
                    .map_err(|_| Error::parse(line, format!("expected a weight, found '{first}'")))?;
                if !weight.is_finite() {
                    return Err(Error::parse(line, format!("weight '{first}' is not finite")));
                }
                pending.push((line, weight, tokenize(line, &body[first.len()..])?));
            }
        }
    }
    let by_lower: BTreeMap<String, &Prv> = predicates.iter().map(|p| (p.name.to_lowercase(), p)).collect();
    let mut formulas = Vec::new();
    for (line, weight, toks) in &pending {
        let mut cur = Cursor::new(*line, toks);
        formulas.push(parse_formula(&mut cur, *weight, &by_lower)?);
    }
    Mln::new(logvars, predicates, formulas)
}

fn anchor(line: usize, e: Error) -> Error {
    match e {
        Error::Validation(msg) => Error::Validation(format!("line {line}: {msg}")),
        other => other,
    }
}

fn parse_formula(cur: &mut Cursor<'_>, weight: f64, preds: &BTreeMap<String, &Prv>) -> Result<MlnFormula> {
    let mut quantified: Option<Vec<String>> = None;
    if let Some(Tok::Word(w)) = cur.peek() {
        if w == "forall" {
            cur.word()?;
            let mut lvs = vec![cur.ident()?];
            while cur.eat_sym(',') {
                lvs.push(cur.ident()?);
            }
            cur.expect_sym(':')?;
            quantified = Some(lvs);
        }
    }

    let mut atoms: Vec<Atom> = Vec::new();
    // (atom index, polarity) per term
    let mut terms: Vec<Vec<(usize, bool)>> = Vec::new();
    let mut tautology = false;
    loop {
        let parens = cur.eat_sym('(');
        let mut term = Vec::new();
        loop {
            let negated = cur.eat_sym('!');
            let name = cur.ident()?;
            if name == "true" && !negated && !cur.is_sym('(') {
                tautology = true;
            } else {
                let logvars = if cur.is_sym('(') {
                    cur.paren_names()?
                } else {
                    Vec::new()
                };
                let decl = preds
                    .get(&name)
                    .ok_or_else(|| Error::parse(cur.line, format!("unknown predicate '{name}'")))?;
                let atom = Atom {
                    predicate: decl.name.clone(),
                    logvars,
                };
                let idx = atoms.iter().position(|a| *a == atom).unwrap_or_else(|| {
                    atoms.push(atom);
                    atoms.len() - 1
                });
                if term.iter().any(|&(i, v)| i == idx && v == negated) {
                    return Err(Error::parse(cur.line, format!("contradictory literals on '{name}'")));
                }
                if !term.contains(&(idx, !negated)) {
                    term.push((idx, !negated));
                }
            }
            if !cur.eat_sym('^') {
                break;
            }
        }
        if parens {
            cur.expect_sym(')')?;
        }
        terms.push(term);
        match cur.peek() {
            Some(Tok::Word(w)) if w == "v" => {
                cur.word()?;
            }
            _ => break,
        }
    }

    let own = logvars_of(&atoms.iter().map(Atom::as_prv).collect::<Vec<_>>());
    let logvars = match quantified {
        Some(q) => {
            if let Some(missing) = own.iter().find(|lv| !q.contains(lv)) {
                return Err(Error::parse(cur.line, format!("logvar {missing} is not quantified")));
            }
            q
        }
        None => own,
    };
    let constraint = if cur.eat_sym('|') {
        let c = cur.constraint(logvars.clone())?;
        let mut a = c.logvars.clone();
        let mut b = logvars.clone();
        a.sort();
        b.sort();
        if a != b {
            return Err(Error::parse(
                cur.line,
                "constraint logvars differ from the formula's logvars",
            ));
        }
        c.reordered(&logvars)
    } else {
        Constraint::top(logvars)
    };
    cur.finish()?;

    let m = atoms.len();
    let implicants = if tautology {
        vec![Implicant { care: 0, value: 0 }]
    } else {
        terms
            .iter()
            .map(|t| {
                let mut imp = Implicant { care: 0, value: 0 };
                for &(i, v) in t {
                    imp.care |= 1 << (m - 1 - i);
                    if v {
                        imp.value |= 1 << (m - 1 - i);
                    }
                }
                imp
            })
            .collect()
    };
    Ok(MlnFormula {
        weight,
        atoms,
        formula: BoolFormula {
            arity: m,
            implicants,
            minimal: true,
        },
        constraint,
    })
}

/// Rebuilds a parfactor model from an MLN whose formulas, grouped by shared
/// atoms and quantification, partition the assignments of each group.
pub fn mln_to_model(mln: &Mln) -> Result<ParfactorModel> {
    // Group by quantification (logvar set plus tuples in sorted column order).
    let mut classes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, f) in mln.formulas().iter().enumerate() {
        let mut lvs = f.constraint.logvars.clone();
        lvs.sort();
        let key = format!("{:?}", f.constraint.reordered(&lvs));
        classes.entry(key).or_default().push(i);
    }
    let mut parfactors = Vec::new();
    for members in classes.values() {
        // Connected components over shared atoms.
        let mut comp: Vec<usize> = (0..members.len()).collect();
        fn root(c: &mut [usize], mut i: usize) -> usize {
            while c[i] != i {
                c[i] = c[c[i]];
                i = c[i];
            }
            i
        }
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                let fa = &mln.formulas()[members[a]];
                let fb = &mln.formulas()[members[b]];
                if fa.atoms.iter().any(|x| fb.atoms.contains(x)) {
                    let (ra, rb) = (root(&mut comp, a), root(&mut comp, b));
                    comp[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, &member) in members.iter().enumerate() {
            let r = root(&mut comp, k);
            groups.entry(r).or_default().push(member);
        }
        for group in groups.values() {
            parfactors.push(component_parfactor(mln, group, parfactors.len())?);
        }
    }
    ParfactorModel::new(
        mln.logvars().values().cloned(),
        mln.predicates().values().cloned(),
        parfactors,
    )
}

fn component_parfactor(mln: &Mln, group: &[usize], ordinal: usize) -> Result<Parfactor> {
    let formulas: Vec<&MlnFormula> = group.iter().map(|&i| &mln.formulas()[i]).collect();
    let mut atoms: Vec<Atom> = Vec::new();
    for f in &formulas {
        for a in &f.atoms {
            if !atoms.contains(a) {
                atoms.push(a.clone());
            }
        }
    }
    let n = atoms.len();
    if n > crate::logic::MAX_MINIMIZE_ARITY {
        return Err(Error::invalid(format!(
            "formula group over {n} atoms is too large to tabulate"
        )));
    }
    let args: Vec<Prv> = atoms.iter().map(Atom::as_prv).collect();
    let own = logvars_of(&args);
    let quantified = &formulas[0].constraint;
    if own.len() != quantified.logvars.len() {
        return Err(Error::invalid(format!(
            "formula `{}` quantifies logvars its group never mentions",
            formulas[0].render()
        )));
    }
    let positions: Vec<Vec<usize>> = formulas
        .iter()
        .map(|f| {
            f.atoms
                .iter()
                .map(|a| atoms.iter().position(|x| x == a).expect("collected above"))
                .collect()
        })
        .collect();
    let mut potentials = Vec::with_capacity(1 << n);
    for row in 0..1usize << n {
        let mut hit: Option<f64> = None;
        for (f, pos) in formulas.iter().zip(&positions) {
            let bits = pos
                .iter()
                .fold(0u32, |acc, &p| (acc << 1) | ((row >> (n - 1 - p)) & 1) as u32);
            if f.formula.eval(bits) {
                if hit.is_some() {
                    return Err(Error::invalid(format!(
                        "formulas overlap on row {row} of group starting with `{}`",
                        formulas[0].render()
                    )));
                }
                hit = Some(f.weight);
            }
        }
        let w = hit.ok_or_else(|| {
            Error::invalid(format!(
                "row {row} of group starting with `{}` satisfies no formula",
                formulas[0].render()
            ))
        })?;
        potentials.push(w.exp());
    }
    Parfactor::with_constraint(
        format!("g{}", ordinal + 1),
        args,
        potentials,
        quantified.reordered(&own),
    )
}

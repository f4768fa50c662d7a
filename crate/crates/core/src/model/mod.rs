//! Parfactor models: logvars, PRVs, constraints, potential tables, grounding
//! and the full joint distribution a model induces.
//!
//! All ranges are Boolean. Potential tables are stored in canonical row
//! order: arguments left to right, the last argument varies fastest, and
//! each argument takes `0` before `1`. Row index `r` therefore assigns
//! argument `i` of `n` the bit `(r >> (n - 1 - i)) & 1`.

pub(crate) mod format;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

pub use format::{parse_model, serialize_model};

/// Default cap on ground randvars for brute-force enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// A logical variable and its (sorted, duplicate-free) domain of constants.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Logvar {
    name: String,
    domain: Vec<String>,
}

impl Logvar {
    pub fn new<I, S>(name: impl Into<String>, domain: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        let mut consts: Vec<String> = domain.into_iter().map(Into::into).collect();
        let before = consts.len();
        consts.sort();
        consts.dedup();
        if consts.is_empty() {
            return Err(Error::invalid(format!("logvar {name} has an empty domain")));
        }
        if consts.len() != before {
            return Err(Error::invalid(format!(
                "logvar {name} has duplicate constants in its domain"
            )));
        }
        Ok(Logvar { name, domain: consts })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &[String] {
        &self.domain
    }
}

/// A parameterized Boolean randvar `R(L1, ..., Ln)`; `params` name logvars.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Prv {
    pub name: String,
    pub params: Vec<String>,
}

impl Prv {
    pub fn new<S: Into<String>>(name: impl Into<String>, params: impl IntoIterator<Item = S>) -> Self {
        Prv {
            name: name.into(),
            params: params.into_iter().map(Into::into).collect(),
        }
    }

    pub fn propositional(name: impl Into<String>) -> Self {
        Prv {
            name: name.into(),
            params: Vec::new(),
        }
    }
}

impl fmt::Display for Prv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.params.is_empty() {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}({})", self.name, self.params.join(","))
        }
    }
}

/// Allowed tuples of a constraint.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Tuples {
    /// The full cross product of the logvar domains.
    Top,
    Explicit(BTreeSet<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Constraint {
    pub logvars: Vec<String>,
    pub tuples: Tuples,
}

impl Constraint {
    pub fn top(logvars: Vec<String>) -> Self {
        Constraint {
            logvars,
            tuples: Tuples::Top,
        }
    }

    pub fn explicit(logvars: Vec<String>, tuples: impl IntoIterator<Item = Vec<String>>) -> Self {
        Constraint {
            logvars,
            tuples: Tuples::Explicit(tuples.into_iter().collect()),
        }
    }

    pub fn is_top(&self) -> bool {
        matches!(self.tuples, Tuples::Top)
    }

    /// Every allowed tuple in deterministic order: lexicographic over the
    /// sorted domains for `Top`, set order for explicit tuples.
    pub fn enumerate(&self, logvars: &BTreeMap<String, Logvar>) -> Result<Vec<Vec<String>>> {
        match &self.tuples {
            Tuples::Explicit(set) => Ok(set.iter().cloned().collect()),
            Tuples::Top => {
                let mut out: Vec<Vec<String>> = vec![Vec::new()];
                for lv in &self.logvars {
                    let domain = logvars
                        .get(lv)
                        .ok_or_else(|| Error::invalid(format!("undeclared logvar {lv}")))?
                        .domain();
                    if domain.is_empty() {
                        return Err(Error::invalid(format!("logvar {lv} has an empty domain")));
                    }
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            domain.iter().map(move |c| {
                                let mut t = prefix.clone();
                                t.push(c.clone());
                                t
                            })
                        })
                        .collect();
                }
                Ok(out)
            }
        }
    }

    /// Number of allowed tuples (`|Top|` is the product of domain sizes).
    pub fn len(&self, logvars: &BTreeMap<String, Logvar>) -> usize {
        match &self.tuples {
            Tuples::Explicit(set) => set.len(),
            Tuples::Top => self
                .logvars
                .iter()
                .map(|lv| logvars.get(lv).map_or(0, |l| l.domain().len()))
                .product(),
        }
    }

    pub fn is_empty(&self, logvars: &BTreeMap<String, Logvar>) -> bool {
        self.len(logvars) == 0
    }

    /// The same constraint with its columns reordered to `order`.
    pub fn reordered(&self, order: &[String]) -> Constraint {
        let perm: Vec<usize> = order
            .iter()
            .map(|lv| {
                self.logvars
                    .iter()
                    .position(|x| x == lv)
                    .expect("reorder target must be a permutation")
            })
            .collect();
        let tuples = match &self.tuples {
            Tuples::Top => Tuples::Top,
            Tuples::Explicit(set) => Tuples::Explicit(
                set.iter()
                    .map(|t| perm.iter().map(|&i| t[i].clone()).collect())
                    .collect(),
            ),
        };
        Constraint {
            logvars: order.to_vec(),
            tuples,
        }
    }
}

/// Logvars occurring in `args`, in order of first appearance.
pub fn logvars_of(args: &[Prv]) -> Vec<String> {
    let mut seen = Vec::new();
    for p in args {
        for lv in &p.params {
            if !seen.contains(lv) {
                seen.push(lv.clone());
            }
        }
    }
    seen
}

/// `phi(A1, ..., An)|C` with a table of `2^n` strictly positive potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct Parfactor {
    name: String,
    args: Vec<Prv>,
    potentials: Vec<f64>,
    constraint: Constraint,
}

impl Parfactor {
    /// Parfactor with the `Top` constraint over the logvars of `args`.
    pub fn new(name: impl Into<String>, args: Vec<Prv>, potentials: Vec<f64>) -> Result<Self> {
        let constraint = Constraint::top(logvars_of(&args));
        Parfactor::with_constraint(name, args, potentials, constraint)
    }

    pub fn with_constraint(
        name: impl Into<String>,
        args: Vec<Prv>,
        potentials: Vec<f64>,
        constraint: Constraint,
    ) -> Result<Self> {
        let name = name.into();
        if args.len() > 30 {
            return Err(Error::invalid(format!("parfactor {name}: too many arguments")));
        }
        if let Some(dup) = args.iter().enumerate().find(|(i, a)| args[..*i].contains(a)) {
            return Err(Error::invalid(format!(
                "parfactor {name}: argument {} appears twice",
                dup.1
            )));
        }
        let expected = 1usize << args.len();
        if potentials.len() != expected {
            return Err(Error::invalid(format!(
                "parfactor {name}: expected {expected} potentials, got {}",
                potentials.len()
            )));
        }
        if let Some((i, p)) = potentials
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::invalid(format!(
                "parfactor {name}: potential {p} at row {i} is not strictly positive"
            )));
        }
        let mut own = logvars_of(&args);
        let mut declared = constraint.logvars.clone();
        own.sort();
        declared.sort();
        if own != declared {
            return Err(Error::invalid(format!(
                "parfactor {name}: constraint logvars {:?} do not match argument logvars {:?}",
                constraint.logvars, own
            )));
        }
        if let Tuples::Explicit(set) = &constraint.tuples {
            if let Some(t) = set.iter().find(|t| t.len() != constraint.logvars.len()) {
                return Err(Error::invalid(format!(
                    "parfactor {name}: constraint tuple {t:?} has wrong arity"
                )));
            }
        }
        Ok(Parfactor {
            name,
            args,
            potentials,
            constraint,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[Prv] {
        &self.args
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potentials
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    pub fn logvars(&self) -> Vec<String> {
        logvars_of(&self.args)
    }

    /// Parfactor size, `2^n`.
    pub fn size(&self) -> usize {
        self.potentials.len()
    }

    /// The same parfactor with a different potential table.
    pub fn with_potentials(&self, potentials: Vec<f64>) -> Result<Parfactor> {
        Parfactor::with_constraint(
            self.name.clone(),
            self.args.clone(),
            potentials,
            self.constraint.clone(),
        )
    }

    /// All rows in canonical order.
    pub fn enumerate_rows(&self) -> Vec<(Vec<bool>, f64)> {
        let n = self.arity();
        self.potentials
            .iter()
            .enumerate()
            .map(|(r, &p)| (row_assignment(r, n), p))
            .collect()
    }
}

/// Assignment tuple of row `row` in a table over `n` Boolean arguments.
pub fn row_assignment(row: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (row >> (n - 1 - i)) & 1 == 1).collect()
}

/// Inverse of [`row_assignment`].
pub fn row_index(values: &[bool]) -> usize {
    values.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

/// A ground randvar such as `Friends(alice,bob)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub name: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new<S: Into<String>>(name: impl Into<String>, args: impl IntoIterator<Item = S>) -> Self {
        GroundAtom {
            name: name.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.name)
        } else {
            write!(f, "{}({})", self.name, self.args.join(","))
        }
    }
}

/// Total assignment of Boolean values to ground randvars.
pub type Assignment = BTreeMap<GroundAtom, bool>;

/// One grounding of a parfactor; shares the parent's potential table.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundFactor<'m> {
    pub parfactor: &'m Parfactor,
    pub atoms: Vec<GroundAtom>,
}

impl GroundFactor<'_> {
    pub fn potentials(&self) -> &[f64] {
        self.parfactor.potentials()
    }

    /// Potential of the row selected by looking up each argument in `world`.
    pub fn value_in(&self, value_of: impl Fn(&GroundAtom) -> bool) -> f64 {
        let row = self
            .atoms
            .iter()
            .fold(0usize, |acc, a| (acc << 1) | value_of(a) as usize);
        self.parfactor.potentials()[row]
    }
}

/// A set of parfactors together with the logvars and PRV signatures they use.
#[derive(Debug, Clone, PartialEq)]
pub struct ParfactorModel {
    logvars: BTreeMap<String, Logvar>,
    prvs: BTreeMap<String, Prv>,
    parfactors: Vec<Parfactor>,
}

impl ParfactorModel {
    /// Builds a model, declaring every PRV by its first use when `prvs` does
    /// not already contain it.
    pub fn new(
        logvars: impl IntoIterator<Item = Logvar>,
        prvs: impl IntoIterator<Item = Prv>,
        parfactors: Vec<Parfactor>,
    ) -> Result<Self> {
        let mut lv_map = BTreeMap::new();
        for lv in logvars {
            if lv_map.insert(lv.name.clone(), lv.clone()).is_some() {
                return Err(Error::invalid(format!("logvar {} declared twice", lv.name)));
            }
        }
        let mut prv_map: BTreeMap<String, Prv> = BTreeMap::new();
        for p in prvs {
            if prv_map.insert(p.name.clone(), p.clone()).is_some() {
                return Err(Error::invalid(format!("PRV {} declared twice", p.name)));
            }
        }
        for pf in &parfactors {
            for a in pf.args() {
                prv_map.entry(a.name.clone()).or_insert_with(|| a.clone());
            }
        }
        let model = ParfactorModel {
            logvars: lv_map,
            prvs: prv_map,
            parfactors,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        for p in self.prvs.values() {
            for lv in &p.params {
                if !self.logvars.contains_key(lv) {
                    return Err(Error::invalid(format!("PRV {p} uses undeclared logvar {lv}")));
                }
            }
        }
        let mut names = BTreeSet::new();
        for pf in &self.parfactors {
            if !names.insert(pf.name()) {
                return Err(Error::invalid(format!("parfactor {} declared twice", pf.name())));
            }
            for a in pf.args() {
                let decl = &self.prvs[&a.name];
                if decl.params.len() != a.params.len() {
                    return Err(Error::invalid(format!(
                        "parfactor {}: {a} does not match signature {decl}",
                        pf.name()
                    )));
                }
                for (used, formal) in a.params.iter().zip(&decl.params) {
                    let used_lv = self
                        .logvars
                        .get(used)
                        .ok_or_else(|| Error::invalid(format!("parfactor {}: undeclared logvar {used}", pf.name())))?;
                    if used_lv.domain() != self.logvars[formal].domain() {
                        return Err(Error::invalid(format!(
                            "parfactor {}: {a} binds {used} whose domain differs from {formal} in {decl}",
                            pf.name()
                        )));
                    }
                }
            }
            if let Tuples::Explicit(set) = &pf.constraint().tuples {
                for t in set {
                    for (c, lv) in t.iter().zip(&pf.constraint().logvars) {
                        if !self.logvars[lv].domain().contains(c) {
                            return Err(Error::invalid(format!(
                                "parfactor {}: constant {c} not in domain of {lv}",
                                pf.name()
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn logvars(&self) -> &BTreeMap<String, Logvar> {
        &self.logvars
    }

    pub fn prvs(&self) -> &BTreeMap<String, Prv> {
        &self.prvs
    }

    pub fn parfactors(&self) -> &[Parfactor] {
        &self.parfactors
    }

    /// The same model with every parfactor table replaced, in order.
    pub fn with_tables(&self, tables: Vec<Vec<f64>>) -> Result<ParfactorModel> {
        if tables.len() != self.parfactors.len() {
            return Err(Error::invalid("table count does not match parfactor count"));
        }
        let parfactors = self
            .parfactors
            .iter()
            .zip(tables)
            .map(|(pf, t)| pf.with_potentials(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(ParfactorModel {
            logvars: self.logvars.clone(),
            prvs: self.prvs.clone(),
            parfactors,
        })
    }

    /// Every ground randvar of every declared PRV, sorted.
    pub fn ground_atoms(&self) -> Vec<GroundAtom> {
        ground_atoms_of(&self.logvars, self.prvs.values())
    }

    /// All ground factors: one per parfactor per allowed constraint tuple.
    pub fn ground(&self) -> Result<Vec<GroundFactor<'_>>> {
        let mut out = Vec::new();
        for pf in &self.parfactors {
            let c = pf.constraint();
            for lv in &c.logvars {
                if self.logvars[lv].domain().is_empty() {
                    return Err(Error::invalid(format!(
                        "parfactor {}: logvar {lv} has an empty domain",
                        pf.name()
                    )));
                }
            }
            for tuple in c.enumerate(&self.logvars)? {
                let subst: BTreeMap<&str, &str> = c
                    .logvars
                    .iter()
                    .map(String::as_str)
                    .zip(tuple.iter().map(String::as_str))
                    .collect();
                let atoms = pf
                    .args()
                    .iter()
                    .map(|a| GroundAtom::new(a.name.clone(), a.params.iter().map(|lv| subst[lv.as_str()])))
                    .collect();
                out.push(GroundFactor { parfactor: pf, atoms });
            }
        }
        Ok(out)
    }
}

/// Sorted groundings of `prvs` over the domains of their formal parameters.
pub fn ground_atoms_of<'a>(
    logvars: &BTreeMap<String, Logvar>,
    prvs: impl IntoIterator<Item = &'a Prv>,
) -> Vec<GroundAtom> {
    let mut out = BTreeSet::new();
    for p in prvs {
        let c = Constraint::top(p.params.clone());
        // Params are validated on construction, so enumeration cannot fail.
        for t in c.enumerate(logvars).unwrap_or_default() {
            out.insert(GroundAtom::new(p.name.clone(), t));
        }
    }
    out.into_iter().collect()
}

/// A normalized table over worlds of `atoms`; `atoms[0]` is the most
/// significant bit of the world index.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub atoms: Vec<GroundAtom>,
    pub probs: Vec<f64>,
}

impl JointTable {
    /// Normalizes unnormalized log-weights, one per world.
    pub(crate) fn from_log_weights(atoms: Vec<GroundAtom>, logw: Vec<f64>) -> JointTable {
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        JointTable {
            atoms,
            probs: w.into_iter().map(|x| x / z).collect(),
        }
    }

    pub fn index_of(&self, atom: &GroundAtom) -> Option<usize> {
        self.atoms.iter().position(|a| a == atom)
    }

    fn bit(&self, world: usize, var: usize) -> bool {
        (world >> (self.atoms.len() - 1 - var)) & 1 == 1
    }

    /// `P(event | evidence)` by summing matching worlds.
    pub fn conditional(&self, event: &Assignment, evidence: &Assignment) -> Result<f64> {
        let resolve = |a: &Assignment| -> Result<Vec<(usize, bool)>> {
            a.iter()
                .map(|(atom, v)| {
                    self.index_of(atom)
                        .map(|i| (i, *v))
                        .ok_or_else(|| Error::invalid(format!("unknown ground randvar {atom}")))
                })
                .collect()
        };
        let ev = resolve(evidence)?;
        let tg = resolve(event)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (w, p) in self.probs.iter().enumerate() {
            if ev.iter().all(|&(i, v)| self.bit(w, i) == v) {
                den += p;
                if tg.iter().all(|&(i, v)| self.bit(w, i) == v) {
                    num += p;
                }
            }
        }
        if den <= 0.0 {
            return Err(Error::ZeroEvidence);
        }
        Ok(num / den)
    }

    pub fn marginal(&self, atom: &GroundAtom, value: bool) -> Result<f64> {
        let event = Assignment::from([(atom.clone(), value)]);
        self.conditional(&event, &Assignment::new())
    }
}

/// Brute-force `P_G` over all ground randvars of `model`.
pub fn joint_distribution(model: &ParfactorModel, cap: usize) -> Result<JointTable> {
    let atoms = model.ground_atoms();
    if atoms.len() > cap {
        return Err(Error::TooLarge {
            what: "ground randvar set",
            size: atoms.len(),
            cap,
        });
    }
    let index: BTreeMap<&GroundAtom, usize> = atoms.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let m = atoms.len();
    let factors: Vec<(Vec<usize>, Vec<f64>)> = model
        .ground()?
        .into_iter()
        .map(|gf| {
            let vars = gf.atoms.iter().map(|a| index[a]).collect();
            let logs = gf.potentials().iter().map(|p| p.ln()).collect();
            (vars, logs)
        })
        .collect();
    let logw = (0..1usize << m)
        .map(|world| {
            factors
                .iter()
                .map(|(vars, logs)| {
                    let row = vars
                        .iter()
                        .fold(0usize, |acc, &v| (acc << 1) | ((world >> (m - 1 - v)) & 1));
                    logs[row]
                })
                .sum()
        })
        .collect();
    Ok(JointTable::from_log_weights(atoms, logw))
}

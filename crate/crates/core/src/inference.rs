//! Exact query answering on the ground factor graph by variable elimination.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::format::{tokenize, Cursor, Tok};
use crate::model::{Assignment, GroundAtom, Logvar, ParfactorModel, Prv};

pub const DEFAULT_WIDTH_CAP: usize = 25;

/// `P(target | evidence)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub target: (GroundAtom, bool),
    pub evidence: Assignment,
}

impl Query {
    pub fn marginal(atom: GroundAtom, value: bool) -> Query {
        Query {
            target: (atom, value),
            evidence: Assignment::new(),
        }
    }
}

impl std::fmt::Display for Query {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}={}", self.target.0, self.target.1 as u8)?;
        let mut sep = " | ";
        for (a, v) in &self.evidence {
            write!(f, "{sep}{a}={}", *v as u8)?;
            sep = ", ";
        }
        Ok(())
    }
}

/// A factor over variable indices; `vars[0]` is the most significant bit.
#[derive(Debug, Clone, PartialEq)]
struct Factor {
    vars: Vec<usize>,
    table: Vec<f64>,
}

impl Factor {
    fn bit(assign: usize, k: usize, pos: usize) -> usize {
        (assign >> (k - 1 - pos)) & 1
    }

    /// Scales the largest entry to 1 so long products cannot underflow.
    fn rescaled(mut self) -> Factor {
        let max = self.table.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            self.table.iter_mut().for_each(|x| *x /= max);
        }
        self
    }

    fn product(factors: &[Factor]) -> Factor {
        let vars: Vec<usize> = factors
            .iter()
            .flat_map(|f| f.vars.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let k = vars.len();
        let places: Vec<Vec<usize>> = factors
            .iter()
            .map(|f| f.vars.iter().map(|v| vars.binary_search(v).expect("union")).collect())
            .collect();
        let table = (0..1usize << k)
            .map(|a| {
                factors
                    .iter()
                    .zip(&places)
                    .map(|(f, pl)| {
                        let idx = pl.iter().fold(0, |acc, &p| (acc << 1) | Self::bit(a, k, p));
                        f.table[idx]
                    })
                    .product()
            })
            .collect();
        Factor { vars, table }
    }

    fn sum_out(&self, var: usize) -> Factor {
        let k = self.vars.len();
        let pos = self.vars.iter().position(|&v| v == var).expect("var in factor");
        let low = k - 1 - pos;
        let mut table = vec![0.0; 1 << (k - 1)];
        for (a, x) in self.table.iter().enumerate() {
            let hi = (a >> (low + 1)) << low;
            let lo = a & ((1 << low) - 1);
            table[hi | lo] += x;
        }
        let mut vars = self.vars.clone();
        vars.remove(pos);
        Factor { vars, table }
    }
}

/// Ground randvars and ground factors of a model, with repeated arguments
/// of a grounding (such as `Smokes(alice)` twice when X = Y) merged.
#[derive(Debug, Clone)]
pub struct FactorGraph {
    pub atoms: Vec<GroundAtom>,
    factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn from_model(model: &ParfactorModel) -> Result<FactorGraph> {
        let atoms = model.ground_atoms();
        let index: BTreeMap<&GroundAtom, usize> = atoms.iter().enumerate().map(|(i, a)| (a, i)).collect();
        let mut factors = Vec::new();
        for gf in model.ground()? {
            let args: Vec<usize> = gf.atoms.iter().map(|a| index[a]).collect();
            let vars: Vec<usize> = args.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
            let k = vars.len();
            let table = (0..1usize << k)
                .map(|a| {
                    let row = args.iter().fold(0usize, |acc, v| {
                        let p = vars.binary_search(v).expect("own var");
                        (acc << 1) | Factor::bit(a, k, p)
                    });
                    gf.potentials()[row]
                })
                .collect();
            factors.push(Factor { vars, table }.rescaled());
        }
        Ok(FactorGraph { atoms, factors })
    }

    pub fn index_of(&self, atom: &GroundAtom) -> Result<usize> {
        self.atoms
            .binary_search(atom)
            .map_err(|_| Error::invalid(format!("unknown ground randvar {atom}")))
    }

    /// Fixes `var = value` in every factor mentioning it.
    fn observe(&mut self, var: usize, value: bool) {
        for f in &mut self.factors {
            let Some(pos) = f.vars.iter().position(|&v| v == var) else {
                continue;
            };
            let k = f.vars.len();
            let table = (0..f.table.len())
                .filter(|a| Factor::bit(*a, k, pos) == value as usize)
                .map(|a| f.table[a])
                .collect();
            f.vars.remove(pos);
            f.table = table;
        }
    }
}

/// Elimination order used by [`query_with`].
#[derive(Debug, Clone, Default, PartialEq)]
pub enum Order {
    /// Repeatedly eliminate a variable with the fewest neighbors; ties go to
    /// the smallest ground randvar.
    #[default]
    MinDegree,
    /// Explicit order; must contain every non-query randvar that occurs in a
    /// factor.
    Custom(Vec<GroundAtom>),
}

#[derive(Debug, Clone)]
pub struct QueryOptions {
    pub order: Order,
    /// Largest factor (in variables) VE may create.
    pub width_cap: usize,
}

impl Default for QueryOptions {
    fn default() -> Self {
        QueryOptions {
            order: Order::MinDegree,
            width_cap: DEFAULT_WIDTH_CAP,
        }
    }
}

pub fn query(model: &ParfactorModel, q: &Query) -> Result<f64> {
    query_with(model, q, &QueryOptions::default())
}

pub fn query_with(model: &ParfactorModel, q: &Query, opts: &QueryOptions) -> Result<f64> {
    let graph = FactorGraph::from_model(model)?;
    query_graph(&graph, q, opts)
}

/// Answers `q` on a prebuilt graph.
pub fn query_graph(graph: &FactorGraph, q: &Query, opts: &QueryOptions) -> Result<f64> {
    let target = graph.index_of(&q.target.0)?;
    if q.evidence.contains_key(&q.target.0) {
        return Err(Error::invalid(format!(
            "query target {} also appears as evidence",
            q.target.0
        )));
    }
    let mut g = graph.clone();
    for (atom, &v) in &q.evidence {
        g.observe(g.index_of(atom)?, v);
    }
    let mut factors = g.factors;

    let mut pending: BTreeSet<usize> = factors.iter().flat_map(|f| f.vars.iter().copied()).collect();
    pending.remove(&target);
    let mut custom = match &opts.order {
        Order::MinDegree => None,
        Order::Custom(order) => {
            let mut idx = Vec::new();
            for a in order {
                let i = graph.index_of(a)?;
                if pending.contains(&i) && !idx.contains(&i) {
                    idx.push(i);
                }
            }
            if idx.len() != pending.len() {
                return Err(Error::invalid("elimination order misses a randvar of the model"));
            }
            Some(idx.into_iter())
        }
    };

    while !pending.is_empty() {
        let var = match custom.as_mut() {
            Some(it) => it.next().expect("covers pending"),
            None => min_degree(&factors, &pending),
        };
        pending.remove(&var);
        let (touching, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&var));
        factors = rest;
        let width = touching
            .iter()
            .flat_map(|f| f.vars.iter())
            .collect::<BTreeSet<_>>()
            .len();
        if width > opts.width_cap {
            return Err(Error::TooLarge {
                what: "elimination width",
                size: width,
                cap: opts.width_cap,
            });
        }
        factors.push(Factor::product(&touching).sum_out(var).rescaled());
    }

    let relevant: Vec<Factor> = factors.into_iter().filter(|f| f.vars.contains(&target)).collect();
    if relevant.is_empty() {
        return Ok(0.5);
    }
    let joint = Factor::product(&relevant);
    debug_assert_eq!(joint.vars, vec![target]);
    let z = joint.table[0] + joint.table[1];
    if z.is_nan() || z <= 0.0 {
        return Err(Error::ZeroEvidence);
    }
    Ok(joint.table[q.target.1 as usize] / z)
}

fn min_degree(factors: &[Factor], pending: &BTreeSet<usize>) -> usize {
    let mut best = (usize::MAX, usize::MAX);
    for &v in pending {
        let degree = factors
            .iter()
            .filter(|f| f.vars.contains(&v))
            .flat_map(|f| f.vars.iter().copied())
            .filter(|&u| u != v)
            .collect::<BTreeSet<_>>()
            .len();
        best = best.min((degree, v));
    }
    best.1
}

/// One marginal query `P = 1` per PRV used by a parfactor, grounded with the
/// smallest constant of each parameter's domain, sorted by PRV name.
pub fn representative_queries(model: &ParfactorModel) -> Vec<Query> {
    let used: BTreeSet<&str> = model
        .parfactors()
        .iter()
        .flat_map(|pf| pf.args().iter().map(|a| a.name.as_str()))
        .collect();
    used.into_iter()
        .map(|name| {
            let prv = &model.prvs()[name];
            let args = prv.params.iter().map(|lv| model.logvars()[lv].domain()[0].clone());
            Query::marginal(GroundAtom::new(name, args), true)
        })
        .collect()
}

/// Mean over `queries` of the absolute answer difference between `a` and `b`.
pub fn mean_absolute_error(a: &ParfactorModel, b: &ParfactorModel, queries: &[Query]) -> Result<f64> {
    if queries.is_empty() {
        return Ok(0.0);
    }
    let ga = FactorGraph::from_model(a)?;
    let gb = FactorGraph::from_model(b)?;
    let opts = QueryOptions::default();
    let mut total = 0.0;
    for q in queries {
        total += (query_graph(&ga, q, &opts)? - query_graph(&gb, q, &opts)?).abs();
    }
    Ok(total / queries.len() as f64)
}

/// Parses `prv(c1,c2)=1 [| ev(c)=0, ...]` against the given signatures.
/// Names match exactly, or case-insensitively when that is unambiguous.
pub fn parse_query(text: &str, logvars: &BTreeMap<String, Logvar>, prvs: &BTreeMap<String, Prv>) -> Result<Query> {
    let toks = tokenize(0, text)?;
    let mut cur = Cursor::new(0, &toks);
    let target = ground_event(&mut cur, logvars, prvs)?;
    let mut evidence = Assignment::new();
    if cur.eat_sym('|') {
        loop {
            let (atom, v) = ground_event(&mut cur, logvars, prvs)?;
            if evidence.insert(atom.clone(), v).is_some_and(|old| old != v) {
                return Err(Error::parse(0, format!("conflicting evidence on {atom}")));
            }
            if !cur.eat_sym(',') {
                break;
            }
        }
    }
    cur.finish()?;
    if evidence.contains_key(&target.0) {
        return Err(Error::parse(
            0,
            format!("query target {} also appears as evidence", target.0),
        ));
    }
    Ok(Query { target, evidence })
}

fn ground_event(
    cur: &mut Cursor<'_>,
    logvars: &BTreeMap<String, Logvar>,
    prvs: &BTreeMap<String, Prv>,
) -> Result<(GroundAtom, bool)> {
    let written = cur.ident()?;
    let prv = resolve_prv(&written, prvs)?;
    let args = if cur.is_sym('(') {
        cur.paren_words()?
    } else {
        Vec::new()
    };
    if args.len() != prv.params.len() {
        return Err(Error::parse(
            0,
            format!("{written} takes {} arguments, found {}", prv.params.len(), args.len()),
        ));
    }
    for (c, lv) in args.iter().zip(&prv.params) {
        if !logvars[lv].domain().contains(c) {
            return Err(Error::parse(0, format!("'{c}' is not in the domain of {lv}")));
        }
    }
    cur.expect_sym('=')?;
    let value = match cur.peek() {
        Some(Tok::Word(w)) if w == "1" || w == "true" => true,
        Some(Tok::Word(w)) if w == "0" || w == "false" => false,
        _ => return Err(cur.unexpected("0 or 1")),
    };
    cur.word()?;
    Ok((GroundAtom::new(prv.name.clone(), args), value))
}

fn resolve_prv<'p>(written: &str, prvs: &'p BTreeMap<String, Prv>) -> Result<&'p Prv> {
    if let Some(p) = prvs.get(written) {
        return Ok(p);
    }
    let low = written.to_lowercase();
    let mut hits = prvs.values().filter(|p| p.name.to_lowercase() == low);
    match (hits.next(), hits.next()) {
        (Some(p), None) => Ok(p),
        (Some(_), Some(_)) => Err(Error::parse(0, format!("'{written}' matches several randvars"))),
        _ => Err(Error::parse(0, format!("unknown randvar '{written}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{joint_distribution, parse_model, Parfactor};

    fn smokers(persons: &[&str]) -> ParfactorModel {
        let pot: Vec<f64> = (0..8).map(|r| if r == 7 { 7.39 } else { 1.0 }).collect();
        let x = Logvar::new("X", persons.iter().copied()).unwrap();
        let y = Logvar::new("Y", persons.iter().copied()).unwrap();
        let pf = Parfactor::new(
            "psi",
            vec![
                Prv::new("Friends", ["X", "Y"]),
                Prv::new("Smokes", ["X"]),
                Prv::new("Smokes", ["Y"]),
            ],
            pot,
        )
        .unwrap();
        ParfactorModel::new([x, y], [], vec![pf]).unwrap()
    }

    #[test]
    fn single_parfactor() {
        let m = parse_model("prv A\nparfactor g (A)\n0 1\n1 3\n").unwrap();
        let p = query(&m, &Query::marginal(GroundAtom::new("A", Vec::<String>::new()), true)).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
    }

    #[test]
    fn smokers_three_persons_matches_brute_force() {
        let m = smokers(&["alice", "bob", "eve"]);
        let joint = joint_distribution(&m, 20).unwrap();
        for atom in &joint.atoms {
            let ve = query(&m, &Query::marginal(atom.clone(), true)).unwrap();
            let bf = joint.marginal(atom, true).unwrap();
            assert!((ve - bf).abs() < 1e-9, "{atom}: {ve} vs {bf}");
        }
    }

    #[test]
    fn evidence_on_all_others_matches_conditional_row() {
        let m = smokers(&["alice", "bob"]);
        let joint = joint_distribution(&m, 20).unwrap();
        let target = GroundAtom::new("Smokes", ["bob"]);
        let mut evidence = Assignment::new();
        for (i, a) in joint.atoms.iter().enumerate() {
            if *a != target {
                evidence.insert(a.clone(), i % 2 == 0);
            }
        }
        let q = Query {
            target: (target.clone(), true),
            evidence: evidence.clone(),
        };
        let event = Assignment::from([(target, true)]);
        let bf = joint.conditional(&event, &evidence).unwrap();
        assert!((query(&m, &q).unwrap() - bf).abs() < 1e-9);
    }

    #[test]
    fn custom_order_agrees() {
        let m = smokers(&["alice", "bob", "eve"]);
        let q = Query::marginal(GroundAtom::new("Smokes", ["alice"]), true);
        let mut order = m.ground_atoms();
        order.reverse();
        let a = query(&m, &q).unwrap();
        let b = query_with(
            &m,
            &q,
            &QueryOptions {
                order: Order::Custom(order),
                ..Default::default()
            },
        )
        .unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn width_cap_is_enforced() {
        let m = smokers(&["alice", "bob", "eve"]);
        let q = Query::marginal(GroundAtom::new("Smokes", ["alice"]), true);
        let err = query_with(
            &m,
            &q,
            &QueryOptions {
                width_cap: 1,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
    }

    #[test]
    fn untouched_randvar_is_uniform() {
        let m = parse_model("prv A\nprv B\nparfactor g (A)\n0 1\n1 3\n").unwrap();
        let p = query(&m, &Query::marginal(GroundAtom::new("B", Vec::<String>::new()), false)).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn representative_queries_pick_smallest_constants() {
        let m = smokers(&["bob", "alice"]);
        let qs: Vec<String> = representative_queries(&m).iter().map(|q| q.to_string()).collect();
        assert_eq!(qs, ["Friends(alice,alice)=1", "Smokes(alice)=1"]);
        let empty = ParfactorModel::new([], [], vec![]).unwrap();
        assert!(representative_queries(&empty).is_empty());
    }

    #[test]
    fn identical_models_have_zero_error() {
        let m = smokers(&["alice", "bob"]);
        assert_eq!(mean_absolute_error(&m, &m, &representative_queries(&m)).unwrap(), 0.0);
    }

    #[test]
    fn query_parsing() {
        let m = smokers(&["alice", "bob"]);
        let q = parse_query("smokes(alice)=1 | friends(alice,bob)=0", m.logvars(), m.prvs()).unwrap();
        assert_eq!(q.to_string(), "Smokes(alice)=1 | Friends(alice,bob)=0");
        let err = parse_query("smokes(alice)=", m.logvars(), m.prvs()).unwrap_err();
        assert!(err.to_string().contains("end of line"), "{err}");
        let err = parse_query("smokes(alice) 1", m.logvars(), m.prvs()).unwrap_err();
        assert!(err.to_string().contains("'1'"), "{err}");
        let err = parse_query("smokes(carol)=1", m.logvars(), m.prvs()).unwrap_err();
        assert!(err.to_string().contains("carol"), "{err}");
        let err = parse_query("smokes(alice)=1 | smokes(alice)=0", m.logvars(), m.prvs()).unwrap_err();
        assert!(err.to_string().contains("evidence"), "{err}");
    }
}

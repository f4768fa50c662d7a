//! Canonical extraction of weighted minterms from a potential table, weight
//! buckets, and exact two-level minimization (Quine-McCluskey prime
//! implicants followed by Petrick's method).
//!
//! Positions follow the canonical row order: position 0 is the first
//! argument and the most significant bit of a row index.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::Parfactor;

/// Largest arity accepted by [`minimize`].
pub const MAX_MINIMIZE_ARITY: usize = 16;

/// Petrick expansions larger than this fall back to a greedy cover.
pub const PETRICK_TERM_CAP: usize = 1 << 16;

/// One full assignment of a parfactor's `arity` arguments, as a row index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Minterm {
    pub bits: u32,
    pub arity: usize,
}

impl Minterm {
    pub fn value(&self, pos: usize) -> bool {
        (self.bits >> (self.arity - 1 - pos)) & 1 == 1
    }
}

/// A conjunction of literals. Positions whose `care` bit is clear are
/// don't-cares; `value` is zero outside `care`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Implicant {
    pub care: u32,
    pub value: u32,
}

impl Implicant {
    pub fn minterm(bits: u32, arity: usize) -> Self {
        let care = if arity == 0 { 0 } else { u32::MAX >> (32 - arity) };
        Implicant { care, value: bits }
    }

    pub fn covers(&self, bits: u32) -> bool {
        bits & self.care == self.value
    }

    pub fn literal_count(&self) -> usize {
        self.care.count_ones() as usize
    }

    /// `Some(polarity)` when position `pos` is constrained.
    pub fn literal(&self, pos: usize, arity: usize) -> Option<bool> {
        let bit = 1u32 << (arity - 1 - pos);
        (self.care & bit != 0).then_some(self.value & bit != 0)
    }

    fn key(&self, bit: u32) -> u8 {
        let m = 1u32 << bit;
        match (self.care & m != 0, self.value & m != 0) {
            (true, false) => 0,
            (true, true) => 1,
            (false, _) => 2,
        }
    }
}

// Lexicographic over positions with `0 < 1 < don't-care`, position 0 first.
impl Ord for Implicant {
    fn cmp(&self, other: &Self) -> Ordering {
        for bit in (0..32).rev() {
            match self.key(bit).cmp(&other.key(bit)) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Implicant {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A formula in disjunctive normal form over `arity` positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoolFormula {
    pub arity: usize,
    pub implicants: Vec<Implicant>,
    /// False when the greedy fallback produced the cover.
    pub minimal: bool,
}

impl BoolFormula {
    pub fn eval(&self, bits: u32) -> bool {
        self.implicants.iter().any(|i| i.covers(bits))
    }

    pub fn eval_values(&self, values: &[bool]) -> bool {
        self.eval(values.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32))
    }

    pub fn is_tautology(&self) -> bool {
        self.implicants.iter().any(|i| i.care == 0)
    }

    /// Positions constrained by at least one implicant, ascending.
    pub fn used_positions(&self) -> Vec<usize> {
        let all = self.implicants.iter().fold(0u32, |acc, i| acc | i.care);
        (0..self.arity)
            .filter(|&p| all & (1 << (self.arity - 1 - p)) != 0)
            .collect()
    }

    /// Renders with `names[pos]` for atoms, e.g. `!a v (b ^ c)`.
    pub fn render(&self, names: &[String]) -> String {
        if self.is_tautology() {
            return "true".to_string();
        }
        let multi = self.implicants.len() > 1;
        let terms: Vec<String> = self
            .implicants
            .iter()
            .map(|imp| {
                let lits: Vec<String> = (0..self.arity)
                    .filter_map(|p| {
                        imp.literal(p, self.arity)
                            .map(|v| if v { names[p].clone() } else { format!("!{}", names[p]) })
                    })
                    .collect();
                if multi && lits.len() > 1 {
                    format!("({})", lits.join(" ^ "))
                } else {
                    lits.join(" ^ ")
                }
            })
            .collect();
        terms.join(" v ")
    }
}

/// Total number of literal occurrences.
pub fn formula_length(f: &BoolFormula) -> usize {
    f.implicants.iter().map(Implicant::literal_count).sum()
}

/// One `(minterm, ln potential)` pair per row, in row order.
pub fn canonical_extract(pf: &Parfactor) -> Result<Vec<(Minterm, f64)>> {
    canonical_extract_table(pf.potentials(), pf.arity())
}

pub fn canonical_extract_table(potentials: &[f64], arity: usize) -> Result<Vec<(Minterm, f64)>> {
    if potentials.len() != 1 << arity {
        return Err(Error::invalid("table length does not match arity"));
    }
    potentials
        .iter()
        .enumerate()
        .map(|(row, &p)| {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid(format!("potential {p} at row {row} has no logarithm")));
            }
            Ok((
                Minterm {
                    bits: row as u32,
                    arity,
                },
                p.ln(),
            ))
        })
        .collect()
}

/// Minterms sharing one mapped potential.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightBucket {
    pub potential: f64,
    pub weight: f64,
    pub minterms: BTreeSet<Minterm>,
}

/// Groups the rows of a (reduced) table by exact potential value. Buckets
/// come out in ascending weight order.
pub fn bucket_by_weight(potentials: &[f64], arity: usize) -> Result<Vec<WeightBucket>> {
    let pairs = canonical_extract_table(potentials, arity)?;
    let mut by_value: BTreeMap<u64, (f64, BTreeSet<Minterm>)> = BTreeMap::new();
    for ((m, _), &p) in pairs.iter().zip(potentials) {
        // Positive finite doubles order like their bit patterns.
        by_value
            .entry(p.to_bits())
            .or_insert_with(|| (p, BTreeSet::new()))
            .1
            .insert(*m);
    }
    Ok(by_value
        .into_values()
        .map(|(p, minterms)| WeightBucket {
            potential: p,
            weight: p.ln(),
            minterms,
        })
        .collect())
}

/// Prime implicants of the function whose on-set is `minterms`.
pub fn prime_implicants(minterms: &BTreeSet<u32>, arity: usize) -> Vec<Implicant> {
    let mut current: BTreeSet<Implicant> = minterms.iter().map(|&m| Implicant::minterm(m, arity)).collect();
    let mut primes = Vec::new();
    while !current.is_empty() {
        let mut next = BTreeSet::new();
        let mut merged = BTreeSet::new();
        for imp in &current {
            let mut care = imp.care;
            while care != 0 {
                let bit = care & care.wrapping_neg();
                care &= care - 1;
                let partner = Implicant {
                    care: imp.care,
                    value: imp.value ^ bit,
                };
                if current.contains(&partner) {
                    merged.insert(*imp);
                    next.insert(Implicant {
                        care: imp.care & !bit,
                        value: imp.value & !bit,
                    });
                }
            }
        }
        primes.extend(current.iter().filter(|i| !merged.contains(i)));
        current = next;
    }
    primes.sort();
    primes
}

/// Minimal DNF for exactly the bucket's minterms (no don't-cares).
///
/// Covers are ranked by implicant count, then literal count, then the sorted
/// implicant list. Essential primes are taken first and Petrick's method
/// resolves the rest; when the expansion would exceed
/// [`PETRICK_TERM_CAP`] products a greedy cover is returned with
/// `minimal = false`.
pub fn minimize(bucket: &WeightBucket) -> Result<BoolFormula> {
    let arity = bucket
        .minterms
        .iter()
        .next()
        .map(|m| m.arity)
        .ok_or_else(|| Error::invalid("cannot minimize an empty bucket"))?;
    let set: BTreeSet<u32> = bucket.minterms.iter().map(|m| m.bits).collect();
    minimize_minterms(&set, arity)
}

pub fn minimize_minterms(minterms: &BTreeSet<u32>, arity: usize) -> Result<BoolFormula> {
    if arity > MAX_MINIMIZE_ARITY {
        return Err(Error::invalid(format!(
            "arity {arity} exceeds the minimization limit of {MAX_MINIMIZE_ARITY}; \
             use the canonical output without minimization"
        )));
    }
    if minterms.is_empty() {
        return Err(Error::invalid("cannot minimize an empty minterm set"));
    }
    let primes = prime_implicants(minterms, arity);

    let covering: BTreeMap<u32, Vec<usize>> = minterms
        .iter()
        .map(|&m| (m, (0..primes.len()).filter(|&i| primes[i].covers(m)).collect()))
        .collect();
    let mut chosen: BTreeSet<usize> = covering.values().filter(|c| c.len() == 1).map(|c| c[0]).collect();
    let remaining: Vec<&Vec<usize>> = covering
        .iter()
        .filter(|(m, _)| !chosen.iter().any(|&i| primes[i].covers(**m)))
        .map(|(_, c)| c)
        .collect();

    let mut minimal = true;
    if !remaining.is_empty() {
        match petrick(&remaining, &primes) {
            Some(extra) => chosen.extend(extra),
            None => {
                minimal = false;
                chosen.extend(greedy(&remaining, &primes));
            }
        }
    }
    let mut implicants: Vec<Implicant> = chosen.into_iter().map(|i| primes[i]).collect();
    implicants.sort();
    Ok(BoolFormula {
        arity,
        implicants,
        minimal,
    })
}

type Product = BTreeSet<usize>;

fn petrick(clauses: &[&Vec<usize>], primes: &[Implicant]) -> Option<Product> {
    let mut clauses: Vec<&Vec<usize>> = clauses.to_vec();
    clauses.sort_by_key(|c| c.len());
    let mut products: Vec<Product> = vec![Product::new()];
    for clause in clauses {
        let mut next: BTreeSet<Product> = BTreeSet::new();
        for prod in &products {
            if clause.iter().any(|p| prod.contains(p)) {
                next.insert(prod.clone());
                continue;
            }
            for &p in clause.iter() {
                let mut q = prod.clone();
                q.insert(p);
                next.insert(q);
            }
            if next.len() > PETRICK_TERM_CAP {
                return None;
            }
        }
        products = absorb(next);
    }
    let rank = |p: &Product| {
        let literals: usize = p.iter().map(|&i| primes[i].literal_count()).sum();
        let mut imps: Vec<Implicant> = p.iter().map(|&i| primes[i]).collect();
        imps.sort();
        (p.len(), literals, imps)
    };
    products.into_iter().min_by(|a, b| rank(a).cmp(&rank(b)))
}

/// Drops every product that contains another product.
fn absorb(products: BTreeSet<Product>) -> Vec<Product> {
    let mut by_size: Vec<Product> = products.into_iter().collect();
    by_size.sort_by_key(|p| p.len());
    let mut kept: Vec<Product> = Vec::new();
    for p in by_size {
        if !kept.iter().any(|k| k.is_subset(&p)) {
            kept.push(p);
        }
    }
    kept
}

fn greedy(clauses: &[&Vec<usize>], primes: &[Implicant]) -> Product {
    let mut open: Vec<&Vec<usize>> = clauses.to_vec();
    let mut picked = Product::new();
    while !open.is_empty() {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for c in &open {
            for &p in c.iter() {
                *counts.entry(p).or_default() += 1;
            }
        }
        let best = counts
            .into_iter()
            .max_by(|a, b| {
                a.1.cmp(&b.1)
                    .then(primes[b.0].literal_count().cmp(&primes[a.0].literal_count()))
                    .then(primes[b.0].cmp(&primes[a.0]))
            })
            .map(|(p, _)| p)
            .expect("open clauses are non-empty");
        picked.insert(best);
        open.retain(|c| !c.contains(&best));
    }
    picked
}

#![allow(dead_code)]

use std::collections::BTreeSet;

use cofe::model::{Constraint, Logvar, Parfactor, ParfactorModel, Prv};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SKEWED: [f64; 8] = [1.0, 4.7, 4.8, 4.9, 5.0, 5.1, 5.2, 5.3];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random model with at most 3 parfactors of at most 3 Boolean PRVs each,
/// logvars X and Y sharing a domain of 1 or 2 constants. Some parfactors get
/// an explicit constraint.
pub fn random_model(rng: &mut ChaCha8Rng) -> ParfactorModel {
    let size = rng.random_range(1..=2);
    let consts: Vec<String> = ["a", "b"][..size].iter().map(|s| s.to_string()).collect();
    let x = Logvar::new("X", consts.clone()).unwrap();
    let y = Logvar::new("Y", consts.clone()).unwrap();
    let pool = [
        Prv::propositional("A"),
        Prv::new("B", ["X"]),
        Prv::new("B", ["Y"]),
        Prv::new("C", ["X", "Y"]),
        Prv::new("C", ["Y", "X"]),
        Prv::new("D", ["X"]),
    ];
    let declared = [
        Prv::propositional("A"),
        Prv::new("B", ["X"]),
        Prv::new("C", ["X", "Y"]),
        Prv::new("D", ["X"]),
    ];
    let count = rng.random_range(1..=3);
    let mut parfactors = Vec::new();
    for i in 0..count {
        let n = rng.random_range(1..=3);
        let args: Vec<Prv> = pool.choose_multiple(rng, n).cloned().collect();
        let pot: Vec<f64> = (0..1 << n).map(|_| rng.random_range(0.1..10.0)).collect();
        let lvs = cofe::model::logvars_of(&args);
        let constraint = if !lvs.is_empty() && rng.random_bool(0.3) {
            let domains = [x.clone(), y.clone()]
                .into_iter()
                .map(|l| (l.name().to_string(), l))
                .collect();
            let all = Constraint::top(lvs.clone()).enumerate(&domains).unwrap();
            let keep: BTreeSet<Vec<String>> = all.into_iter().filter(|_| rng.random_bool(0.6)).collect();
            Constraint::explicit(lvs, keep)
        } else {
            Constraint::top(lvs)
        };
        parfactors.push(Parfactor::with_constraint(format!("g{i}"), args, pot, constraint).unwrap());
    }
    ParfactorModel::new([x, y], declared, parfactors).unwrap()
}

/// `model` with every table multiplied by `c` for parfactor `which`.
pub fn scaled(model: &ParfactorModel, which: usize, c: f64) -> ParfactorModel {
    let tables = model
        .parfactors()
        .iter()
        .enumerate()
        .map(|(i, pf)| {
            let k = if i == which { c } else { 1.0 };
            pf.potentials().iter().map(|p| p * k).collect()
        })
        .collect();
    model.with_tables(tables).unwrap()
}

/// Minimum number of cubes covering exactly `on` over `n` variables, by
/// exhaustive search over subsets of the cubes contained in `on`.
pub fn brute_min_cover(on: &BTreeSet<u32>, n: usize) -> usize {
    let full = (1u32 << n) - 1;
    let mut cubes: Vec<u32> = Vec::new(); // bitmask over minterms
    for care in 0..=full {
        for value in 0..=full {
            if value & !care != 0 {
                continue;
            }
            let members: Vec<u32> = (0..=full).filter(|m| m & care == value).collect();
            if members.iter().all(|m| on.contains(m)) {
                cubes.push(members.iter().fold(0, |acc, m| acc | 1 << m));
            }
        }
    }
    let target = on.iter().fold(0u32, |acc, m| acc | 1 << m);
    for k in 1..=on.len() {
        if covers_with(&cubes, target, k, 0, 0) {
            return k;
        }
    }
    unreachable!("minterms cover themselves")
}

fn covers_with(cubes: &[u32], target: u32, left: usize, start: usize, acc: u32) -> bool {
    if acc == target {
        return true;
    }
    if left == 0 {
        return false;
    }
    (start..cubes.len()).any(|i| covers_with(cubes, target, left - 1, i + 1, acc | cubes[i]))
}

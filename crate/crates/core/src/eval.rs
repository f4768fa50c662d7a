//! Datasets, Gaussian noise injection and the noise-robustness experiment.

use std::fmt::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{mean_absolute_error, representative_queries};
use crate::metrics::hellinger;
use crate::mln::{cofe_with, CofeOptions, StrategyChoice};
use crate::model::{Logvar, Parfactor, ParfactorModel, Prv};
use crate::reduction::{ReductionParams, Strategy};

/// Noised potentials are clamped to at least this value.
pub const NOISE_FLOOR: f64 = 1e-6;

pub const SMOKERS_POTENTIAL: f64 = 7.39;

const PERSONS: [&str; 10] = [
    "alice", "bob", "carol", "dave", "eve", "frank", "grace", "heidi", "ivan", "judy",
];

fn person(i: usize) -> String {
    PERSONS.get(i).map_or_else(|| format!("p{i:03}"), |s| s.to_string())
}

/// ψ(Friends(X,Y), Smokes(X), Smokes(Y)) over `size` persons: 7.39 when all
/// three are true, 1 otherwise.
pub fn build_smokers(size: usize) -> Result<ParfactorModel> {
    if size < 2 {
        return Err(Error::invalid(format!(
            "smokers domain size must be at least 2, got {size}"
        )));
    }
    let persons: Vec<String> = (0..size).map(person).collect();
    let pot = (0..8).map(|r| if r == 7 { SMOKERS_POTENTIAL } else { 1.0 }).collect();
    let psi = Parfactor::new(
        "psi",
        vec![
            Prv::new("Friends", ["X", "Y"]),
            Prv::new("Smokes", ["X"]),
            Prv::new("Smokes", ["Y"]),
        ],
        pot,
    )?;
    ParfactorModel::new(
        [Logvar::new("X", persons.clone())?, Logvar::new("Y", persons)?],
        [],
        vec![psi],
    )
}

/// Nine parfactors g1..g9 over disjoint randvars `Ai, Bi, Ci`; the first
/// i-1 rows of g_i are 1 and the rest are 2.
pub fn build_artificial() -> Result<ParfactorModel> {
    let parfactors = (1..=9)
        .map(|i| {
            let args = ["A", "B", "C"]
                .iter()
                .map(|p| Prv::propositional(format!("{p}{i}")))
                .collect();
            let pot = (0..8).map(|r| if r < i - 1 { 1.0 } else { 2.0 }).collect();
            Parfactor::new(format!("g{i}"), args, pot)
        })
        .collect::<Result<Vec<_>>>()?;
    ParfactorModel::new([], [], parfactors)
}

/// Adds N(0, sigma²) to every potential in parfactor then row order,
/// clamping at [`NOISE_FLOOR`].
pub fn add_noise(model: &ParfactorModel, sigma: f64, rng: &mut ChaCha8Rng) -> Result<ParfactorModel> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(model.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let tables = model
        .parfactors()
        .iter()
        .map(|pf| {
            pf.potentials()
                .iter()
                .map(|p| (p + normal.sample(rng)).max(NOISE_FLOOR))
                .collect()
        })
        .collect();
    model.with_tables(tables)
}

/// Generator for repetition `rep` of a run seeded with `seed`.
pub fn repetition_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Smokers,
    Artificial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: Dataset,
    pub sigma: f64,
    pub params: ReductionParams,
    pub strategy: StrategyChoice,
    pub seed: u64,
    pub repetitions: usize,
    pub smokers_domain_size: usize,
}

pub const PRESETS: [&str; 4] = ["smokers1", "smokers2", "art1", "art2"];
pub const DEFAULT_REPETITIONS: usize = 20;
pub const DEFAULT_SMOKERS_DOMAIN: usize = 3;

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<ExperimentConfig> {
        let (dataset, sigma, eps, theta_d) = match name {
            "smokers1" => (Dataset::Smokers, 0.5, 0.3, 2.0),
            "smokers2" => (Dataset::Smokers, 1.0, 0.3, 2.0),
            "art1" => (Dataset::Artificial, 0.1, 0.05, 0.2),
            "art2" => (Dataset::Artificial, 0.2, 0.1, 0.4),
            _ => {
                return Err(Error::invalid(format!(
                    "unknown preset '{name}', expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(ExperimentConfig {
            name: name.to_string(),
            dataset,
            sigma,
            params: ReductionParams::new(eps, theta_d, 2)?,
            strategy: StrategyChoice::Auto,
            seed: 0,
            repetitions: DEFAULT_REPETITIONS,
            smokers_domain_size: DEFAULT_SMOKERS_DOMAIN,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        if self.dataset == Dataset::Smokers && self.smokers_domain_size < 2 {
            return Err(Error::invalid("smokers domain size must be at least 2"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<ParfactorModel> {
        match self.dataset {
            Dataset::Smokers => build_smokers(self.smokers_domain_size),
            Dataset::Artificial => build_artificial(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParfactorRecord {
    pub parfactor: String,
    pub h_original_noised: f64,
    pub h_original_mapped: f64,
    pub h_noised_mapped: f64,
    pub formula_count: usize,
    pub formula_lengths: Vec<usize>,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepetitionReport {
    pub repetition: usize,
    pub parfactors: Vec<ParfactorRecord>,
    /// Mean absolute query error, mapped vs. noised.
    pub query_error: f64,
}

/// Median and quartiles (linear interpolation) plus extremes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Stats {
            median: quantile(&v, 0.5),
            q1: quantile(&v, 0.25),
            q3: quantile(&v, 0.75),
            min: v.first().copied().unwrap_or(f64::NAN),
            max: v.last().copied().unwrap_or(f64::NAN),
        }
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParfactorSummary {
    pub parfactor: String,
    pub h_original_noised: Stats,
    pub h_original_mapped: Stats,
    pub h_noised_mapped: Stats,
    pub formula_count: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub query_error: Stats,
    pub parfactors: Vec<ParfactorSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub noise_floor: f64,
    pub repetitions: Vec<RepetitionReport>,
    pub summary: Summary,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }

    /// One row per parfactor per repetition.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record([
            "repetition",
            "parfactor",
            "strategy",
            "h_original_noised",
            "h_original_mapped",
            "h_noised_mapped",
            "formula_count",
            "formula_lengths",
            "query_error",
        ])
        .map_err(io)?;
        for rep in &self.repetitions {
            for p in &rep.parfactors {
                let lengths: Vec<String> = p.formula_lengths.iter().map(usize::to_string).collect();
                w.write_record([
                    rep.repetition.to_string(),
                    p.parfactor.clone(),
                    p.strategy.to_string(),
                    p.h_original_noised.to_string(),
                    p.h_original_mapped.to_string(),
                    p.h_noised_mapped.to_string(),
                    p.formula_count.to_string(),
                    lengths.join(";"),
                    rep.query_error.to_string(),
                ])
                .map_err(io)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Median of the three distances per parfactor, tab separated.
    pub fn fig3_table(&self) -> String {
        let mut out = String::from("parfactor\toriginal_noised\toriginal_mapped\tnoised_mapped\n");
        for p in &self.summary.parfactors {
            let _ = writeln!(
                out,
                "{}\t{:.6}\t{:.6}\t{:.6}",
                p.parfactor, p.h_original_noised.median, p.h_original_mapped.median, p.h_noised_mapped.median
            );
        }
        out
    }
}

/// Noise, extraction, distances and query error for one repetition.
pub fn run_repetition(config: &ExperimentConfig, original: &ParfactorModel, rep: usize) -> Result<RepetitionReport> {
    let mut rng = repetition_rng(config.seed, rep);
    let noised = add_noise(original, config.sigma, &mut rng)?;
    let opts = CofeOptions {
        strategy: config.strategy,
        drop_zero_weights: false,
    };
    let out = cofe_with(&noised, &config.params, &opts)?;
    let mapped = out.reduced_model(&noised)?;
    let mut parfactors = Vec::new();
    for ((o, n), ext) in original
        .parfactors()
        .iter()
        .zip(noised.parfactors())
        .zip(&out.parfactors)
    {
        let m = &ext.reduction.mapped;
        parfactors.push(ParfactorRecord {
            parfactor: o.name().to_string(),
            h_original_noised: hellinger(o.potentials(), n.potentials())?,
            h_original_mapped: hellinger(o.potentials(), m)?,
            h_noised_mapped: hellinger(n.potentials(), m)?,
            formula_count: ext.formula_lengths.len(),
            formula_lengths: ext.formula_lengths.clone(),
            strategy: ext.reduction.strategy,
        });
    }
    let query_error = mean_absolute_error(&mapped, &noised, &representative_queries(original))?;
    Ok(RepetitionReport {
        repetition: rep,
        parfactors,
        query_error,
    })
}

/// Runs every repetition (in parallel) and aggregates them.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let original = config.build_model()?;
    let repetitions = (0..config.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(config, &original, rep))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&original, &repetitions);
    Ok(ExperimentReport {
        config: config.clone(),
        noise_floor: NOISE_FLOOR,
        repetitions,
        summary,
    })
}

fn summarize(original: &ParfactorModel, reps: &[RepetitionReport]) -> Summary {
    let errors: Vec<f64> = reps.iter().map(|r| r.query_error).collect();
    let parfactors = original
        .parfactors()
        .iter()
        .enumerate()
        .map(|(i, pf)| {
            let col = |f: fn(&ParfactorRecord) -> f64| -> Stats {
                Stats::of(&reps.iter().map(|r| f(&r.parfactors[i])).collect::<Vec<_>>())
            };
            ParfactorSummary {
                parfactor: pf.name().to_string(),
                h_original_noised: col(|p| p.h_original_noised),
                h_original_mapped: col(|p| p.h_original_mapped),
                h_noised_mapped: col(|p| p.h_noised_mapped),
                formula_count: col(|p| p.formula_count as f64),
            }
        })
        .collect();
    Summary {
        query_error: Stats::of(&errors),
        parfactors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smokers_table() {
        let m = build_smokers(3).unwrap();
        let pf = &m.parfactors()[0];
        assert_eq!(pf.size(), 8);
        assert_eq!(pf.potentials()[7], 7.39);
        assert_eq!(pf.potentials()[3], 1.0);
        assert_eq!(m.logvars()["X"].domain(), ["alice", "bob", "carol"]);
        assert!(build_smokers(1).is_err());
        assert_eq!(build_smokers(12).unwrap().logvars()["X"].domain().len(), 12);
    }

    #[test]
    fn artificial_tables() {
        let m = build_artificial().unwrap();
        let pfs = m.parfactors();
        assert_eq!(pfs.len(), 9);
        assert_eq!(pfs[0].potentials(), [2.0; 8]);
        assert_eq!(pfs[8].potentials(), [1.0; 8]);
        assert_eq!(pfs[4].potentials(), [1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
        assert_eq!(m.ground_atoms().len(), 27);
    }

    #[test]
    fn zero_noise_is_identity() {
        let m = build_artificial().unwrap();
        assert_eq!(add_noise(&m, 0.0, &mut repetition_rng(1, 0)).unwrap(), m);
    }

    #[test]
    fn noise_is_seeded() {
        let m = build_smokers(2).unwrap();
        let a = add_noise(&m, 0.5, &mut repetition_rng(7, 3)).unwrap();
        let b = add_noise(&m, 0.5, &mut repetition_rng(7, 3)).unwrap();
        let c = add_noise(&m, 0.5, &mut repetition_rng(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_has_zero_mean() {
        let normal = Normal::new(0.0, 0.5).unwrap();
        let mut rng = repetition_rng(42, 0);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| normal.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn noise_respects_floor() {
        let m = build_artificial().unwrap();
        let noisy = add_noise(&m, 50.0, &mut repetition_rng(3, 0)).unwrap();
        let all: Vec<f64> = noisy
            .parfactors()
            .iter()
            .flat_map(|p| p.potentials().to_vec())
            .collect();
        assert!(all.iter().all(|&p| p >= NOISE_FLOOR));
        assert!(all.contains(&NOISE_FLOOR));
    }

    #[test]
    fn quartiles() {
        let s = Stats::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((s.median, s.q1, s.q3, s.min, s.max), (3.0, 2.0, 4.0, 1.0, 5.0));
        assert_eq!(Stats::of(&[1.0, 2.0]).median, 1.5);
    }

    #[test]
    fn zero_sigma_run_measures_reduction_distance() {
        let mut cfg = ExperimentConfig::preset("art1").unwrap();
        cfg.sigma = 0.0;
        cfg.repetitions = 2;
        let r = run_experiment(&cfg).unwrap();
        for rep in &r.repetitions {
            for p in &rep.parfactors {
                assert_eq!(p.h_original_noised, 0.0);
                assert_eq!(p.h_original_mapped, p.h_noised_mapped);
            }
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let mut cfg = ExperimentConfig::preset("smokers1").unwrap();
        cfg.seed = 11;
        cfg.repetitions = 4;
        cfg.smokers_domain_size = 2;
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let csv = a.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 1 + 4);
        assert!(a.fig3_table().starts_with("parfactor\t"));
    }

    #[test]
    fn unknown_preset() {
        assert!(ExperimentConfig::preset("smokers3").is_err());
    }
}

//! Reduction of the number of distinct potentials in a table under a
//! distance budget.
//!
//! Two strategies ship. The quantile strategy sorts the potentials, cuts them
//! into `q` blocks and replaces each block by its mean, raising `q` from 1
//! until the distance to the original fits the budget. The clustering
//! strategy runs DBSCAN on the potentials and replaces each cluster by its
//! mean. [`select_reduction`] runs both and keeps the result with the fewest
//! distinct values.

mod dbscan;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{distinct_count, hellinger, DistanceFn};

pub use dbscan::{dbscan_1d, Label};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    /// Largest allowed distance between original and mapped table.
    pub epsilon: f64,
    /// DBSCAN neighborhood radius.
    pub theta_d: f64,
    /// DBSCAN core threshold; a point counts itself.
    pub theta_n: usize,
}

impl ReductionParams {
    pub fn new(epsilon: f64, theta_d: f64, theta_n: usize) -> Result<Self> {
        let p = ReductionParams {
            epsilon,
            theta_d,
            theta_n,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!("epsilon {} must lie in [0, 1]", self.epsilon)));
        }
        if !(self.theta_d.is_finite() && self.theta_d > 0.0) {
            return Err(Error::invalid(format!("theta_d {} must be positive", self.theta_d)));
        }
        if self.theta_n < 1 {
            return Err(Error::invalid("theta_n must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Cluster,
    Quantile(usize),
    Identity,
}

impl Strategy {
    fn rank(self) -> u8 {
        match self {
            Strategy::Cluster => 0,
            Strategy::Quantile(_) => 1,
            Strategy::Identity => 2,
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Cluster => write!(f, "cluster"),
            Strategy::Quantile(q) => write!(f, "quantile(q={q})"),
            Strategy::Identity => write!(f, "identity"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionResult {
    /// Reduced table, same length and row order as the input.
    pub mapped: Vec<f64>,
    /// Groups of row indices; together they partition the rows.
    pub partition: Vec<Vec<usize>>,
    /// One mean per group.
    pub representatives: Vec<f64>,
    pub strategy: Strategy,
    pub distance: f64,
}

impl ReductionResult {
    pub fn distinct_count(&self) -> usize {
        distinct_count(&self.mapped)
    }

    /// Every row in its own group, table unchanged.
    pub fn identity(potentials: &[f64]) -> ReductionResult {
        ReductionResult {
            mapped: potentials.to_vec(),
            partition: (0..potentials.len()).map(|i| vec![i]).collect(),
            representatives: potentials.to_vec(),
            strategy: Strategy::Identity,
            distance: 0.0,
        }
    }

    fn from_groups(
        potentials: &[f64],
        mut groups: Vec<Vec<usize>>,
        strategy: Strategy,
        distance: DistanceFn,
    ) -> Result<ReductionResult> {
        let mut mapped = vec![0.0; potentials.len()];
        let mut representatives = Vec::with_capacity(groups.len());
        for g in &mut groups {
            g.sort_unstable();
            // Sum in value order so the mean depends only on the multiset.
            let mut vals: Vec<f64> = g.iter().map(|&i| potentials[i]).collect();
            vals.sort_by(f64::total_cmp);
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            for &i in g.iter() {
                mapped[i] = mean;
            }
            representatives.push(mean);
        }
        let d = distance(potentials, &mapped)?;
        Ok(ReductionResult {
            mapped,
            partition: groups,
            representatives,
            strategy,
            distance: d,
        })
    }
}

/// Row indices sorted by potential, ties by index.
fn sorted_rows(potentials: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..potentials.len()).collect();
    order.sort_by(|&a, &b| potentials[a].total_cmp(&potentials[b]).then(a.cmp(&b)));
    order
}

/// Split the sorted table into `q` contiguous quantile blocks.
///
/// Sorted position `p` (1-based) of `N` lands in block `ceil(p * q / N)`.
/// A run of equal values that straddles a boundary moves wholesale into the
/// block holding most of its occurrences (the lower block on ties), so equal
/// potentials always share a group. Blocks emptied by that move are dropped.
pub fn quantile_groups(potentials: &[f64], q: usize) -> Vec<Vec<usize>> {
    let n = potentials.len();
    if n == 0 || q == 0 {
        return Vec::new();
    }
    let order = sorted_rows(potentials);
    let mut block: Vec<usize> = (1..=n).map(|p| (p * q).div_ceil(n)).collect();

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && potentials[order[end]] == potentials[order[start]] {
            end += 1;
        }
        if block[start] != block[end - 1] {
            let mut best = (0usize, block[start]);
            let mut i = start;
            while i < end {
                let b = block[i];
                let count = block[i..end].iter().take_while(|&&x| x == b).count();
                if count > best.0 {
                    best = (count, b);
                }
                i += count;
            }
            block[start..end].fill(best.1);
        }
        start = end;
    }

    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last = None;
    for (pos, &row) in order.iter().enumerate() {
        if last != Some(block[pos]) {
            groups.push(Vec::new());
            last = Some(block[pos]);
        }
        groups.last_mut().expect("pushed above").push(row);
    }
    groups
}

/// Quantile mapping for a fixed `q`.
pub fn quantile_mapping(potentials: &[f64], q: usize) -> Result<ReductionResult> {
    ReductionResult::from_groups(
        potentials,
        quantile_groups(potentials, q),
        Strategy::Quantile(q),
        hellinger,
    )
}

/// Smallest `q` in `1..size` whose mapping is within `epsilon`, or the
/// identity when none is.
pub fn reduce_quantile(potentials: &[f64], epsilon: f64) -> Result<ReductionResult> {
    reduce_quantile_with(potentials, epsilon, hellinger)
}

pub fn reduce_quantile_with(potentials: &[f64], epsilon: f64, distance: DistanceFn) -> Result<ReductionResult> {
    for q in 1..potentials.len() {
        let r = ReductionResult::from_groups(
            potentials,
            quantile_groups(potentials, q),
            Strategy::Quantile(q),
            distance,
        )?;
        if r.distance <= epsilon {
            return Ok(r);
        }
    }
    Ok(ReductionResult::identity(potentials))
}

/// DBSCAN groups; noise points become singletons. Groups are ordered by
/// their smallest value.
pub fn cluster_groups(potentials: &[f64], theta_d: f64, theta_n: usize) -> Vec<Vec<usize>> {
    let labels = dbscan_1d(potentials, theta_d, theta_n);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (row, label) in labels.iter().enumerate() {
        match label.cluster() {
            Some(c) => {
                if clusters.len() <= c {
                    clusters.resize(c + 1, Vec::new());
                }
                clusters[c].push(row);
            }
            None => groups.push(vec![row]),
        }
    }
    groups.extend(clusters);
    let min_of = |g: &Vec<usize>| g.iter().map(|&i| potentials[i]).fold(f64::INFINITY, f64::min);
    groups.sort_by(|a, b| min_of(a).total_cmp(&min_of(b)).then(a[0].cmp(&b[0])));
    groups
}

/// Cluster-mean mapping. The budget is not applied here; see
/// [`select_reduction`].
pub fn reduce_cluster(potentials: &[f64], params: &ReductionParams) -> Result<ReductionResult> {
    reduce_cluster_with(potentials, params, hellinger)
}

pub fn reduce_cluster_with(
    potentials: &[f64],
    params: &ReductionParams,
    distance: DistanceFn,
) -> Result<ReductionResult> {
    ReductionResult::from_groups(
        potentials,
        cluster_groups(potentials, params.theta_d, params.theta_n),
        Strategy::Cluster,
        distance,
    )
}

/// Runs both strategies and keeps the admissible result with the fewest
/// distinct values, then the smaller distance, then cluster before quantile.
pub fn select_reduction(potentials: &[f64], params: &ReductionParams) -> Result<ReductionResult> {
    select_reduction_with(potentials, params, hellinger)
}

pub fn select_reduction_with(
    potentials: &[f64],
    params: &ReductionParams,
    distance: DistanceFn,
) -> Result<ReductionResult> {
    params.validate()?;
    let cluster = reduce_cluster_with(potentials, params, distance)?;
    let quantile = reduce_quantile_with(potentials, params.epsilon, distance)?;
    let best = [cluster, quantile]
        .into_iter()
        .filter(|r| r.strategy != Strategy::Identity && r.distance <= params.epsilon)
        .min_by(compare_results);
    Ok(best.unwrap_or_else(|| ReductionResult::identity(potentials)))
}

fn compare_results(a: &ReductionResult, b: &ReductionResult) -> Ordering {
    a.distinct_count()
        .cmp(&b.distinct_count())
        .then(a.distance.total_cmp(&b.distance))
        .then(a.strategy.rank().cmp(&b.strategy.rank()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_ONE: [f64; 8] = [1.0, 4.7, 4.8, 4.9, 5.0, 5.1, 5.2, 5.3];

    fn smokers_psi() -> Vec<f64> {
        let mut t = vec![1.0; 8];
        t[7] = 7.39;
        t
    }

    #[test]
    fn table_one_quartiles() {
        let groups = quantile_groups(&TABLE_ONE, 4);
        assert_eq!(groups, vec![vec![0, 1], vec![2, 3], vec![4, 5], vec![6, 7]]);
        let r = quantile_mapping(&TABLE_ONE, 4).unwrap();
        let expect = [2.85, 4.85, 5.05, 5.25];
        for (got, want) in r.representatives.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(r.distinct_count(), 4);
    }

    #[test]
    fn quantile_stops_at_smallest_feasible_q() {
        // Oracle distances (mpmath): q=3 -> 0.0990060, q=4 -> 0.0989191.
        let r = reduce_quantile(&TABLE_ONE, 0.09895).unwrap();
        assert_eq!(r.strategy, Strategy::Quantile(4));
        assert!((r.distance - 0.098_919_068_201_480_88).abs() < 1e-12);
        let r = reduce_quantile(&TABLE_ONE, 0.2).unwrap();
        assert_eq!(r.strategy, Strategy::Quantile(1));
        assert_eq!(r.distinct_count(), 1);
        assert!((r.mapped[0] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn quantile_falls_back_to_identity() {
        let r = reduce_quantile(&TABLE_ONE, 0.001).unwrap();
        assert_eq!(r.strategy, Strategy::Identity);
        assert_eq!(r.mapped, TABLE_ONE);
        let r = reduce_quantile(&[3.0], 1.0).unwrap();
        assert_eq!(r.strategy, Strategy::Identity);
    }

    #[test]
    fn equal_values_share_a_quantile_block() {
        let t = smokers_psi();
        let groups = quantile_groups(&t, 2);
        assert_eq!(groups, vec![vec![0, 1, 2, 3, 4, 5, 6], vec![7]]);
        let t = [1.0, 2.0, 2.0, 2.0, 3.0, 4.0];
        // Blocks by position: {1,2,2} {2,3,4}; the run of 2s moves to block 1.
        assert_eq!(quantile_groups(&t, 2), vec![vec![0, 1, 2, 3], vec![4, 5]]);
    }

    #[test]
    fn table_one_clusters() {
        let p = ReductionParams::new(0.3, 1.0, 1).unwrap();
        let r = reduce_cluster(&TABLE_ONE, &p).unwrap();
        assert_eq!(r.partition, vec![vec![0], vec![1, 2, 3, 4, 5, 6, 7]]);
        assert_eq!(r.representatives[0], 1.0);
        assert!((r.representatives[1] - 5.0).abs() < 1e-12);
        assert!((r.distance - 0.013_950_443_485_740_43).abs() < 1e-14);
    }

    #[test]
    fn constant_table_is_one_cluster() {
        let p = ReductionParams::new(0.0, 0.5, 2).unwrap();
        let r = reduce_cluster(&[3.0; 4], &p).unwrap();
        assert_eq!(r.partition.len(), 1);
        assert_eq!(r.mapped, vec![3.0; 4]);
    }

    #[test]
    fn noise_points_stay_put() {
        let p = ReductionParams::new(1.0, 0.2, 2).unwrap();
        let r = reduce_cluster(&[1.0, 1.1, 1.2, 7.4], &p).unwrap();
        assert_eq!(r.mapped[3], 7.4);
        assert_eq!(r.partition, vec![vec![0, 1, 2], vec![3]]);
    }

    #[test]
    fn selector_prefers_clusters_on_table_one() {
        // At epsilon 0.05 quantiles need q = 5 (distance 0.00322).
        let p = ReductionParams::new(0.05, 1.0, 1).unwrap();
        let r = select_reduction(&TABLE_ONE, &p).unwrap();
        assert_eq!(r.strategy, Strategy::Cluster);
        assert_eq!(r.distinct_count(), 2);
        let q = reduce_quantile(&TABLE_ONE, 0.05).unwrap();
        assert_eq!(q.strategy, Strategy::Quantile(5));
    }

    #[test]
    fn selector_picks_fewer_values_even_from_quantiles() {
        // At epsilon 0.3 a single quantile block (distance 0.1376) wins.
        let p = ReductionParams::new(0.3, 1.0, 1).unwrap();
        let r = select_reduction(&TABLE_ONE, &p).unwrap();
        assert_eq!(r.strategy, Strategy::Quantile(1));
    }

    #[test]
    fn zero_budget_keeps_distinct_table() {
        let p = ReductionParams::new(0.0, 1.0, 1).unwrap();
        let r = select_reduction(&TABLE_ONE, &p).unwrap();
        assert_eq!(r.strategy, Strategy::Identity);
        assert_eq!(r.mapped, TABLE_ONE);
    }

    #[test]
    fn smokers_clean_selection() {
        let p = ReductionParams::new(0.1, 0.1, 1).unwrap();
        let t = smokers_psi();
        let r = select_reduction(&t, &p).unwrap();
        assert_eq!(r.strategy, Strategy::Cluster);
        assert_eq!(r.mapped, t);
        assert_eq!(r.distinct_count(), 2);
    }

    #[test]
    fn params_are_validated() {
        assert!(ReductionParams::new(-0.1, 1.0, 1).is_err());
        assert!(ReductionParams::new(1.5, 1.0, 1).is_err());
        assert!(ReductionParams::new(0.1, 0.0, 1).is_err());
        assert!(ReductionParams::new(0.1, 1.0, 0).is_err());
    }
}

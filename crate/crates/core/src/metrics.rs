//! Distances and summary statistics over potential tables.

use crate::error::{Error, Result};

/// A distance between two normalized potential tables.
pub type DistanceFn = fn(&[f64], &[f64]) -> Result<f64>;

/// Hellinger distance between two tables after normalizing each by its sum.
///
/// Terms are accumulated in row order. The per-row term is symmetric in its
/// operands, so `hellinger(a, b) == hellinger(b, a)` bit for bit. The result
/// is clamped to `[0, 1]` to absorb rounding at the upper bound.
pub fn hellinger(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(format!(
            "tables have different lengths ({} vs {})",
            p.len(),
            q.len()
        )));
    }
    if p.is_empty() {
        return Err(Error::invalid("tables are empty"));
    }
    let sp = table_sum(p)?;
    let sq = table_sum(q)?;
    let acc: f64 = p
        .iter()
        .zip(q)
        .map(|(a, b)| {
            let d = (a / sp).sqrt() - (b / sq).sqrt();
            d * d
        })
        .sum();
    Ok((acc.sqrt() / std::f64::consts::SQRT_2).min(1.0))
}

fn table_sum(t: &[f64]) -> Result<f64> {
    if t.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::invalid("tables must contain finite non-negative entries"));
    }
    let s: f64 = t.iter().sum();
    if s <= 0.0 {
        return Err(Error::invalid("table has no positive entry"));
    }
    Ok(s)
}

/// Number of distinct values under exact equality.
pub fn distinct_count(values: &[f64]) -> usize {
    let mut v: Vec<u64> = values.iter().map(|x| canonical_bits(*x)).collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

// Treat +0.0 and -0.0 as equal.
fn canonical_bits(x: f64) -> u64 {
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TABLE_ONE: [f64; 8] = [1.0, 4.7, 4.8, 4.9, 5.0, 5.1, 5.2, 5.3];

    #[test]
    fn identical_tables_have_zero_distance() {
        assert_eq!(hellinger(&TABLE_ONE, &TABLE_ONE).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_support_is_maximal() {
        assert!((hellinger(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn table_one_cluster_mapping() {
        // 50-digit mpmath evaluation of the definition.
        let mapped = [1.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0];
        let h = hellinger(&TABLE_ONE, &mapped).unwrap();
        assert!((h - 0.013_950_443_485_740_43).abs() < 1e-14, "{h}");
    }

    #[test]
    fn errors() {
        assert!(hellinger(&[1.0], &[1.0, 2.0]).is_err());
        assert!(hellinger(&[0.0, 0.0], &[1.0, 2.0]).is_err());
        assert!(hellinger(&[], &[]).is_err());
        assert!(hellinger(&[-1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn distinct_counts() {
        assert_eq!(distinct_count(&[1.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0]), 2);
        assert_eq!(distinct_count(&TABLE_ONE), 8);
        assert_eq!(distinct_count(&[2.85, 2.85, 4.85, 4.85, 5.05, 5.05, 5.25, 5.25]), 4);
        assert_eq!(distinct_count(&[]), 0);
    }

    fn table(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..10.0, len)
    }

    proptest! {
        #[test]
        fn symmetric(a in table(8), b in table(8)) {
            prop_assert_eq!(hellinger(&a, &b).unwrap(), hellinger(&b, &a).unwrap());
        }

        #[test]
        fn scale_invariant(a in table(8), c in 0.001f64..1000.0) {
            let scaled: Vec<f64> = a.iter().map(|x| x * c).collect();
            prop_assert!(hellinger(&a, &scaled).unwrap() <= 1e-12);
        }

        #[test]
        fn triangle(a in table(4), b in table(4), c in table(4)) {
            let ac = hellinger(&a, &c).unwrap();
            let ab = hellinger(&a, &b).unwrap();
            let bc = hellinger(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9);
        }

        #[test]
        fn bounded(a in table(6), b in table(6)) {
            let h = hellinger(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&h));
        }
    }
}

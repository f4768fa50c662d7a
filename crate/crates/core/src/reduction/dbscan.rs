//! DBSCAN over one-dimensional points with the absolute-difference metric.

/// Classification of one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    /// At least `min_points` points (itself included) within `radius`.
    Core(usize),
    /// Within `radius` of a core point but not core itself.
    Border(usize),
    Noise,
}

impl Label {
    pub fn cluster(self) -> Option<usize> {
        match self {
            Label::Core(c) | Label::Border(c) => Some(c),
            Label::Noise => None,
        }
    }
}

/// Clusters `points`; the returned labels follow the input order.
///
/// Points are processed in ascending value order, so the result depends only
/// on the multiset of values. Cluster ids are assigned in ascending order of
/// each cluster's smallest core point. A border point reachable from two
/// clusters joins the lower one.
pub fn dbscan_1d(points: &[f64], radius: f64, min_points: usize) -> Vec<Label> {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| points[i]).collect();

    // Neighborhoods are contiguous ranges of the sorted values.
    let mut ranges = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0usize, 0usize);
    for i in 0..n {
        while sorted[i] - sorted[lo] > radius {
            lo += 1;
        }
        if hi < i {
            hi = i;
        }
        while hi + 1 < n && sorted[hi + 1] - sorted[i] <= radius {
            hi += 1;
        }
        ranges.push((lo, hi));
    }
    let core: Vec<bool> = ranges.iter().map(|&(l, h)| h - l + 1 >= min_points).collect();

    let mut labels = vec![Label::Noise; n];
    let mut visited = vec![false; n];
    let mut next_cluster = 0;
    for start in 0..n {
        if visited[start] || !core[start] {
            continue;
        }
        let cluster = next_cluster;
        next_cluster += 1;
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(p) = stack.pop() {
            labels[p] = Label::Core(cluster);
            let (l, h) = ranges[p];
            for q in l..=h {
                if core[q] {
                    if !visited[q] {
                        visited[q] = true;
                        stack.push(q);
                    }
                } else if labels[q] == Label::Noise {
                    labels[q] = Label::Border(cluster);
                }
            }
        }
    }

    let mut out = vec![Label::Noise; n];
    for (pos, &orig) in order.iter().enumerate() {
        out[orig] = labels[pos];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_two_clusters() {
        let pts = [1.0, 4.7, 4.8, 4.9, 5.0, 5.1, 5.2, 5.3];
        let labels = dbscan_1d(&pts, 1.0, 1);
        assert_eq!(labels[0], Label::Core(0));
        for l in &labels[1..] {
            assert_eq!(*l, Label::Core(1));
        }
    }

    #[test]
    fn isolated_point_is_noise_when_min_points_two() {
        let labels = dbscan_1d(&[1.0, 1.1, 1.2, 7.4], 0.5, 2);
        assert_eq!(labels[3], Label::Noise);
        assert_eq!(labels[0].cluster(), Some(0));
        assert_eq!(labels[2].cluster(), Some(0));
    }

    #[test]
    fn border_points() {
        // 0.0 has only itself and 0.5 within radius: border of the cluster.
        let labels = dbscan_1d(&[0.0, 0.5, 0.9, 1.3], 0.5, 3);
        assert_eq!(labels[0], Label::Border(0));
        assert_eq!(labels[1], Label::Core(0));
        assert_eq!(labels[2], Label::Core(0));
        assert_eq!(labels[3], Label::Border(0));
    }

    #[test]
    fn duplicates_share_a_cluster() {
        let labels = dbscan_1d(&[2.0, 2.0, 2.0], 0.1, 2);
        assert!(labels.iter().all(|l| *l == Label::Core(0)));
    }

    #[test]
    fn order_independent() {
        let a = [3.0, 1.0, 1.05, 9.0, 3.1, 1.1];
        let b = [1.1, 9.0, 3.1, 1.0, 3.0, 1.05];
        let la = dbscan_1d(&a, 0.2, 2);
        let lb = dbscan_1d(&b, 0.2, 2);
        for (i, x) in a.iter().enumerate() {
            let j = b.iter().position(|y| y == x).unwrap();
            assert_eq!(la[i], lb[j]);
        }
    }

    #[test]
    fn empty_input() {
        assert!(dbscan_1d(&[], 1.0, 1).is_empty());
    }
}

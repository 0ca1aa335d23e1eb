//! Density-based clustering (DBSCAN) with brute-force neighborhoods.
//!
//! Points appear in clusters in first-touch order, so labels are fully
//! deterministic for a fixed input order. A point counts as its own
//! neighbor, so `min_pts <= n` identical points always form one cluster.

use std::collections::VecDeque;

/// Cluster label per input point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Noise,
    Cluster(usize),
}

impl Label {
    pub fn cluster_id(self) -> Option<usize> {
        match self {
            Label::Noise => None,
            Label::Cluster(id) => Some(id),
        }
    }
}

fn dist_squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn neighbors(points: &[Vec<f64>], i: usize, eps2: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&j| dist_squared(&points[i], &points[j]) <= eps2)
        .collect()
}

/// Standard DBSCAN. `eps > 0`, `min_pts >= 1`; empty input gives empty labels.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<Label> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be >= 1");
    let n = points.len();
    let eps2 = eps * eps;

    // None = unvisited, Some(label) = final.
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut next_cluster = 0usize;

    for i in 0..n {
        if labels[i].is_some() {
            continue;
        }
        let nbrs = neighbors(points, i, eps2);
        if nbrs.len() < min_pts {
            labels[i] = Some(Label::Noise);
            continue;
        }
        let id = next_cluster;
        next_cluster += 1;
        labels[i] = Some(Label::Cluster(id));
        let mut queue: VecDeque<usize> = nbrs.into_iter().collect();
        while let Some(j) = queue.pop_front() {
            match labels[j] {
                Some(Label::Cluster(_)) => continue,
                Some(Label::Noise) => {
                    // Border point reclaimed by the cluster.
                    labels[j] = Some(Label::Cluster(id));
                    continue;
                }
                None => {
                    labels[j] = Some(Label::Cluster(id));
                    let jn = neighbors(points, j, eps2);
                    if jn.len() >= min_pts {
                        queue.extend(jn);
                    }
                }
            }
        }
    }

    labels.into_iter().map(|l| l.unwrap()).collect()
}

/// Sizes per cluster id (index = id).
pub fn cluster_sizes(labels: &[Label]) -> Vec<usize> {
    let max_id = labels
        .iter()
        .filter_map(|l| l.cluster_id())
        .max()
        .map(|m| m + 1)
        .unwrap_or(0);
    let mut sizes = vec![0usize; max_id];
    for l in labels {
        if let Some(id) = l.cluster_id() {
            sizes[id] += 1;
        }
    }
    sizes
}

/// Largest cluster id, ties broken by lowest id. None when everything is noise.
pub fn largest_cluster(labels: &[Label]) -> Option<usize> {
    let sizes = cluster_sizes(labels);
    sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .filter(|(_, &s)| s > 0)
        .map(|(id, _)| id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Independent reference: core points via brute-force degree count,
    /// clusters as connected components of the core-core graph (union-find),
    /// border points attached to any reaching core point.
    struct Reference {
        core: Vec<bool>,
        component: Vec<Option<usize>>,
    }

    fn reference_dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Reference {
        let n = points.len();
        let eps2 = eps * eps;
        let core: Vec<bool> = (0..n)
            .map(|i| neighbors(points, i, eps2).len() >= min_pts)
            .collect();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, x: usize) -> usize {
            if parent[x] != x {
                let root = find(parent, parent[x]);
                parent[x] = root;
            }
            parent[x]
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if core[i] && core[j] && dist_squared(&points[i], &points[j]) <= eps2 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let mut component = vec![None; n];
        for i in 0..n {
            if core[i] {
                component[i] = Some(find(&mut parent, i));
            }
        }
        // Border points: attach to some core neighbor's component.
        for i in 0..n {
            if !core[i] {
                for j in 0..n {
                    if core[j] && dist_squared(&points[i], &points[j]) <= eps2 {
                        component[i] = Some(find(&mut parent, j));
                        break;
                    }
                }
            }
        }
        Reference { core, component }
    }

    /// Compare against the reference: identical noise sets, identical core
    /// partitions up to renaming, and every border assignment must be
    /// reachable from a core point of the same cluster.
    fn agrees_with_reference(points: &[Vec<f64>], eps: f64, min_pts: usize) {
        let labels = dbscan(points, eps, min_pts);
        let reference = reference_dbscan(points, eps, min_pts);
        let eps2 = eps * eps;
        let n = points.len();

        let mut rename: std::collections::HashMap<usize, usize> = Default::default();
        for i in 0..n {
            match (labels[i], reference.component[i]) {
                (Label::Noise, comp) => assert!(comp.is_none(), "point {i}: noise vs clustered"),
                (Label::Cluster(id), comp) => {
                    let comp = comp.expect("point {i}: clustered vs noise");
                    if reference.core[i] {
                        // Core points: the renaming must be consistent.
                        let mapped = *rename.entry(id).or_insert(comp);
                        assert_eq!(mapped, comp, "core point {i} breaks cluster bijection");
                    } else {
                        // Border point: must have a core neighbor in its cluster.
                        let ok = (0..n).any(|j| {
                            reference.core[j]
                                && labels[j] == Label::Cluster(id)
                                && dist_squared(&points[i], &points[j]) <= eps2
                        });
                        assert!(ok, "border point {i} not justified by a core neighbor");
                    }
                }
            }
        }
    }

    #[test]
    fn tight_ball_plus_far_outlier() {
        let mut rng = crate::rng::rng_from(&[301]);
        let mut points: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                vec![
                    rng.gen_range(-0.05..0.05),
                    rng.gen_range(-0.05..0.05),
                ]
            })
            .collect();
        points.push(vec![10.0, 10.0]);
        let labels = dbscan(&points, 0.5, 4);
        for l in &labels[..20] {
            assert_eq!(*l, Label::Cluster(0));
        }
        assert_eq!(labels[20], Label::Noise);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let points = vec![vec![1.0, 2.0, 3.0]; 6];
        let labels = dbscan(&points, 0.1, 6);
        assert!(labels.iter().all(|l| *l == Label::Cluster(0)));
    }

    #[test]
    fn two_separated_blobs_give_two_clusters() {
        let mut rng = crate::rng::rng_from(&[302]);
        let mut points = Vec::new();
        for _ in 0..15 {
            points.push(vec![rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)]);
        }
        for _ in 0..15 {
            points.push(vec![
                5.0 + rng.gen_range(-0.1..0.1),
                5.0 + rng.gen_range(-0.1..0.1),
            ]);
        }
        let labels = dbscan(&points, 0.5, 4);
        let sizes = cluster_sizes(&labels);
        assert_eq!(sizes.len(), 2);
        assert_eq!(sizes[0], 15);
        assert_eq!(sizes[1], 15);
    }

    #[test]
    fn empty_input_gives_empty_labels() {
        assert!(dbscan(&[], 1.0, 3).is_empty());
    }

    #[test]
    fn random_instances_match_reference() {
        let mut rng = crate::rng::rng_from(&[303]);
        for case in 0..40 {
            let n = rng.gen_range(5..=200);
            let dim = rng.gen_range(1..=4);
            let clusters = rng.gen_range(1..=4);
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let c = rng.gen_range(0..clusters) as f64 * 4.0;
                    (0..dim).map(|_| c + rng.gen_range(-1.0..1.0)).collect()
                })
                .collect();
            let eps = rng.gen_range(0.2..1.2);
            let min_pts = rng.gen_range(1..=6);
            agrees_with_reference(&points, eps, min_pts);
            let _ = case;
        }
    }

    #[test]
    fn largest_cluster_tie_breaks_low_id() {
        let labels = vec![
            Label::Cluster(0),
            Label::Cluster(0),
            Label::Cluster(1),
            Label::Cluster(1),
            Label::Noise,
        ];
        assert_eq!(largest_cluster(&labels), Some(0));
        assert_eq!(largest_cluster(&[Label::Noise]), None);
    }
}

//! Density-based clustering over a pairwise distance function, plus the
//! silhouette quality score used for parameter tuning.
//!
//! The distance here is always the Jaccard distance 1 − SeqSim, a true
//! metric, but the implementation only assumes symmetry, d(x,x) = 0 and
//! values in [0,1].
//!
//! Determinism: points are processed in sorted-id order, the `≤ eps`
//! comparison is inclusive, and a border point reachable from several
//! clusters goes to the cluster of its smallest core neighbor.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClusterError {
    #[error("silhouette undefined: need at least 2 clusters")]
    SilhouetteUndefined,
    #[error("no admissible parameters: no grid point yields 2 or more clusters")]
    NoAdmissibleParameters,
}

/// DBSCAN parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    /// Neighborhood radius in [0,1] (Jaccard distance).
    pub eps: f64,
    /// Minimum neighbor count (inclusive of the point itself) for a core.
    pub min_pts: usize,
}

/// Clustering result over ids of type `I`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clustering<I> {
    /// Clusters sorted by smallest member; members sorted within.
    pub clusters: Vec<BTreeSet<I>>,
    pub noise: BTreeSet<I>,
}

impl<I: Ord> Clustering<I> {
    pub fn cluster_of(&self, id: &I) -> Option<usize> {
        self.clusters.iter().position(|c| c.contains(id))
    }
}

/// DBSCAN over a precomputed-able distance function.
///
/// Core points have ≥ min_pts points within eps (themselves included);
/// clusters are the connected components of core points under eps-adjacency;
/// border points attach to the cluster of their smallest core neighbor;
/// everything else is noise.
pub fn dbscan<I, D>(ids: &[I], dist: D, params: ClusterParams) -> Clustering<I>
where
    I: Ord + Clone,
    D: Fn(&I, &I) -> f64,
{
    let mut sorted: Vec<I> = ids.to_vec();
    sorted.sort();
    sorted.dedup();
    let n = sorted.len();
    if n == 0 {
        return Clustering {
            clusters: Vec::new(),
            noise: BTreeSet::new(),
        };
    }

    let mut matrix = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = dist(&sorted[i], &sorted[j]);
            debug_assert!((0.0..=1.0 + 1e-9).contains(&d), "distance out of range: {d}");
            matrix[i * n + j] = d;
            matrix[j * n + i] = d;
        }
    }
    let d = |i: usize, j: usize| matrix[i * n + j];

    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| d(i, j) <= params.eps).collect())
        .collect();
    let is_core: Vec<bool> = neighbors
        .iter()
        .map(|nb| nb.len() >= params.min_pts)
        .collect();

    // Clusters = connected components of the core-core eps graph, grown in
    // sorted order so cluster indices follow smallest cores.
    const UNASSIGNED: usize = usize::MAX;
    let mut label = vec![UNASSIGNED; n];
    let mut n_clusters = 0usize;
    for i in 0..n {
        if !is_core[i] || label[i] != UNASSIGNED {
            continue;
        }
        let cluster = n_clusters;
        n_clusters += 1;
        let mut queue = vec![i];
        label[i] = cluster;
        while let Some(v) = queue.pop() {
            for &w in &neighbors[v] {
                if is_core[w] && label[w] == UNASSIGNED {
                    label[w] = cluster;
                    queue.push(w);
                }
            }
        }
    }

    // Border points: smallest core neighbor claims them.
    for i in 0..n {
        if is_core[i] {
            continue;
        }
        if let Some(&core) = neighbors[i].iter().find(|&&j| is_core[j]) {
            label[i] = label[core];
        }
    }

    let mut clusters: Vec<BTreeSet<I>> = vec![BTreeSet::new(); n_clusters];
    let mut noise = BTreeSet::new();
    for i in 0..n {
        if label[i] == UNASSIGNED {
            noise.insert(sorted[i].clone());
        } else {
            clusters[label[i]].insert(sorted[i].clone());
        }
    }
    // A border point can sort below every member of an earlier cluster, so
    // the smallest-member order is restored explicitly.
    clusters.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
    Clustering { clusters, noise }
}

/// Mean silhouette coefficient over clustered points; noise is excluded and
/// points in singleton clusters score 0.
pub fn silhouette<I, D>(c: &Clustering<I>, dist: D) -> Result<f64, ClusterError>
where
    I: Ord + Clone,
    D: Fn(&I, &I) -> f64,
{
    if c.clusters.len() < 2 {
        return Err(ClusterError::SilhouetteUndefined);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (ci, cluster) in c.clusters.iter().enumerate() {
        for p in cluster {
            count += 1;
            if cluster.len() == 1 {
                continue; // scores 0
            }
            let a: f64 = cluster
                .iter()
                .filter(|q| *q != p)
                .map(|q| dist(p, q))
                .sum::<f64>()
                / (cluster.len() - 1) as f64;
            let b = c
                .clusters
                .iter()
                .enumerate()
                .filter(|(cj, _)| *cj != ci)
                .map(|(_, other)| {
                    other.iter().map(|q| dist(p, q)).sum::<f64>() / other.len() as f64
                })
                .fold(f64::INFINITY, f64::min);
            if a.max(b) > 0.0 {
                total += (b - a) / a.max(b);
            }
        }
    }
    Ok(total / count as f64)
}

/// Grid search maximizing the silhouette. Grid points yielding fewer than
/// two clusters are inadmissible; ties prefer smaller eps, then smaller
/// min_pts.
pub fn tune_params<I, D>(
    ids: &[I],
    dist: D,
    eps_grid: &[f64],
    min_pts_grid: &[usize],
) -> Result<ClusterParams, ClusterError>
where
    I: Ord + Clone,
    D: Fn(&I, &I) -> f64,
{
    let mut eps_sorted = eps_grid.to_vec();
    eps_sorted.sort_by(|a, b| a.partial_cmp(b).expect("eps grid has no NaN"));
    let mut min_pts_sorted = min_pts_grid.to_vec();
    min_pts_sorted.sort_unstable();

    let mut best: Option<(f64, ClusterParams)> = None;
    for &eps in &eps_sorted {
        for &min_pts in &min_pts_sorted {
            let params = ClusterParams { eps, min_pts };
            let clustering = dbscan(ids, &dist, params);
            let Ok(score) = silhouette(&clustering, &dist) else {
                continue;
            };
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, params));
            }
        }
    }
    best.map(|(_, p)| p).ok_or(ClusterError::NoAdmissibleParameters)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // index loops keep matrix fixtures readable
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Distance lookup from an explicit symmetric matrix over indices.
    fn matrix_dist(m: &[Vec<f64>]) -> impl Fn(&usize, &usize) -> f64 + '_ {
        |i: &usize, j: &usize| m[*i][*j]
    }

    /// Four tight points plus one far point.
    fn four_plus_outlier() -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; 5]; 5];
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    m[i][j] = 0.1;
                }
            }
        }
        for i in 0..4 {
            m[i][4] = 0.9;
            m[4][i] = 0.9;
        }
        m
    }

    #[test]
    fn dense_four_cluster_one_noise() {
        // Expected clustering derived with the naive reference in
        // tests/common: points 0-3 pairwise 0.1 are all cores at eps 0.2,
        // min_pts 3; point 4 at 0.9 from everything is noise.
        let m = four_plus_outlier();
        let ids: Vec<usize> = (0..5).collect();
        let c = dbscan(&ids, matrix_dist(&m), ClusterParams { eps: 0.2, min_pts: 3 });
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0], BTreeSet::from([0, 1, 2, 3]));
        assert_eq!(c.noise, BTreeSet::from([4]));
    }

    #[test]
    fn too_few_points_are_noise() {
        let m = vec![vec![0.0, 0.1], vec![0.1, 0.0]];
        let ids = vec![0usize, 1];
        let c = dbscan(&ids, matrix_dist(&m), ClusterParams { eps: 0.2, min_pts: 3 });
        assert!(c.clusters.is_empty());
        assert_eq!(c.noise.len(), 2);
    }

    #[test]
    fn identical_points_form_a_cluster() {
        let m = vec![vec![0.0; 3]; 3];
        let ids = vec![0usize, 1, 2];
        let c = dbscan(&ids, matrix_dist(&m), ClusterParams { eps: 0.0, min_pts: 3 });
        assert_eq!(c.clusters.len(), 1);
        assert!(c.noise.is_empty());
    }

    #[test]
    fn empty_input_empty_clustering() {
        let ids: Vec<usize> = Vec::new();
        let c = dbscan(&ids, |_: &usize, _: &usize| 0.0, ClusterParams { eps: 0.5, min_pts: 2 });
        assert!(c.clusters.is_empty());
        assert!(c.noise.is_empty());
    }

    #[test]
    fn perfect_separation_scores_one() {
        // two clusters, intra 0, inter 1
        let mut m = vec![vec![0.0; 4]; 4];
        for i in 0..2 {
            for j in 2..4 {
                m[i][j] = 1.0;
                m[j][i] = 1.0;
            }
        }
        let ids: Vec<usize> = (0..4).collect();
        let c = dbscan(&ids, matrix_dist(&m), ClusterParams { eps: 0.1, min_pts: 2 });
        assert_eq!(c.clusters.len(), 2);
        let s = silhouette(&c, matrix_dist(&m)).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_silhouette_is_error() {
        let m = vec![vec![0.0; 3]; 3];
        let ids: Vec<usize> = (0..3).collect();
        let c = dbscan(&ids, matrix_dist(&m), ClusterParams { eps: 0.5, min_pts: 2 });
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(
            silhouette(&c, matrix_dist(&m)),
            Err(ClusterError::SilhouetteUndefined)
        );
    }

    #[test]
    fn tune_picks_the_admissible_point() {
        // single-point grid that yields two clusters
        let mut m = vec![vec![0.0; 6]; 6];
        for i in 0..3 {
            for j in 3..6 {
                m[i][j] = 1.0;
                m[j][i] = 1.0;
            }
        }
        let ids: Vec<usize> = (0..6).collect();
        let p = tune_params(&ids, matrix_dist(&m), &[0.2], &[3]).unwrap();
        assert_eq!(p, ClusterParams { eps: 0.2, min_pts: 3 });
    }

    #[test]
    fn tune_skips_all_noise_grid_points() {
        // At eps 0.05 the five-point instance is all noise (pairwise 0.1);
        // at 0.2 it clusters but only one cluster forms... so extend with a
        // second far group to make 0.2 admissible.
        let mut m = vec![vec![0.0; 8]; 8];
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    m[i][j] = 0.1;
                }
            }
        }
        for i in 4..8 {
            for j in 4..8 {
                if i != j {
                    m[i][j] = 0.1;
                }
            }
        }
        for i in 0..4 {
            for j in 4..8 {
                m[i][j] = 0.9;
                m[j][i] = 0.9;
            }
        }
        let ids: Vec<usize> = (0..8).collect();
        let p = tune_params(&ids, matrix_dist(&m), &[0.05, 0.2], &[3]).unwrap();
        assert_eq!(p, ClusterParams { eps: 0.2, min_pts: 3 });
    }

    #[test]
    fn tune_with_no_admissible_point_errors() {
        let m = vec![vec![0.0; 3]; 3]; // always exactly one cluster
        let ids: Vec<usize> = (0..3).collect();
        assert_eq!(
            tune_params(&ids, matrix_dist(&m), &[0.5], &[2]),
            Err(ClusterError::NoAdmissibleParameters)
        );
    }

    /// Random symmetric matrix in [0,1] that respects the triangle
    /// inequality: d(i,j) in [max over k |d(i,k)−d(k,j)| .. min over k
    /// d(i,k)+d(k,j)] is not enforced directly; instead embed points on a
    /// line, where the metric property is automatic.
    fn line_metric(points: &[f64]) -> Vec<Vec<f64>> {
        let n = points.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                m[i][j] = (points[i] - points[j]).abs().min(1.0);
            }
        }
        m
    }

    proptest! {
        #[test]
        fn dbscan_is_input_order_invariant(
            points in proptest::collection::vec(0.0f64..1.0, 1..25),
            eps in 0.05f64..0.5,
            min_pts in 2usize..5,
            seed in 0u64..100,
        ) {
            let m = line_metric(&points);
            let ids: Vec<usize> = (0..points.len()).collect();
            let mut shuffled = ids.clone();
            let n = shuffled.len();
            for i in 0..n {
                let j = (seed as usize + i * 13) % n;
                shuffled.swap(i, j);
            }
            let params = ClusterParams { eps, min_pts };
            let c1 = dbscan(&ids, matrix_dist(&m), params);
            let c2 = dbscan(&shuffled, matrix_dist(&m), params);
            prop_assert_eq!(c1, c2);
        }

        #[test]
        fn core_points_agree_with_brute_force(
            points in proptest::collection::vec(0.0f64..1.0, 1..25),
            eps in 0.05f64..0.5,
            min_pts in 2usize..5,
        ) {
            let m = line_metric(&points);
            let ids: Vec<usize> = (0..points.len()).collect();
            let params = ClusterParams { eps, min_pts };
            let c = dbscan(&ids, matrix_dist(&m), params);
            // every clustered point is a core or within eps of a core
            for cluster in &c.clusters {
                for &p in cluster {
                    let neighbor_count = ids.iter().filter(|&&q| m[p][q] <= eps).count();
                    let is_core = neighbor_count >= min_pts;
                    if !is_core {
                        let near_core = cluster.iter().any(|&q| {
                            q != p
                                && m[p][q] <= eps
                                && ids.iter().filter(|&&r| m[q][r] <= eps).count() >= min_pts
                        });
                        prop_assert!(near_core, "border point {p} has no core neighbor in its cluster");
                    }
                }
            }
            // every noise point is genuinely not density-reachable
            for &p in &c.noise {
                let neighbor_count = ids.iter().filter(|&&q| m[p][q] <= eps).count();
                prop_assert!(neighbor_count < min_pts, "noise point {p} is a core");
                let has_core_neighbor = ids.iter().any(|&q| {
                    q != p
                        && m[p][q] <= eps
                        && ids.iter().filter(|&&r| m[q][r] <= eps).count() >= min_pts
                });
                prop_assert!(!has_core_neighbor, "noise point {p} neighbors a core");
            }
        }

        #[test]
        fn silhouette_stays_in_range(
            points in proptest::collection::vec(0.0f64..1.0, 4..30),
            eps in 0.02f64..0.4,
            min_pts in 2usize..4,
        ) {
            let m = line_metric(&points);
            let ids: Vec<usize> = (0..points.len()).collect();
            let c = dbscan(&ids, matrix_dist(&m), ClusterParams { eps, min_pts });
            if let Ok(s) = silhouette(&c, matrix_dist(&m)) {
                prop_assert!((-1.0..=1.0).contains(&s), "silhouette {s} out of range");
            }
        }
    }
}

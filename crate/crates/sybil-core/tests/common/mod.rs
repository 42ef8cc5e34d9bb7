//! Independent reference implementations (oracles) for the acceptance
//! suite. Everything here is written naively and separately from the
//! library's code paths: brute-force enumeration, transitive closures and
//! exhaustive argmax searches.
#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use sybil_core::address::Address;
use sybil_core::cluster::ClusterParams;
use sybil_core::patterns::RadialPattern;
use sybil_core::txgraph::Subgraph;

/// Brute-force pair-set Jaccard over raw type sequences: enumerate all index
/// pairs i<j, dedupe as a set of type pairs, apply the documented degenerate
/// rules.
pub fn oracle_seq_sim(a: &[String], b: &[String]) -> f64 {
    fn pairs(seq: &[String]) -> HashSet<(String, String)> {
        let mut out = HashSet::new();
        for i in 0..seq.len() {
            for j in (i + 1)..seq.len() {
                out.insert((seq[i].clone(), seq[j].clone()));
            }
        }
        out
    }
    let pa = pairs(a);
    let pb = pairs(b);
    if pa.is_empty() && pb.is_empty() {
        if a.is_empty() && b.is_empty() {
            return 1.0;
        }
        return if a.len() == 1 && b.len() == 1 && a[0] == b[0] {
            1.0
        } else {
            0.0
        };
    }
    if pa.is_empty() || pb.is_empty() {
        return 0.0;
    }
    let inter = pa.intersection(&pb).count();
    let union = pa.len() + pb.len() - inter;
    inter as f64 / union as f64
}

/// Canonical clustering form for comparisons up to label permutation:
/// clusters as a sorted set of member sets, plus the noise set.
pub type CanonicalClustering = (BTreeSet<BTreeSet<usize>>, BTreeSet<usize>);

/// Naive reference DBSCAN over a distance matrix: core points by brute
/// count, clusters by boolean transitive closure of core-core adjacency,
/// borders claimed by their smallest core neighbor.
pub fn oracle_dbscan(matrix: &[Vec<f64>], params: ClusterParams) -> CanonicalClustering {
    let n = matrix.len();
    let is_core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| matrix[i][j] <= params.eps).count() >= params.min_pts)
        .collect();

    // transitive closure over core-core adjacency
    let mut linked = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            linked[i][j] = i == j || (is_core[i] && is_core[j] && matrix[i][j] <= params.eps);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if linked[i][k] && linked[k][j] {
                    linked[i][j] = true;
                }
            }
        }
    }

    let mut assignment: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        if !is_core[i] {
            continue;
        }
        // representative: smallest linked core
        let rep = (0..n).find(|&j| is_core[j] && linked[i][j]).unwrap();
        assignment[i] = Some(rep);
    }
    for i in 0..n {
        if is_core[i] {
            continue;
        }
        if let Some(claims) = (0..n).find(|&j| is_core[j] && matrix[i][j] <= params.eps) {
            assignment[i] = assignment[claims];
        }
    }

    let mut clusters: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut noise = BTreeSet::new();
    for i in 0..n {
        match assignment[i] {
            Some(rep) => {
                clusters.entry(rep).or_default().insert(i);
            }
            None => {
                noise.insert(i);
            }
        }
    }
    (clusters.into_values().collect(), noise)
}

/// Directed adjacency read straight off a subgraph's edge map, bypassing the
/// subgraph's own adjacency structures.
pub fn edge_adjacency(sg: &Subgraph) -> BTreeMap<Address, BTreeSet<Address>> {
    let mut out: BTreeMap<Address, BTreeSet<Address>> = BTreeMap::new();
    for v in &sg.vertices {
        out.entry(v.clone()).or_default();
    }
    for (from, to) in sg.edges.keys() {
        out.get_mut(from).unwrap().insert(to.clone());
    }
    out
}

/// Transitive reachability by Floyd-Warshall over the subgraph's edges.
pub fn oracle_reachability(sg: &Subgraph) -> BTreeMap<(Address, Address), bool> {
    let verts: Vec<Address> = sg.vertices.clone();
    let n = verts.len();
    let index: BTreeMap<&Address, usize> = verts.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut reach = vec![vec![false; n]; n];
    for (from, to) in sg.edges.keys() {
        reach[index[from]][index[to]] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            out.insert((verts[i].clone(), verts[j].clone()), reach[i][j]);
        }
    }
    out
}

/// Does some walk (not necessarily simple) visit every vertex of `targets`?
/// Equivalent to: some permutation of the targets is pairwise
/// forward-reachable under the transitive closure.
pub fn oracle_walk_covers(
    reach: &BTreeMap<(Address, Address), bool>,
    targets: &BTreeSet<Address>,
) -> bool {
    let items: Vec<&Address> = targets.iter().collect();
    permutations_exist(reach, &items, &mut Vec::new(), &mut vec![false; items.len()])
}

fn permutations_exist(
    reach: &BTreeMap<(Address, Address), bool>,
    items: &[&Address],
    current: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> bool {
    if current.len() == items.len() {
        return true;
    }
    for i in 0..items.len() {
        if used[i] {
            continue;
        }
        if let Some(&last) = current.last() {
            if !reach[&(items[last].clone(), items[i].clone())] {
                continue;
            }
        }
        used[i] = true;
        current.push(i);
        if permutations_exist(reach, items, current, used) {
            return true;
        }
        current.pop();
        used[i] = false;
    }
    false
}

/// Exhaustive greedy radial search: candidate pool and per-round argmax are
/// recomputed naively from the edge map; ties break to the smallest address.
pub fn oracle_radial(sg: &Subgraph, seeds: &BTreeSet<Address>) -> Vec<RadialPattern> {
    let out_adj = edge_adjacency(sg);
    let mut und_adj: BTreeMap<Address, BTreeSet<Address>> = BTreeMap::new();
    for v in &sg.vertices {
        und_adj.entry(v.clone()).or_default();
    }
    for (from, to) in sg.edges.keys() {
        und_adj.get_mut(from).unwrap().insert(to.clone());
        und_adj.get_mut(to).unwrap().insert(from.clone());
    }

    let present: BTreeSet<Address> = seeds
        .iter()
        .filter(|s| sg.vertices.contains(s))
        .cloned()
        .collect();
    if present.is_empty() {
        return Vec::new();
    }

    // candidates: undirected distance ≤ 2 from any seed
    let mut candidates: BTreeSet<Address> = present.clone();
    for s in &present {
        for n1 in &und_adj[s] {
            candidates.insert(n1.clone());
            for n2 in &und_adj[n1] {
                candidates.insert(n2.clone());
            }
        }
    }

    let two_hop_reach = |v: &Address| -> BTreeSet<Address> {
        let mut r = BTreeSet::new();
        for n1 in &out_adj[v] {
            if n1 != v {
                r.insert(n1.clone());
            }
            for n2 in &out_adj[n1] {
                if n2 != v {
                    r.insert(n2.clone());
                }
            }
        }
        r
    };

    let mut remaining = present;
    let mut patterns = Vec::new();
    while !remaining.is_empty() {
        let mut best: Option<(Address, BTreeSet<Address>)> = None;
        for c in &candidates {
            let covered: BTreeSet<Address> = two_hop_reach(c)
                .intersection(&remaining)
                .cloned()
                .collect();
            let better = match &best {
                None => true,
                Some((_, b)) => covered.len() > b.len(),
            };
            if better {
                best = Some((c.clone(), covered));
            }
        }
        let (center, covered) = best.unwrap();
        if covered.len() < 2 {
            break;
        }
        for v in &covered {
            remaining.remove(v);
        }
        patterns.push(RadialPattern {
            center,
            spokes: covered,
        });
    }
    patterns
}

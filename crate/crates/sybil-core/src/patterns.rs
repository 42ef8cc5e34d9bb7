//! Token-transfer pattern search over a cluster's subgraph.
//!
//! Sequential patterns are funding chains: one walk (not necessarily simple)
//! that visits many cluster accounts. Finding the best chain is posed as a
//! maximum-weight clique on the reachability graph, but that graph is the
//! comparability graph of the SCC condensation, so the maximum-weight clique
//! is exactly the maximum-weight chain of SCCs — computable by dynamic
//! programming over a topological order in linear time.
//!
//! Radial patterns are funding stars: one center whose ≤2-hop directed
//! reach covers many cluster accounts.
//!
//! Both searches are greedy: emit the best structure, drop the covered
//! accounts, repeat. All ties break toward the lexicographically smallest
//! address so runs are reproducible.

use crate::address::Address;
use crate::txgraph::{condense_sccs, CondensationDag, Subgraph};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// A funding chain covering at least three cluster accounts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequentialPattern {
    /// Chain vertices in reachability order: every vertex reaches all later
    /// ones. Connector vertices outside the cluster may appear.
    pub path_vertices: Vec<Address>,
    /// Cluster accounts on the chain.
    pub covered_seed: BTreeSet<Address>,
}

/// A funding star covering at least two cluster accounts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadialPattern {
    pub center: Address,
    /// Cluster accounts within two directed hops of the center. The center
    /// itself never counts as its own spoke.
    pub spokes: BTreeSet<Address>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplexOrder {
    RadialFirst,
    SequentialFirst,
}

/// A two-stage composition of the fundamental patterns. Stage two is seeded
/// by stage one's join vertices: the radial centers (RadialFirst) or the
/// chain vertices (SequentialFirst).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexPattern {
    pub order: ComplexOrder,
    pub radial_stage: Vec<RadialPattern>,
    pub sequential_stage: Vec<SequentialPattern>,
}

impl ComplexPattern {
    /// All vertices covered by either stage.
    pub fn covered_vertices(&self) -> BTreeSet<Address> {
        let mut out = BTreeSet::new();
        for r in &self.radial_stage {
            out.extend(r.spokes.iter().cloned());
            out.insert(r.center.clone());
        }
        for s in &self.sequential_stage {
            out.extend(s.path_vertices.iter().cloned());
        }
        out
    }
}

/// Candidate chain tracked by the DP: weight maximized, then vertex count
/// minimized, then the flattened address sequence lexicographically
/// smallest. Because lexicographic comparison only ever happens at equal
/// vertex count, the two flattened sequences compared always have equal
/// length, which keeps the tie-break stable under extension by a common
/// suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
struct ChainCandidate {
    weight: usize,
    vertex_count: usize,
    sccs: Vec<usize>,
    flat: Vec<Address>,
}

impl ChainCandidate {
    fn better_than(&self, other: &ChainCandidate) -> bool {
        self.weight
            .cmp(&other.weight)
            .then(other.vertex_count.cmp(&self.vertex_count))
            .then_with(|| other.flat.cmp(&self.flat))
            .is_gt()
    }
}

/// Maximum-weight chain in the condensation DAG, weighting each SCC by how
/// many seed accounts it contains. Returns the SCC index chain and its
/// total weight; the empty condensation yields an empty chain of weight 0.
pub fn max_seed_chain(
    cond: &CondensationDag,
    seeds: &BTreeSet<Address>,
) -> (Vec<usize>, usize) {
    if cond.is_empty() {
        return (Vec::new(), 0);
    }
    let n = cond.sccs.len();
    let weight: Vec<usize> = cond
        .sccs
        .iter()
        .map(|scc| scc.iter().filter(|v| seeds.contains(*v)).count())
        .collect();
    let flat_of: Vec<Vec<Address>> = cond
        .sccs
        .iter()
        .map(|scc| scc.iter().cloned().collect())
        .collect();

    // Incoming DAG adjacency for the DP.
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &cond.dag_edges {
        preds[b].push(a);
    }

    let mut best: Vec<Option<ChainCandidate>> = vec![None; n];
    for &i in &cond.topo_order {
        let mut cand = ChainCandidate {
            weight: weight[i],
            vertex_count: flat_of[i].len(),
            sccs: vec![i],
            flat: flat_of[i].clone(),
        };
        for &p in &preds[i] {
            let prev = best[p].as_ref().expect("topo order visits preds first");
            let extended = ChainCandidate {
                weight: prev.weight + weight[i],
                vertex_count: prev.vertex_count + flat_of[i].len(),
                sccs: prev.sccs.iter().chain([&i]).copied().collect(),
                flat: prev.flat.iter().chain(&flat_of[i]).cloned().collect(),
            };
            if extended.better_than(&cand) {
                cand = extended;
            }
        }
        best[i] = Some(cand);
    }

    let winner = best
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.better_than(&a) { b } else { a })
        .expect("non-empty condensation has a best chain");
    (winner.sccs, winner.weight)
}

fn flatten_chain(cond: &CondensationDag, chain: &[usize]) -> Vec<Address> {
    chain
        .iter()
        .flat_map(|&i| cond.sccs[i].iter().cloned())
        .collect()
}

/// Greedy sequential-pattern search: repeatedly take the maximum-coverage
/// chain; stop when the best chain covers two or fewer remaining accounts.
pub fn search_sequential(sg: &Subgraph, seeds: &BTreeSet<Address>) -> Vec<SequentialPattern> {
    let cond = condense_sccs(sg);
    let mut remaining: BTreeSet<Address> = seeds
        .iter()
        .filter(|s| sg.vertex_id(s).is_some())
        .cloned()
        .collect();
    let mut patterns = Vec::new();
    loop {
        let (chain, weight) = max_seed_chain(&cond, &remaining);
        if weight <= 2 {
            break;
        }
        let path_vertices = flatten_chain(&cond, &chain);
        let covered_seed: BTreeSet<Address> = path_vertices
            .iter()
            .filter(|v| remaining.contains(*v))
            .cloned()
            .collect();
        for v in &covered_seed {
            remaining.remove(v);
        }
        patterns.push(SequentialPattern {
            path_vertices,
            covered_seed,
        });
    }
    patterns
}

/// Greedy radial-pattern search: candidate centers are every vertex within
/// undirected distance 2 of the seed set; each round the center whose ≤2-hop
/// directed reach covers the most remaining seeds wins (ties to the smallest
/// address); stop when the best covers fewer than two.
pub fn search_radial(sg: &Subgraph, seeds: &BTreeSet<Address>) -> Vec<RadialPattern> {
    let seed_ids: Vec<usize> = seeds.iter().filter_map(|s| sg.vertex_id(s)).collect();
    if seed_ids.is_empty() {
        return Vec::new();
    }
    let candidates = sg.undirected_ball(&seed_ids, 2);
    let reach: Vec<(usize, BTreeSet<usize>)> = candidates
        .into_iter()
        .map(|c| (c, sg.directed_reach(c, 2)))
        .collect();

    let mut remaining: BTreeSet<usize> = seed_ids.into_iter().collect();
    let mut patterns = Vec::new();
    while !remaining.is_empty() {
        let mut best: Option<(usize, BTreeSet<usize>)> = None;
        for (c, r) in &reach {
            let covered: BTreeSet<usize> = r.intersection(&remaining).copied().collect();
            // candidates iterate in ascending vertex id = ascending address,
            // so strict improvement keeps the smallest address on ties
            if best.as_ref().is_none_or(|(_, b)| covered.len() > b.len()) {
                best = Some((*c, covered));
            }
        }
        let (center, covered) = best.expect("non-empty candidate pool");
        if covered.len() < 2 {
            break;
        }
        for v in &covered {
            remaining.remove(v);
        }
        patterns.push(RadialPattern {
            center: sg.vertices[center].clone(),
            spokes: covered.iter().map(|&v| sg.vertices[v].clone()).collect(),
        });
    }
    patterns
}

/// Two-stage composite search. Returns nothing when stage one finds nothing;
/// otherwise one composite carrying both stages (stage two may be empty).
pub fn search_complex(
    sg: &Subgraph,
    seeds: &BTreeSet<Address>,
    order: ComplexOrder,
) -> Vec<ComplexPattern> {
    match order {
        ComplexOrder::RadialFirst => {
            let radial_stage = search_radial(sg, seeds);
            if radial_stage.is_empty() {
                return Vec::new();
            }
            let centers: BTreeSet<Address> =
                radial_stage.iter().map(|r| r.center.clone()).collect();
            let sequential_stage = search_sequential(sg, &centers);
            vec![ComplexPattern {
                order,
                radial_stage,
                sequential_stage,
            }]
        }
        ComplexOrder::SequentialFirst => {
            let sequential_stage = search_sequential(sg, seeds);
            if sequential_stage.is_empty() {
                return Vec::new();
            }
            let mut radial_stage = Vec::new();
            for p in &sequential_stage {
                let path_seeds: BTreeSet<Address> = p.path_vertices.iter().cloned().collect();
                radial_stage.extend(search_radial(sg, &path_seeds));
            }
            vec![ComplexPattern {
                order,
                radial_stage,
                sequential_stage,
            }]
        }
    }
}

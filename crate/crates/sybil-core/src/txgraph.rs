//! Per-chain transaction graphs and the reachability machinery behind the
//! transfer-pattern searches.
//!
//! The graph is simple and directed: transfers between the same ordered
//! address pair collapse into one aggregated edge, and self-transfers
//! contribute the vertex but no edge. Pattern search never runs on a whole
//! chain graph; it runs on a cluster-centered subgraph (the cluster plus its
//! 2-hop neighborhood), whose size is capped so that exact reachability and
//! SCC condensation stay cheap.

use crate::address::{AccountValue, Address};
use crate::amount::Amount;
use crate::ingest::Transaction;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, VecDeque};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("empty seed set")]
    EmptySeedSet,
    #[error("seed {0} is not a vertex of the graph")]
    SeedNotInGraph(Address),
}

/// Aggregate of all transfers over one directed address pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeAggregate {
    pub tx_count: u64,
    pub total_amount: Amount,
    pub first_ts: u64,
    pub last_ts: u64,
}

/// Simple directed graph over the addresses of one chain.
#[derive(Debug, Clone, Default)]
pub struct TransactionGraph {
    pub vertices: BTreeSet<Address>,
    pub edges: BTreeMap<(Address, Address), EdgeAggregate>,
    out_adj: BTreeMap<Address, BTreeSet<Address>>,
    in_adj: BTreeMap<Address, BTreeSet<Address>>,
}

impl TransactionGraph {
    /// Build the aggregated graph from pre-filtered transactions of one
    /// chain.
    pub fn build(txs: &[Transaction]) -> Self {
        let mut g = TransactionGraph::default();
        for tx in txs {
            g.vertices.insert(tx.from.clone());
            g.vertices.insert(tx.to.clone());
            if tx.from == tx.to {
                continue;
            }
            g.out_adj
                .entry(tx.from.clone())
                .or_default()
                .insert(tx.to.clone());
            g.in_adj
                .entry(tx.to.clone())
                .or_default()
                .insert(tx.from.clone());
            g.edges
                .entry((tx.from.clone(), tx.to.clone()))
                .and_modify(|e| {
                    e.tx_count += 1;
                    e.total_amount = e.total_amount.saturating_add(tx.amount);
                    e.first_ts = e.first_ts.min(tx.timestamp);
                    e.last_ts = e.last_ts.max(tx.timestamp);
                })
                .or_insert(EdgeAggregate {
                    tx_count: 1,
                    total_amount: tx.amount,
                    first_ts: tx.timestamp,
                    last_ts: tx.timestamp,
                });
        }
        g
    }

    pub fn contains(&self, v: &Address) -> bool {
        self.vertices.contains(v)
    }

    /// Total degree: distinct out-neighbors plus distinct in-neighbors.
    pub fn degree(&self, v: &Address) -> usize {
        self.out_adj.get(v).map_or(0, |s| s.len()) + self.in_adj.get(v).map_or(0, |s| s.len())
    }

    fn undirected_neighbors(&self, v: &Address) -> impl Iterator<Item = &Address> {
        let out = self.out_adj.get(v).into_iter().flatten();
        let inn = self.in_adj.get(v).into_iter().flatten();
        out.chain(inn)
    }

    /// Weakly connected components, each sorted, listed by smallest member.
    pub fn connected_components(&self) -> Vec<BTreeSet<Address>> {
        let mut seen: BTreeSet<&Address> = BTreeSet::new();
        let mut components = Vec::new();
        for start in &self.vertices {
            if seen.contains(start) {
                continue;
            }
            let mut component = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            seen.insert(start);
            while let Some(v) = queue.pop_front() {
                component.insert(v.clone());
                for w in self.undirected_neighbors(v) {
                    if seen.insert(w) {
                        queue.push_back(w);
                    }
                }
            }
            components.push(component);
        }
        components
    }
}

/// Limits on cluster-centered subgraph extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SubgraphCaps {
    pub max_vertices: usize,
    pub hub_degree_threshold: usize,
}

impl Default for SubgraphCaps {
    fn default() -> Self {
        SubgraphCaps {
            max_vertices: 5000,
            hub_degree_threshold: 1000,
        }
    }
}

/// A cluster's 2-hop neighborhood with original edge directions, in the
/// index form the search algorithms work on.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub seed: BTreeSet<Address>,
    /// Sorted; index into this vector is the vertex id used everywhere else.
    pub vertices: Vec<Address>,
    pub edges: BTreeMap<(Address, Address), EdgeAggregate>,
    index: BTreeMap<Address, usize>,
    out: Vec<Vec<usize>>,
    inn: Vec<Vec<usize>>,
}

impl Subgraph {
    /// Assemble a subgraph from an explicit vertex set and the parent graph's
    /// edges between them.
    fn assemble(g: &TransactionGraph, seed: BTreeSet<Address>, kept: BTreeSet<Address>) -> Self {
        let vertices: Vec<Address> = kept.into_iter().collect();
        let index: BTreeMap<Address, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), i))
            .collect();
        let mut edges = BTreeMap::new();
        let mut out = vec![Vec::new(); vertices.len()];
        let mut inn = vec![Vec::new(); vertices.len()];
        for (i, v) in vertices.iter().enumerate() {
            for w in g.out_adj.get(v).into_iter().flatten() {
                if let Some(&j) = index.get(w) {
                    out[i].push(j);
                    inn[j].push(i);
                    let key = (v.clone(), w.clone());
                    let agg = g.edges[&key].clone();
                    edges.insert(key, agg);
                }
            }
        }
        Subgraph {
            seed,
            vertices,
            edges,
            index,
            out,
            inn,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_id(&self, v: &Address) -> Option<usize> {
        self.index.get(v).copied()
    }

    pub fn out_neighbors(&self, id: usize) -> &[usize] {
        &self.out[id]
    }

    pub fn in_neighbors(&self, id: usize) -> &[usize] {
        &self.inn[id]
    }

    /// Vertex ids within undirected distance `depth` of any id in `from`,
    /// including the start ids themselves.
    pub fn undirected_ball(&self, from: &[usize], depth: usize) -> BTreeSet<usize> {
        let mut dist: BTreeMap<usize, usize> = from.iter().map(|&i| (i, 0)).collect();
        let mut queue: VecDeque<usize> = from.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            let d = dist[&v];
            if d == depth {
                continue;
            }
            for &w in self.out[v].iter().chain(&self.inn[v]) {
                dist.entry(w).or_insert_with(|| {
                    queue.push_back(w);
                    d + 1
                });
            }
        }
        dist.into_keys().collect()
    }

    /// Vertex ids reachable from `start` within `hops` directed hops,
    /// excluding `start` itself.
    pub fn directed_reach(&self, start: usize, hops: usize) -> BTreeSet<usize> {
        let mut reached = BTreeSet::new();
        let mut frontier = vec![start];
        for _ in 0..hops {
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in &self.out[v] {
                    if w != start && reached.insert(w) {
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        reached
    }
}

/// Extract the subgraph induced by a seed set and its 2-hop undirected
/// neighborhood in `g`.
///
/// High-degree hubs are removed before expansion (they never enter the BFS
/// frontier), so a CEX hot wallet neither becomes a pattern candidate nor
/// drags its whole customer star into the subgraph. Seeds are always
/// retained, regardless of degree or the vertex cap.
pub fn extract_subgraph(
    g: &TransactionGraph,
    seeds: &BTreeSet<Address>,
    caps: SubgraphCaps,
) -> Result<Subgraph, GraphError> {
    if seeds.is_empty() {
        return Err(GraphError::EmptySeedSet);
    }
    if let Some(missing) = seeds.iter().find(|s| !g.contains(s)) {
        return Err(GraphError::SeedNotInGraph(missing.clone()));
    }
    let is_hub =
        |v: &Address| -> bool { !seeds.contains(v) && g.degree(v) > caps.hub_degree_threshold };

    // Multi-source BFS to depth 2, never stepping onto a hub.
    let mut dist: BTreeMap<&Address, usize> = seeds.iter().map(|s| (s, 0)).collect();
    let mut queue: VecDeque<&Address> = seeds.iter().collect();
    while let Some(v) = queue.pop_front() {
        let d = dist[v];
        if d == 2 {
            continue;
        }
        for w in g.undirected_neighbors(v) {
            if dist.contains_key(w) || is_hub(w) {
                continue;
            }
            dist.insert(w, d + 1);
            queue.push_back(w);
        }
    }

    let mut ranked: Vec<(usize, &Address)> = dist.iter().map(|(v, &d)| (d, *v)).collect();
    ranked.sort();
    let keep = caps.max_vertices.max(seeds.len());
    let kept: BTreeSet<Address> = ranked
        .into_iter()
        .take(keep)
        .map(|(_, v)| v.clone())
        .collect();
    Ok(Subgraph::assemble(g, seeds.clone(), kept))
}

/// Strongly-connected-component condensation of a subgraph.
#[derive(Debug, Clone)]
pub struct CondensationDag {
    /// SCC membership lists, indexed by SCC id; ids are assigned in order of
    /// each SCC's smallest member address.
    pub sccs: Vec<BTreeSet<Address>>,
    pub dag_edges: BTreeSet<(usize, usize)>,
    pub vertex_to_scc: BTreeMap<Address, usize>,
    pub topo_order: Vec<usize>,
}

impl CondensationDag {
    pub fn is_empty(&self) -> bool {
        self.sccs.is_empty()
    }
}

/// Tarjan's algorithm, iterative so deep chains cannot overflow the stack.
fn tarjan_sccs<'a, F: Fn(usize) -> &'a [usize]>(n: usize, out: F) -> Vec<Vec<usize>> {
    const UNSET: usize = usize::MAX;
    let mut index = vec![UNSET; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut comps: Vec<Vec<usize>> = Vec::new();
    // (vertex, next-child position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        call.push((root, 0));
        while let Some(&mut (v, ref mut ci)) = call.last_mut() {
            if *ci == 0 {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            let children = out(v);
            if *ci < children.len() {
                let w = children[*ci];
                *ci += 1;
                if index[w] == UNSET {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comps.push(comp);
            }
        }
    }
    comps
}

/// Condense a subgraph's SCCs into a DAG with a deterministic indexing and
/// topological order.
pub fn condense_sccs(sg: &Subgraph) -> CondensationDag {
    let n = sg.vertex_count();
    let raw = tarjan_sccs(n, |v| sg.out_neighbors(v));

    // Reindex by smallest member address; vertex ids are sorted-address
    // order, so the smallest id is the smallest address.
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by_key(|&c| raw[c].iter().min().copied().unwrap_or(usize::MAX));
    let mut scc_of = vec![0usize; n];
    let mut sccs = Vec::with_capacity(raw.len());
    for (new_id, &old_id) in order.iter().enumerate() {
        for &v in &raw[old_id] {
            scc_of[v] = new_id;
        }
        sccs.push(raw[old_id].iter().map(|&v| sg.vertices[v].clone()).collect());
    }

    let mut dag_edges = BTreeSet::new();
    for v in 0..n {
        for &w in sg.out_neighbors(v) {
            if scc_of[v] != scc_of[w] {
                dag_edges.insert((scc_of[v], scc_of[w]));
            }
        }
    }

    // Kahn with a min-heap keeps the topological order deterministic.
    let mut indegree = vec![0usize; sccs.len()];
    let mut dag_out: Vec<Vec<usize>> = vec![Vec::new(); sccs.len()];
    for &(a, b) in &dag_edges {
        indegree[b] += 1;
        dag_out[a].push(b);
    }
    let mut heap: BinaryHeap<std::cmp::Reverse<usize>> = (0..sccs.len())
        .filter(|&i| indegree[i] == 0)
        .map(std::cmp::Reverse)
        .collect();
    let mut topo_order = Vec::with_capacity(sccs.len());
    while let Some(std::cmp::Reverse(i)) = heap.pop() {
        topo_order.push(i);
        for &j in &dag_out[i] {
            indegree[j] -= 1;
            if indegree[j] == 0 {
                heap.push(std::cmp::Reverse(j));
            }
        }
    }
    debug_assert_eq!(topo_order.len(), sccs.len(), "condensation must be acyclic");

    let vertex_to_scc = sg
        .vertices
        .iter()
        .enumerate()
        .map(|(v, addr)| (addr.clone(), scc_of[v]))
        .collect();

    CondensationDag {
        sccs,
        dag_edges,
        vertex_to_scc,
        topo_order,
    }
}

/// Undirected graph with an edge wherever one vertex reaches the other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityGraph {
    pub vertices: BTreeSet<Address>,
    /// Unordered pairs stored as (min, max).
    pub edges: BTreeSet<(Address, Address)>,
}

/// Bit-packed reachability rows.
struct BitMatrix {
    words: usize,
    rows: Vec<u64>,
}

impl BitMatrix {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        BitMatrix {
            words,
            rows: vec![0; words * n],
        }
    }

    fn set(&mut self, row: usize, col: usize) {
        self.rows[row * self.words + col / 64] |= 1 << (col % 64);
    }

    fn get(&self, row: usize, col: usize) -> bool {
        self.rows[row * self.words + col / 64] & (1 << (col % 64)) != 0
    }
}

/// Exact reachability closure of the subgraph, symmetrized.
pub fn reachability_graph(sg: &Subgraph) -> ReachabilityGraph {
    let n = sg.vertex_count();
    let mut reach = BitMatrix::new(n);
    for start in 0..n {
        let mut queue = VecDeque::from([start]);
        let mut seen = vec![false; n];
        seen[start] = true;
        while let Some(v) = queue.pop_front() {
            for &w in sg.out_neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    reach.set(start, w);
                    queue.push_back(w);
                }
            }
        }
    }
    let mut edges = BTreeSet::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if reach.get(u, v) || reach.get(v, u) {
                edges.insert((sg.vertices[u].clone(), sg.vertices[v].clone()));
            }
        }
    }
    ReachabilityGraph {
        vertices: sg.vertices.iter().cloned().collect(),
        edges,
    }
}

/// Weakly connected components over account values across all chains: the
/// same value on two chains is one actor, so components can span chains.
pub fn value_components<'a>(
    txs: impl IntoIterator<Item = &'a Transaction>,
) -> Vec<BTreeSet<AccountValue>> {
    let mut adj: BTreeMap<&AccountValue, BTreeSet<&AccountValue>> = BTreeMap::new();
    for tx in txs {
        adj.entry(&tx.from.value).or_default();
        adj.entry(&tx.to.value).or_default();
        if tx.from.value != tx.to.value {
            adj.get_mut(&tx.from.value).unwrap().insert(&tx.to.value);
            adj.entry(&tx.to.value).or_default().insert(&tx.from.value);
        }
    }
    let mut seen: BTreeSet<&AccountValue> = BTreeSet::new();
    let mut components = Vec::new();
    for &start in adj.keys() {
        if seen.contains(start) {
            continue;
        }
        let mut component = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        seen.insert(start);
        while let Some(v) = queue.pop_front() {
            component.insert(v.clone());
            for &w in adj.get(v).into_iter().flatten() {
                if seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        components.push(component);
    }
    components
}

//! Bi-directed graphs and their marginal-independence combinatorics.
//!
//! A bi-directed graph is an undirected skeleton whose missing edges encode
//! *marginal* (not conditional) independencies. The central object is the
//! family of disconnected node sets: every subset whose induced subgraph
//! splits into two or more connected components contributes one independence
//! constraint block.

use crate::set::VarSet;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

/// Hard cap on the node count: every operation below enumerates all `2^d`
/// subsets, and downstream contingency tables grow at least as fast.
pub const MAX_NODES: usize = 12;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph has {0} nodes; at most {MAX_NODES} are supported")]
    TooManyNodes(usize),
    #[error("duplicate node label `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(String, String),
    #[error("node index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("sets must be pairwise disjoint (share node `{0}`)")]
    Overlap(String),
    #[error("endpoint sets must be nonempty")]
    EmptyEndpoint,
    #[error("failed to read graph file: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid graph JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Deserialize)]
struct GraphFile {
    nodes: Vec<String>,
    edges: Vec<(String, String)>,
}

/// A bi-directed graph: ordered node labels plus a set of unordered edges.
///
/// The node order is fixed at construction and defines the variable order for
/// every parameterization and table built from the graph.
#[derive(Clone, Debug)]
pub struct BidirectedGraph {
    nodes: Vec<String>,
    /// adjacency[i][j] over node indices, symmetric, no diagonal
    adj: Vec<Vec<bool>>,
    edges: Vec<(usize, usize)>,
}

/// A statement `C_1 ⊥ C_2 ⊥ … ⊥ C_r` read off one disconnected set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndependenceStatement {
    /// The mutually independent blocks, in canonical order; always ≥ 2.
    pub blocks: Vec<VarSet>,
    /// The disconnected set the statement came from (union of the blocks).
    pub source: VarSet,
}

impl IndependenceStatement {
    /// Renders e.g. `1 ⊥ 34` using the graph's node names.
    pub fn label(&self, names: &[String]) -> String {
        self.blocks
            .iter()
            .map(|b| b.label(names))
            .collect::<Vec<_>>()
            .join(" ⊥ ")
    }
}

impl BidirectedGraph {
    /// Builds a graph from node labels and label pairs.
    pub fn new<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self, GraphError> {
        let names: Vec<String> = nodes.iter().map(|s| s.as_ref().to_string()).collect();
        if names.len() > MAX_NODES {
            return Err(GraphError::TooManyNodes(names.len()));
        }
        let mut index = BTreeMap::new();
        for (i, n) in names.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(n.clone()));
            }
        }
        let d = names.len();
        let mut adj = vec![vec![false; d]; d];
        let mut edge_list = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let i = *index.get(a).ok_or_else(|| GraphError::UnknownNode(a.into()))?;
            let j = *index.get(b).ok_or_else(|| GraphError::UnknownNode(b.into()))?;
            if i == j {
                return Err(GraphError::SelfLoop(a.into()));
            }
            if adj[i][j] {
                return Err(GraphError::DuplicateEdge(a.into(), b.into()));
            }
            adj[i][j] = true;
            adj[j][i] = true;
            edge_list.push((i.min(j), i.max(j)));
        }
        edge_list.sort_unstable();
        Ok(BidirectedGraph { nodes: names, adj, edges: edge_list })
    }

    /// Parses the JSON graph format:
    /// `{"nodes": ["1","2"], "edges": [["1","2"]]}`.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile = serde_json::from_str(text)?;
        let edges: Vec<(&str, &str)> =
            file.edges.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let nodes: Vec<&str> = file.nodes.iter().map(|s| s.as_str()).collect();
        BidirectedGraph::new(&nodes, &edges)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    /// Edges as index pairs `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    /// Complete graph on the given labels.
    pub fn complete<S: AsRef<str>>(nodes: &[S]) -> Result<Self, GraphError> {
        let names: Vec<String> = nodes.iter().map(|s| s.as_ref().to_string()).collect();
        let mut edges = Vec::new();
        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                edges.push((names[i].clone(), names[j].clone()));
            }
        }
        BidirectedGraph::new(&names, &edges)
    }

    /// Induced subgraph on `keep`, relabelling nothing: node order is inherited.
    pub fn induced(&self, keep: &VarSet) -> Result<BidirectedGraph, GraphError> {
        self.check_set(keep)?;
        let names: Vec<&str> = keep.iter().map(|i| self.nodes[i].as_str()).collect();
        let mut edges = Vec::new();
        for (a_pos, a) in keep.iter().enumerate() {
            for b in keep.iter().skip(a_pos + 1) {
                if self.adj[a][b] {
                    edges.push((self.nodes[a].as_str(), self.nodes[b].as_str()));
                }
            }
        }
        BidirectedGraph::new(&names, &edges)
    }

    fn check_set(&self, s: &VarSet) -> Result<(), GraphError> {
        for i in s.iter() {
            if i >= self.nodes.len() {
                return Err(GraphError::IndexOutOfRange(i));
            }
        }
        Ok(())
    }

    /// Connected components of the induced subgraph `G_s`, in canonical order.
    pub fn connected_components(&self, s: &VarSet) -> Result<Vec<VarSet>, GraphError> {
        self.check_set(s)?;
        let mut seen: BTreeMap<usize, bool> = s.iter().map(|i| (i, false)).collect();
        let mut comps = Vec::new();
        for start in s.iter() {
            if seen[&start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                if std::mem::replace(seen.get_mut(&u).unwrap(), true) {
                    continue;
                }
                comp.push(u);
                for v in s.iter() {
                    if !seen[&v] && self.adj[u][v] {
                        stack.push(v);
                    }
                }
            }
            comps.push(VarSet::new(comp));
        }
        comps.sort();
        Ok(comps)
    }

    fn component_count(&self, s: &VarSet) -> usize {
        // same walk as connected_components without building the sets
        let mut seen: BTreeMap<usize, bool> = s.iter().map(|i| (i, false)).collect();
        let mut count = 0;
        for start in s.iter() {
            if seen[&start] {
                continue;
            }
            count += 1;
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                if std::mem::replace(seen.get_mut(&u).unwrap(), true) {
                    continue;
                }
                for v in s.iter() {
                    if !seen[&v] && self.adj[u][v] {
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    /// Every subset whose induced subgraph has at least two connected
    /// components, in canonical (size, then lexicographic) order.
    ///
    /// This order is the default margin sequence for the disconnected-set
    /// parameterization.
    pub fn disconnected_sets(&self) -> Vec<VarSet> {
        let d = self.nodes.len();
        let mut out = Vec::new();
        for mask in 1u32..(1u32 << d) {
            if mask.count_ones() < 2 {
                continue;
            }
            let s = VarSet::new((0..d).filter(|&i| mask & (1 << i) != 0));
            if self.component_count(&s) >= 2 {
                out.push(s);
            }
        }
        out.sort();
        out
    }

    /// One statement per disconnected set. With `reduce`, statements implied
    /// by a statement on a strictly larger disconnected set are dropped:
    /// `S(D)` is redundant when some `D' ⊋ D` has the distinct components of
    /// `G_D` landing in distinct components of `G_{D'}`.
    pub fn independence_statements(&self, reduce: bool) -> Vec<IndependenceStatement> {
        let dsets = self.disconnected_sets();
        let comps: Vec<Vec<VarSet>> = dsets
            .iter()
            .map(|d| self.connected_components(d).expect("valid set"))
            .collect();
        let mut keep = vec![true; dsets.len()];
        if reduce {
            for (i, d) in dsets.iter().enumerate() {
                'outer: for (j, dp) in dsets.iter().enumerate() {
                    if i == j || !d.is_subset(dp) || d.len() == dp.len() {
                        continue;
                    }
                    // map each component of G_D to the component of G_{D'}
                    // holding it; injective map => implied
                    let mut hit = Vec::new();
                    for c in &comps[i] {
                        let anchor = c.iter().next().unwrap();
                        let target = comps[j]
                            .iter()
                            .position(|cp| cp.contains(anchor))
                            .expect("component containment");
                        if hit.contains(&target) {
                            continue 'outer;
                        }
                        hit.push(target);
                    }
                    keep[i] = false;
                    break;
                }
            }
        }
        dsets
            .into_iter()
            .zip(comps)
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|((source, blocks), _)| IndependenceStatement { blocks, source })
            .collect()
    }

    /// True iff every path between `a` and `b` has an inner node in `c`.
    ///
    /// Under the global Markov property this licenses
    /// `A ⊥ B | V \ (A ∪ B ∪ C)`.
    pub fn is_separated(&self, a: &VarSet, b: &VarSet, c: &VarSet) -> Result<bool, GraphError> {
        self.check_set(a)?;
        self.check_set(b)?;
        self.check_set(c)?;
        if a.is_empty() || b.is_empty() {
            return Err(GraphError::EmptyEndpoint);
        }
        for (x, y) in [(a, b), (a, c), (b, c)] {
            let shared = x.intersection(y);
            if let Some(&i) = shared.as_slice().first() {
                return Err(GraphError::Overlap(self.nodes[i].clone()));
            }
        }
        // reachability from a in the graph with c removed
        let d = self.nodes.len();
        let mut reach = vec![false; d];
        let mut stack: Vec<usize> = a.iter().collect();
        while let Some(u) = stack.pop() {
            if std::mem::replace(&mut reach[u], true) {
                continue;
            }
            for (v, reached) in reach.iter().enumerate() {
                if self.adj[u][v] && !c.contains(v) && !reached {
                    stack.push(v);
                }
            }
        }
        Ok(b.iter().all(|v| !reach[v]))
    }

    /// True iff some four nodes induce a chordless path of three edges.
    ///
    /// A graph without such an induced 4-chain is Markov equivalent to a
    /// directed acyclic graph on the same nodes; with one, no such DAG exists.
    pub fn has_chordless_4chain(&self) -> bool {
        let d = self.nodes.len();
        if d < 4 {
            return false;
        }
        for mask in 0u32..(1u32 << d) {
            if mask.count_ones() != 4 {
                continue;
            }
            let nodes: Vec<usize> = (0..d).filter(|&i| mask & (1 << i) != 0).collect();
            let mut degs = [0usize; 4];
            let mut edge_count = 0;
            for i in 0..4 {
                for j in (i + 1)..4 {
                    if self.adj[nodes[i]][nodes[j]] {
                        degs[i] += 1;
                        degs[j] += 1;
                        edge_count += 1;
                    }
                }
            }
            if edge_count != 3 {
                continue;
            }
            let mut sorted = degs;
            sorted.sort_unstable();
            // three edges with degrees (1,1,2,2) is exactly an induced path
            if sorted == [1, 1, 2, 2] {
                return true;
            }
        }
        false
    }

    /// Every subset of size ≥ 2 that is not a clique, in canonical order.
    pub fn incomplete_sets(&self) -> Vec<VarSet> {
        let d = self.nodes.len();
        let mut out = Vec::new();
        for mask in 1u32..(1u32 << d) {
            if mask.count_ones() < 2 {
                continue;
            }
            let nodes: Vec<usize> = (0..d).filter(|&i| mask & (1 << i) != 0).collect();
            let complete = nodes
                .iter()
                .enumerate()
                .all(|(k, &i)| nodes[k + 1..].iter().all(|&j| self.adj[i][j]));
            if !complete {
                out.push(VarSet::new(nodes));
            }
        }
        out.sort();
        out
    }
}

//! Single-pair shortest paths under nonnegative edge weights.
//!
//! Tie-breaking is deterministic: adjacency lists are scanned in increasing
//! edge index, a label is only replaced on strict improvement, and among
//! vertices with equal tentative distance the one whose label was set first
//! is settled first. Consequently, among several shortest paths the one whose
//! edges were relaxed earliest wins.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::model::UfpInstance;
use crate::scalar::Scalar;

/// A simple path given as an ordered list of edge indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path<S> {
    pub edges: Vec<usize>,
    pub source: usize,
    pub target: usize,
    /// Sum of the weights of `edges` under which the path was computed.
    pub length: S,
}

impl<S: Scalar> Path<S> {
    /// Vertex sequence from `source` to `target`, or `None` if the edges do not
    /// form a walk in `inst` (respecting direction when directed).
    pub fn vertices(&self, inst: &UfpInstance<S>) -> Option<Vec<usize>> {
        walk_vertices(inst, self.source, &self.edges)
    }

    /// True if the edges form a vertex-simple walk from `source` to `target`.
    pub fn is_simple_walk(&self, inst: &UfpInstance<S>) -> bool {
        match self.vertices(inst) {
            Some(vs) => {
                let mut sorted = vs.clone();
                sorted.sort_unstable();
                sorted.dedup();
                sorted.len() == vs.len() && vs.last() == Some(&self.target)
            }
            None => false,
        }
    }
}

/// Follows `edges` from `source`; returns the visited vertices.
pub fn walk_vertices<S>(inst: &UfpInstance<S>, source: usize, edges: &[usize]) -> Option<Vec<usize>> {
    let mut at = source;
    let mut out = Vec::with_capacity(edges.len() + 1);
    out.push(at);
    for &ei in edges {
        let e = inst.edges.get(ei)?;
        at = if e.tail == at {
            e.head
        } else if !inst.directed && e.head == at {
            e.tail
        } else {
            return None;
        };
        out.push(at);
    }
    Some(out)
}

/// Adjacency structure for repeated queries against one instance.
#[derive(Debug, Clone)]
pub struct Graph {
    /// `adj[v]` lists `(edge index, neighbour)` in increasing edge index.
    adj: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    pub fn new<S>(inst: &UfpInstance<S>) -> Self {
        let mut adj = vec![Vec::new(); inst.vertex_count];
        for (i, e) in inst.edges.iter().enumerate() {
            adj[e.tail].push((i, e.head));
            if !inst.directed {
                adj[e.head].push((i, e.tail));
            }
        }
        Graph { adj }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbours(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[v]
    }

    /// Shortest `s`–`t` path using only edges accepted by `usable`.
    pub fn shortest_path_filtered<S, F>(&self, weights: &[S], s: usize, t: usize, usable: F) -> Option<Path<S>>
    where
        S: Scalar,
        F: Fn(usize) -> bool,
    {
        debug_assert!(s != t);
        let n = self.adj.len();
        let mut dist = vec![S::infinity(); n];
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut settled = vec![false; n];
        let mut heap = BinaryHeap::new();
        let mut seq = 0u64;
        dist[s] = S::zero();
        heap.push(Label { dist: S::zero(), seq, vertex: s });

        while let Some(Label { vertex: v, .. }) = heap.pop() {
            if settled[v] {
                continue;
            }
            settled[v] = true;
            if v == t {
                break;
            }
            let dv = dist[v];
            for &(ei, u) in &self.adj[v] {
                if settled[u] || !usable(ei) {
                    continue;
                }
                let nd = dv + weights[ei];
                if nd < dist[u] {
                    dist[u] = nd;
                    parent[u] = Some((ei, v));
                    seq += 1;
                    heap.push(Label { dist: nd, seq, vertex: u });
                }
            }
        }

        if !settled[t] {
            return None;
        }
        let mut edges = Vec::new();
        let mut at = t;
        while let Some((ei, prev)) = parent[at] {
            edges.push(ei);
            at = prev;
        }
        edges.reverse();
        Some(Path {
            edges,
            source: s,
            target: t,
            length: dist[t],
        })
    }

    pub fn shortest_path<S: Scalar>(&self, weights: &[S], s: usize, t: usize) -> Option<Path<S>> {
        self.shortest_path_filtered(weights, s, t, |_| true)
    }

    /// Whether `t` is reachable from `s` at all.
    pub fn reachable(&self, s: usize, t: usize) -> bool {
        let mut seen = vec![false; self.adj.len()];
        let mut stack = vec![s];
        seen[s] = true;
        while let Some(v) = stack.pop() {
            if v == t {
                return true;
            }
            for &(_, u) in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        false
    }
}

/// Shortest path between `s` and `t` in `inst` under `weights` (one per edge).
pub fn shortest_path<S: Scalar>(inst: &UfpInstance<S>, weights: &[S], s: usize, t: usize) -> Option<Path<S>> {
    assert_eq!(weights.len(), inst.edge_count(), "one weight per edge");
    Graph::new(inst).shortest_path(weights, s, t)
}

struct Label<S> {
    dist: S,
    seq: u64,
    vertex: usize,
}

impl<S: Scalar> PartialEq for Label<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: Scalar> Eq for Label<S> {}

impl<S: Scalar> PartialOrd for Label<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Scalar> Ord for Label<S> {
    // Reversed: BinaryHeap is a max-heap and we want the smallest (dist, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .partial_cmp(&self.dist)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

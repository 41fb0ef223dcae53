//! Connected Erdős–Rényi graphs for Cyber-Firefighter instances.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::rng::seeded;

pub const DEFAULT_RETRY_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("no connected graph after {0} attempts")]
    GenerationExhausted(usize),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("malformed graph text at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Undirected simple graph over nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FireGraph {
    adjacency: Vec<Vec<usize>>,
}

impl FireGraph {
    /// Builds a graph from an edge list. Self-loops and duplicates are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut sets = vec![BTreeSet::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::InvalidParameters(format!(
                    "edge ({u},{v}) out of range for n={n}"
                )));
            }
            if u != v {
                sets[u].insert(v);
                sets[v].insert(u);
            }
        }
        Ok(Self {
            adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
        })
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
        Self::from_edges(n, &edges).expect("path edges are in range")
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, ns) in self.adjacency.iter().enumerate() {
            for &v in ns {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Hop distances from `source`; unreachable nodes are `None`.
    pub fn distances_from(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.len()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &w in self.neighbors(u) {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.is_empty() || self.distances_from(0).iter().all(Option::is_some)
    }

    /// Text form: first line `n`, then one `u v` line per edge with `u < v`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.len());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, first) = lines.next().ok_or(GraphError::Parse {
            line: 1,
            reason: "missing node count".into(),
        })?;
        let n: usize = first.parse().map_err(|_| GraphError::Parse {
            line,
            reason: format!("bad node count `{first}`"),
        })?;
        let mut edges = Vec::new();
        for (line, l) in lines {
            let mut parts = l.split_whitespace();
            let mut next = || -> Result<usize, GraphError> {
                parts
                    .next()
                    .and_then(|p| p.parse().ok())
                    .ok_or(GraphError::Parse {
                        line,
                        reason: format!("expected `u v`, got `{l}`"),
                    })
            };
            let (u, v) = (next()?, next()?);
            edges.push((u, v));
        }
        Self::from_edges(n, &edges).map_err(|e| match e {
            GraphError::InvalidParameters(reason) => GraphError::Parse { line: 0, reason },
            other => other,
        })
    }
}

/// Samples G(n, p) conditioned on connectivity by rejection.
///
/// Pairs `(u, v)` with `u < v` are visited in lexicographic order, each
/// included independently with probability `p`. A disconnected draw is
/// discarded and the next draw continues from the advanced rng state.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<FireGraph, GraphError> {
    generate_er_capped(n, p, seed, DEFAULT_RETRY_CAP)
}

pub fn generate_er_capped(
    n: usize,
    p: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<FireGraph, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameters(format!("n={n} < 2")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(GraphError::InvalidParameters(format!("p={p} outside (0, 1]")));
    }
    let mut rng = seeded(seed);
    for _ in 0..max_attempts {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.gen_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        let g = FireGraph::from_edges(n, &edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(GraphError::GenerationExhausted(max_attempts))
}

/// BFS ball of radius `r` around `v`, including `v` itself.
pub fn neighbors_within(g: &FireGraph, v: usize, r: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([v]);
    let mut frontier = vec![v];
    for _ in 0..r {
        let mut next = Vec::new();
        for u in frontier {
            for &w in g.neighbors(u) {
                if seen.insert(w) {
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    seen
}

//! The three shipped vertex update functions: PageRank, SSSP and WCC.
//!
//! Each one is a pure function of the vertex, its incoming adjacency list
//! and the source value array, returning the new value and whether it
//! differs from the old one. PageRank accumulates contributions in col
//! order (ascending sources), which makes results independent of worker
//! count. Rank lost to zero-out-degree sinks is not redistributed, so rank
//! sums fall below 1.0 on graphs with dangling vertices.
//!
//! SSSP distances and WCC labels are integers stored in f64, so their
//! exact-equality change detection is exact. WCC propagates minimum labels
//! along in-edges only; it equals true weakly-connected components exactly
//! when every edge has a reverse counterpart, hence the preprocessor's
//! symmetrize option.

use std::fmt;
use std::str::FromStr;

use crate::model::{DegreeInfo, VertexId};

/// Damping factor applied to accumulated neighbor rank.
pub const PAGERANK_DAMPING: f64 = 0.85;
/// Uniform base rank injected per vertex, divided by the vertex count.
pub const PAGERANK_BASE: f64 = 0.15;

/// `0.15/|V| + 0.85 * sum(src[u] / out_degree(u))` over in-neighbors.
///
/// Every in-neighbor has at least the one out-edge that got it into this
/// adjacency list, so its out-degree is never zero.
pub fn pagerank_update(
    v: VertexId,
    in_neighbors: &[VertexId],
    src_values: &[f64],
    degrees: &DegreeInfo,
) -> (f64, bool) {
    let n = src_values.len() as f64;
    let mut sum = 0.0;
    for &u in in_neighbors {
        debug_assert!(degrees.out_degree[u as usize] > 0);
        sum += src_values[u as usize] / degrees.out_degree[u as usize] as f64;
    }
    let value = PAGERANK_BASE / n + PAGERANK_DAMPING * sum;
    (value, value != src_values[v as usize])
}

/// `min(src[v], min(src[u] + 1))` over in-neighbors; unit edge weights.
pub fn sssp_update(v: VertexId, in_neighbors: &[VertexId], src_values: &[f64]) -> (f64, bool) {
    let mut best = src_values[v as usize];
    for &u in in_neighbors {
        let candidate = src_values[u as usize] + 1.0;
        if candidate < best {
            best = candidate;
        }
    }
    (best, best != src_values[v as usize])
}

/// `min(src[v], min(src[u]))` over in-neighbors.
pub fn wcc_update(v: VertexId, in_neighbors: &[VertexId], src_values: &[f64]) -> (f64, bool) {
    let mut label = src_values[v as usize];
    for &u in in_neighbors {
        if src_values[u as usize] < label {
            label = src_values[u as usize];
        }
    }
    (label, label != src_values[v as usize])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmKind {
    PageRank,
    Sssp,
    Wcc,
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            AlgorithmKind::PageRank => "pagerank",
            AlgorithmKind::Sssp => "sssp",
            AlgorithmKind::Wcc => "wcc",
        };
        f.write_str(name)
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pagerank" => Ok(AlgorithmKind::PageRank),
            "sssp" => Ok(AlgorithmKind::Sssp),
            "wcc" => Ok(AlgorithmKind::Wcc),
            other => Err(format!(
                "unknown algorithm {other:?}; expected pagerank, sssp or wcc"
            )),
        }
    }
}

/// Which algorithm to run plus its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    /// SSSP start vertex; ignored by the other algorithms.
    pub source_vertex: VertexId,
}

impl AlgorithmSpec {
    pub fn new(kind: AlgorithmKind) -> Self {
        Self {
            kind,
            source_vertex: 0,
        }
    }

    pub fn with_source(kind: AlgorithmKind, source_vertex: VertexId) -> Self {
        Self {
            kind,
            source_vertex,
        }
    }

    pub fn validate(&self, vertex_count: u64) -> Result<(), String> {
        if self.kind == AlgorithmKind::Sssp && self.source_vertex >= vertex_count {
            return Err(format!(
                "sssp source vertex {} is out of range [0, {vertex_count})",
                self.source_vertex
            ));
        }
        Ok(())
    }

    /// Initial vertex values: uniform `1/|V|` rank, hop distance 0 at the
    /// source and infinity elsewhere, or each vertex's own id as label.
    pub fn initial_values(&self, vertex_count: u64) -> Vec<f64> {
        let n = vertex_count as usize;
        match self.kind {
            AlgorithmKind::PageRank => vec![1.0 / vertex_count as f64; n],
            AlgorithmKind::Sssp => {
                let mut values = vec![f64::INFINITY; n];
                values[self.source_vertex as usize] = 0.0;
                values
            }
            AlgorithmKind::Wcc => (0..vertex_count).map(|v| v as f64).collect(),
        }
    }

    /// The engine-facing update closure. With a nonzero tolerance the
    /// change flag becomes `|new - old| > tolerance` instead of exact
    /// inequality.
    pub fn update_fn(
        &self,
        tolerance: f64,
    ) -> impl Fn(VertexId, &[VertexId], &[f64], &DegreeInfo) -> (f64, bool) + Sync + Send {
        let kind = self.kind;
        move |v, in_neighbors, src_values, degrees| {
            let (value, changed) = match kind {
                AlgorithmKind::PageRank => pagerank_update(v, in_neighbors, src_values, degrees),
                AlgorithmKind::Sssp => sssp_update(v, in_neighbors, src_values),
                AlgorithmKind::Wcc => wcc_update(v, in_neighbors, src_values),
            };
            if tolerance > 0.0 {
                (value, (value - src_values[v as usize]).abs() > tolerance)
            } else {
                (value, changed)
            }
        }
    }
}

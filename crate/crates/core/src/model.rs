//! Core graph domain types shared by every other module.
//!
//! Vertices are dense 0-based integer ids. Vertex values are `f64`
//! throughout: PageRank stores ranks, SSSP stores hop distances and WCC
//! stores component labels, all of which fit a 64-bit float exactly at the
//! scales this engine targets.

use thiserror::Error;

/// Dense vertex id in `[0, vertex_count)`.
pub type VertexId = u64;

/// A contiguous half-open range of vertex ids owned by exactly one shard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexInterval {
    /// Inclusive lower bound.
    pub lo: VertexId,
    /// Exclusive upper bound.
    pub hi: VertexId,
    /// Number of edges whose destination lies in `[lo, hi)`.
    pub edge_count: u64,
}

impl VertexInterval {
    pub fn new(lo: VertexId, hi: VertexId, edge_count: u64) -> Self {
        Self { lo, hi, edge_count }
    }

    /// Number of vertices in the interval.
    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.lo <= v && v < self.hi
    }
}

/// Violation of a [`GraphMeta`] invariant. `validate` reports the first one
/// found scanning intervals in order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetaError {
    #[error("no intervals")]
    NoIntervals,
    #[error("interval {index} is empty or inverted: [{lo}, {hi})")]
    EmptyInterval { index: usize, lo: u64, hi: u64 },
    #[error("gap in coverage before interval {index}: expected lo {expected}, found {found}")]
    Gap {
        index: usize,
        expected: u64,
        found: u64,
    },
    #[error("overlapping intervals at {index}: expected lo {expected}, found {found}")]
    Overlap {
        index: usize,
        expected: u64,
        found: u64,
    },
    #[error("intervals cover [0, {covered}) but vertex_count is {vertex_count}")]
    Coverage { covered: u64, vertex_count: u64 },
    #[error("shard_count is {shard_count} but there are {interval_count} intervals")]
    ShardCountMismatch {
        shard_count: u64,
        interval_count: u64,
    },
    #[error("per-interval edge counts sum to {summed} but edge_count is {edge_count}")]
    EdgeCountMismatch { summed: u64, edge_count: u64 },
}

/// Global graph properties: counts plus the interval table (the contents of
/// the on-disk property file).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphMeta {
    pub vertex_count: u64,
    pub edge_count: u64,
    pub shard_count: u64,
    pub intervals: Vec<VertexInterval>,
}

impl GraphMeta {
    pub fn new(vertex_count: u64, edge_count: u64, intervals: Vec<VertexInterval>) -> Self {
        Self {
            vertex_count,
            edge_count,
            shard_count: intervals.len() as u64,
            intervals,
        }
    }

    /// Checks every invariant; returns the first violation found.
    ///
    /// Intervals must be non-empty, sorted, disjoint, contiguous and cover
    /// exactly `[0, vertex_count)`; the shard count and the per-interval
    /// edge counts must agree with the global counts.
    pub fn validate(&self) -> Result<(), MetaError> {
        if self.intervals.is_empty() {
            return Err(MetaError::NoIntervals);
        }
        if self.shard_count != self.intervals.len() as u64 {
            return Err(MetaError::ShardCountMismatch {
                shard_count: self.shard_count,
                interval_count: self.intervals.len() as u64,
            });
        }
        let mut expected = 0u64;
        for (index, iv) in self.intervals.iter().enumerate() {
            if iv.is_empty() {
                return Err(MetaError::EmptyInterval {
                    index,
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
            if iv.lo > expected {
                return Err(MetaError::Gap {
                    index,
                    expected,
                    found: iv.lo,
                });
            }
            if iv.lo < expected {
                return Err(MetaError::Overlap {
                    index,
                    expected,
                    found: iv.lo,
                });
            }
            expected = iv.hi;
        }
        if expected != self.vertex_count {
            return Err(MetaError::Coverage {
                covered: expected,
                vertex_count: self.vertex_count,
            });
        }
        let summed: u64 = self.intervals.iter().map(|iv| iv.edge_count).sum();
        if summed != self.edge_count {
            return Err(MetaError::EdgeCountMismatch {
                summed,
                edge_count: self.edge_count,
            });
        }
        Ok(())
    }

    /// Index of the interval owning `v`, by binary search over `hi` bounds.
    /// Returns `None` for out-of-range ids.
    pub fn interval_of(&self, v: VertexId) -> Option<usize> {
        let idx = self.intervals.partition_point(|iv| iv.hi <= v);
        match self.intervals.get(idx) {
            Some(iv) if iv.contains(v) => Some(idx),
            _ => None,
        }
    }
}

/// Free-function form of [`GraphMeta::validate`].
pub fn validate_meta(meta: &GraphMeta) -> Result<(), MetaError> {
    meta.validate()
}

/// Per-vertex in/out degree arrays. Both sum to the edge count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeInfo {
    pub in_degree: Vec<u64>,
    pub out_degree: Vec<u64>,
}

impl DegreeInfo {
    pub fn vertex_count(&self) -> usize {
        self.in_degree.len()
    }
}

/// Double-buffered vertex values plus the active set.
///
/// `src_values` is the read-only input of the current iteration,
/// `dst_values` collects its output; the engine swaps them at the iteration
/// barrier. `active` lists the vertices whose value changed in the last
/// completed iteration.
#[derive(Debug, Clone)]
pub struct VertexState {
    pub src_values: Vec<f64>,
    pub dst_values: Vec<f64>,
    pub active: Vec<VertexId>,
}

impl VertexState {
    /// Initial state before iteration 0: every vertex counts as active so
    /// the first pass touches every shard.
    pub fn new(init_values: Vec<f64>) -> Self {
        let n = init_values.len();
        Self {
            src_values: init_values,
            dst_values: vec![0.0; n],
            active: (0..n as u64).collect(),
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.src_values.len()
    }

    /// Fraction of vertices active after the last iteration.
    pub fn active_ratio(&self) -> f64 {
        if self.src_values.is_empty() {
            0.0
        } else {
            self.active.len() as f64 / self.src_values.len() as f64
        }
    }

    /// The iteration barrier: last iteration's output becomes next
    /// iteration's input.
    pub fn swap_buffers(&mut self) {
        std::mem::swap(&mut self.src_values, &mut self.dst_values);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(vertex_count: u64, spans: &[(u64, u64, u64)]) -> GraphMeta {
        let intervals = spans
            .iter()
            .map(|&(lo, hi, e)| VertexInterval::new(lo, hi, e))
            .collect();
        let edge_count = spans.iter().map(|&(_, _, e)| e).sum();
        GraphMeta::new(vertex_count, edge_count, intervals)
    }

    #[test]
    fn validate_accepts_three_even_intervals() {
        let m = meta(6, &[(0, 2, 1), (2, 4, 1), (4, 6, 1)]);
        assert_eq!(m.shard_count, 3);
        assert!(m.validate().is_ok());
    }

    #[test]
    fn validate_rejects_gap() {
        let m = meta(6, &[(0, 2, 1), (3, 6, 1)]);
        assert_eq!(
            m.validate(),
            Err(MetaError::Gap {
                index: 1,
                expected: 2,
                found: 3
            })
        );
    }

    #[test]
    fn validate_accepts_singleton_graph() {
        let m = meta(1, &[(0, 1, 0)]);
        assert!(m.validate().is_ok());
    }

    #[test]
    fn validate_rejects_overlap() {
        let m = meta(6, &[(0, 3, 1), (2, 6, 1)]);
        assert!(matches!(m.validate(), Err(MetaError::Overlap { .. })));
    }

    #[test]
    fn validate_rejects_count_mismatches() {
        let mut m = meta(6, &[(0, 3, 1), (3, 6, 1)]);
        m.shard_count = 3;
        assert!(matches!(
            m.validate(),
            Err(MetaError::ShardCountMismatch { .. })
        ));

        let mut m = meta(6, &[(0, 3, 1), (3, 6, 1)]);
        m.edge_count = 5;
        assert!(matches!(
            m.validate(),
            Err(MetaError::EdgeCountMismatch { .. })
        ));

        let m = meta(7, &[(0, 3, 1), (3, 6, 1)]);
        assert!(matches!(m.validate(), Err(MetaError::Coverage { .. })));
    }

    #[test]
    fn validate_rejects_empty_interval() {
        let m = meta(6, &[(0, 0, 0), (0, 6, 2)]);
        assert!(matches!(m.validate(), Err(MetaError::EmptyInterval { .. })));
    }

    #[test]
    fn interval_lookup_matches_linear_scan() {
        let m = meta(10, &[(0, 1, 0), (1, 4, 2), (4, 9, 3), (9, 10, 1)]);
        m.validate().unwrap();
        for v in 0..m.vertex_count {
            let linear = m.intervals.iter().position(|iv| iv.contains(v));
            assert_eq!(m.interval_of(v), linear, "vertex {v}");
            assert!(linear.is_some(), "vertex {v} must map to an interval");
        }
        assert_eq!(m.interval_of(10), None);
        assert_eq!(m.interval_of(u64::MAX), None);
    }

    #[test]
    fn vertex_state_starts_fully_active() {
        let st = VertexState::new(vec![0.5; 4]);
        assert_eq!(st.active, vec![0, 1, 2, 3]);
        assert_eq!(st.active_ratio(), 1.0);
    }
}

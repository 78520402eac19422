//! Selective scheduling: per-shard Bloom filters over edge sources.
//!
//! A shard whose sources were all inactive last iteration cannot produce
//! any new updates, so once the active ratio drops below the threshold the
//! engine probes each shard's filter with the active list and skips shards
//! with no hits. Bloom filters never yield false negatives, so a skip is
//! always sound; false positives only cost a redundant load.

use crate::error::Result;
use crate::model::{GraphMeta, VertexId};
use crate::store::{Shard, ShardStore};

/// Default filter sizing; ~1% false positives with the derived hash count.
pub const BITS_PER_ELEMENT: u64 = 10;
/// Active-ratio threshold below which shard skipping is considered.
pub const DEFAULT_ACTIVATION_THRESHOLD: f64 = 0.001;

/// Bloom filter over the distinct source vertices of one shard.
///
/// Sizing: `m = bits_per_element * n` bits and `k = round(m/n * ln 2)`
/// hash probes, clamped to `[1, 16]`. Probes use double hashing over a
/// 64-bit mix of the vertex id.
#[derive(Debug, Clone)]
pub struct ShardBloomFilter {
    bits: Vec<u64>,
    bit_count: u64,
    hash_count: u32,
    element_count: u64,
}

impl ShardBloomFilter {
    /// Builds a filter sized for `expected` distinct elements.
    pub fn with_capacity(expected: u64) -> Self {
        let bit_count = (BITS_PER_ELEMENT * expected).max(1);
        let hash_count = if expected == 0 {
            1
        } else {
            let per_element = bit_count as f64 / expected as f64;
            (per_element * std::f64::consts::LN_2).round().clamp(1.0, 16.0) as u32
        };
        let words = bit_count.div_ceil(64) as usize;
        Self {
            bits: vec![0; words],
            bit_count,
            hash_count,
            element_count: 0,
        }
    }

    /// Builds the filter over the distinct sources of a shard's col array.
    pub fn from_shard(shard: &Shard) -> Self {
        let mut sources = shard.col.clone();
        sources.sort_unstable();
        sources.dedup();
        let mut filter = Self::with_capacity(sources.len() as u64);
        for v in sources {
            filter.insert(v);
        }
        filter
    }

    pub fn insert(&mut self, v: VertexId) {
        let (h1, h2) = hash_pair(v);
        for i in 0..self.hash_count as u64 {
            let bit = h1.wrapping_add(i.wrapping_mul(h2)) % self.bit_count;
            self.bits[(bit / 64) as usize] |= 1 << (bit % 64);
        }
        self.element_count += 1;
    }

    /// True if `v` may have been inserted; never false for inserted ids.
    pub fn contains(&self, v: VertexId) -> bool {
        let (h1, h2) = hash_pair(v);
        (0..self.hash_count as u64).all(|i| {
            let bit = h1.wrapping_add(i.wrapping_mul(h2)) % self.bit_count;
            self.bits[(bit / 64) as usize] & (1 << (bit % 64)) != 0
        })
    }

    /// True if any of the given vertices may be present, short-circuiting
    /// on the first hit.
    pub fn contains_any(&self, vertices: &[VertexId]) -> bool {
        vertices.iter().any(|&v| self.contains(v))
    }

    pub fn bit_count(&self) -> u64 {
        self.bit_count
    }

    pub fn hash_count(&self) -> u32 {
        self.hash_count
    }

    pub fn element_count(&self) -> u64 {
        self.element_count
    }
}

/// SplitMix64 finalizer; decorrelates the dense ids we feed it.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn hash_pair(v: VertexId) -> (u64, u64) {
    let h1 = mix64(v);
    // An odd second hash avoids degenerate probe sequences.
    let h2 = mix64(v ^ 0xa5a5_a5a5_a5a5_a5a5) | 1;
    (h1, h2)
}

/// Reads every shard through the store and builds its filter. The engine
/// performs the same construction through the cache during its load phase;
/// this plain variant keeps the operation usable standalone.
pub fn build_filters(store: &ShardStore, meta: &GraphMeta) -> Result<Vec<ShardBloomFilter>> {
    let mut filters = Vec::with_capacity(meta.shard_count as usize);
    for shard_id in 0..meta.shard_count as u32 {
        let shard = store.read_shard(shard_id)?;
        filters.push(ShardBloomFilter::from_shard(&shard));
    }
    Ok(filters)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleAction {
    Load,
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleReason {
    SchedulingOff,
    RatioAboveThreshold,
    FilterHit,
    FilterMiss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleDecision {
    pub shard_id: u32,
    pub action: ScheduleAction,
    pub reason: ScheduleReason,
}

/// Per-shard load/skip decision.
///
/// A shard loads when scheduling is off, when the active ratio is above
/// the threshold, or when any active vertex hits its filter (probing the
/// active list, which is at most `threshold * |V|` long whenever the probe
/// runs). Only a filter miss ever skips.
pub fn decide(
    shard_id: u32,
    filters: &[ShardBloomFilter],
    active_vertices: &[VertexId],
    active_ratio: f64,
    selective: bool,
    threshold: f64,
) -> ScheduleDecision {
    if !selective {
        return ScheduleDecision {
            shard_id,
            action: ScheduleAction::Load,
            reason: ScheduleReason::SchedulingOff,
        };
    }
    if active_ratio > threshold {
        return ScheduleDecision {
            shard_id,
            action: ScheduleAction::Load,
            reason: ScheduleReason::RatioAboveThreshold,
        };
    }
    if filters[shard_id as usize].contains_any(active_vertices) {
        ScheduleDecision {
            shard_id,
            action: ScheduleAction::Load,
            reason: ScheduleReason::FilterHit,
        }
    } else {
        ScheduleDecision {
            shard_id,
            action: ScheduleAction::Skip,
            reason: ScheduleReason::FilterMiss,
        }
    }
}

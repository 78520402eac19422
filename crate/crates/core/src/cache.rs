//! Budgeted in-memory shard cache with pluggable compression.
//!
//! Admission is first-come-until-full and nothing is ever evicted: the
//! working set of shards is fixed across iterations, so whichever shards
//! fit on the first pass stay hot for the rest of the run. Cached payloads
//! are the encoded file bytes with the header stripped, compressed
//! according to the mode:
//!
//! * mode-1 — uncompressed
//! * mode-2 — snappy
//! * mode-3 — zlib level 1
//! * mode-4 — zlib level 3
//!
//! Higher modes trade decompression time for more shards per byte of
//! budget. A budget of zero disables caching entirely.

use std::collections::HashMap;
use std::io::Read;
use std::sync::Arc;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::store::{decode_shard_body, Shard, ShardHeader, ShardStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    Uncompressed,
    Snappy,
    ZlibFast,
    ZlibBetter,
}

impl CacheMode {
    /// Numeric mode as exposed on the command line (1..=4).
    pub fn level(self) -> u8 {
        match self {
            CacheMode::Uncompressed => 1,
            CacheMode::Snappy => 2,
            CacheMode::ZlibFast => 3,
            CacheMode::ZlibBetter => 4,
        }
    }

    pub fn from_level(level: u8) -> Option<Self> {
        match level {
            1 => Some(CacheMode::Uncompressed),
            2 => Some(CacheMode::Snappy),
            3 => Some(CacheMode::ZlibFast),
            4 => Some(CacheMode::ZlibBetter),
            _ => None,
        }
    }

    pub const ALL: [CacheMode; 4] = [
        CacheMode::Uncompressed,
        CacheMode::Snappy,
        CacheMode::ZlibFast,
        CacheMode::ZlibBetter,
    ];
}

/// Compresses `bytes` per `mode`. Mode-1 copies.
pub fn compress(mode: CacheMode, bytes: &[u8]) -> Vec<u8> {
    match mode {
        CacheMode::Uncompressed => bytes.to_vec(),
        CacheMode::Snappy => snap::raw::Encoder::new()
            .compress_vec(bytes)
            .expect("snappy compression is infallible for in-memory buffers"),
        CacheMode::ZlibFast => zlib_compress(bytes, 1),
        CacheMode::ZlibBetter => zlib_compress(bytes, 3),
    }
}

/// Decompresses and verifies the expected length.
pub fn decompress(mode: CacheMode, bytes: &[u8], raw_len: usize) -> Result<Vec<u8>, String> {
    let out = match mode {
        CacheMode::Uncompressed => bytes.to_vec(),
        CacheMode::Snappy => snap::raw::Decoder::new()
            .decompress_vec(bytes)
            .map_err(|e| format!("snappy: {e}"))?,
        CacheMode::ZlibFast | CacheMode::ZlibBetter => {
            let mut out = Vec::with_capacity(raw_len);
            flate2::read::ZlibDecoder::new(bytes)
                .read_to_end(&mut out)
                .map_err(|e| format!("zlib: {e}"))?;
            out
        }
    };
    if out.len() != raw_len {
        return Err(format!(
            "decompressed to {} bytes, expected {raw_len}",
            out.len()
        ));
    }
    Ok(out)
}

fn zlib_compress(bytes: &[u8], level: u32) -> Vec<u8> {
    let mut enc =
        flate2::write::ZlibEncoder::new(Vec::new(), flate2::Compression::new(level));
    use std::io::Write;
    enc.write_all(bytes).expect("in-memory zlib write");
    enc.finish().expect("in-memory zlib finish")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheConfig {
    /// Total bytes of stored (compressed) payload allowed; 0 disables.
    pub budget_bytes: u64,
    pub mode: CacheMode,
}

impl Default for CacheConfig {
    fn default() -> Self {
        Self {
            budget_bytes: 0,
            mode: CacheMode::Uncompressed,
        }
    }
}

impl CacheConfig {
    pub fn disabled() -> Self {
        Self::default()
    }

    pub fn unbounded(mode: CacheMode) -> Self {
        Self {
            budget_bytes: u64::MAX,
            mode,
        }
    }
}

struct CacheEntry {
    header: ShardHeader,
    payload: Arc<Vec<u8>>,
    stored_bytes: u64,
    raw_bytes: u64,
}

#[derive(Default)]
struct CacheInner {
    entries: HashMap<u32, CacheEntry>,
    used_bytes: u64,
}

/// Outcome of an admission attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmitOutcome {
    Admitted,
    /// The compressed payload does not fit the remaining budget.
    RejectedFull,
    /// Another path already admitted this shard; nothing was stored twice.
    AlreadyPresent,
}

/// Point-in-time cache occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheStats {
    pub entries: usize,
    pub stored_bytes: u64,
    pub raw_bytes: u64,
}

pub struct ShardCache {
    config: CacheConfig,
    inner: RwLock<CacheInner>,
}

impl ShardCache {
    pub fn new(config: CacheConfig) -> Self {
        Self {
            config,
            inner: RwLock::new(CacheInner::default()),
        }
    }

    pub fn config(&self) -> &CacheConfig {
        &self.config
    }

    /// Returns the shard, from the cache when possible, from the store
    /// otherwise. The returned shard is identical on either path.
    ///
    /// Hits count `cache_hits` and read no file bytes. Misses count
    /// `cache_misses`, read through the store's counters, and admit the
    /// compressed payload if it fits. A payload that fails integrity
    /// checks on decompression is dropped and reloaded from disk once,
    /// taking the miss path.
    pub fn get_or_load(&self, store: &ShardStore, shard_id: u32) -> Result<Shard> {
        if let Some((header, payload, raw_bytes)) = self.lookup(shard_id) {
            match decompress(self.config.mode, &payload, raw_bytes as usize) {
                Ok(body) => {
                    store.counters().record_cache_hit();
                    return decode_shard_body(&header, &body)
                        .map_err(|msg| Error::corrupt(store.shard_path(shard_id), msg));
                }
                Err(_) => {
                    // Corrupted entry: drop it and fall through to disk.
                    self.remove(shard_id);
                }
            }
        }
        store.counters().record_cache_miss();
        let (header, body) = store.read_shard_raw(shard_id)?;
        if self.config.budget_bytes > 0 {
            self.admit(header, &body);
        }
        decode_shard_body(&header, &body)
            .map_err(|msg| Error::corrupt(store.shard_path(shard_id), msg))
    }

    fn lookup(&self, shard_id: u32) -> Option<(ShardHeader, Arc<Vec<u8>>, u64)> {
        let inner = self.inner.read().unwrap();
        inner
            .entries
            .get(&shard_id)
            .map(|e| (e.header, Arc::clone(&e.payload), e.raw_bytes))
    }

    fn remove(&self, shard_id: u32) {
        let mut inner = self.inner.write().unwrap();
        if let Some(e) = inner.entries.remove(&shard_id) {
            inner.used_bytes -= e.stored_bytes;
        }
    }

    /// Compresses `body` and stores it iff it fits the remaining budget.
    /// Admissions are serialized by the write lock, so the budget is never
    /// exceeded even under concurrent misses; a shard that is already
    /// present is left untouched.
    pub fn admit(&self, header: ShardHeader, body: &[u8]) -> AdmitOutcome {
        let compressed = compress(self.config.mode, body);
        let stored_bytes = compressed.len() as u64;
        let mut inner = self.inner.write().unwrap();
        if inner.entries.contains_key(&header.shard_id) {
            return AdmitOutcome::AlreadyPresent;
        }
        if inner.used_bytes.saturating_add(stored_bytes) > self.config.budget_bytes {
            return AdmitOutcome::RejectedFull;
        }
        inner.used_bytes += stored_bytes;
        inner.entries.insert(
            header.shard_id,
            CacheEntry {
                header,
                payload: Arc::new(compressed),
                stored_bytes,
                raw_bytes: body.len() as u64,
            },
        );
        debug_assert!(inner.used_bytes <= self.config.budget_bytes);
        AdmitOutcome::Admitted
    }

    pub fn contains(&self, shard_id: u32) -> bool {
        self.inner.read().unwrap().entries.contains_key(&shard_id)
    }

    pub fn stats(&self) -> CacheStats {
        let inner = self.inner.read().unwrap();
        CacheStats {
            entries: inner.entries.len(),
            stored_bytes: inner.used_bytes,
            raw_bytes: inner.entries.values().map(|e| e.raw_bytes).sum(),
        }
    }

    /// Test hook: garble a cached payload so the next hit fails integrity
    /// checking and takes the reload path.
    #[cfg(test)]
    pub(crate) fn corrupt_entry(&self, shard_id: u32) {
        let mut inner = self.inner.write().unwrap();
        if let Some(e) = inner.entries.get_mut(&shard_id) {
            // Truncating breaks both the codec stream and the length check.
            let mut garbled: Vec<u8> = e.payload.as_ref().clone();
            garbled.truncate(garbled.len() / 2);
            e.payload = Arc::new(garbled);
        }
    }
}

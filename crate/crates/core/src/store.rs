//! On-disk shard and metadata formats, plus instrumented readers.
//!
//! Layout of a graph directory:
//!
//! ```text
//! <dir>/property.bin   vertex_count, edge_count, shard_count, then one
//!                      (lo, hi, edge_count) record per interval — all u64 LE
//! <dir>/vertices.bin   values (f64 LE ×|V|), in-degrees (u64 LE ×|V|),
//!                      out-degrees (u64 LE ×|V|)
//! <dir>/shard_<k>.bin  40-byte header, row array (u64 LE), col array (u64 LE)
//! <dir>/idmap.bin      optional: original id per dense id (u64 LE ×|V|)
//! ```
//!
//! A shard file header is exactly [`SHARD_HEADER_LEN`] bytes: the 8-byte
//! magic, format version (u32), shard id (u32), then lo, hi and edge count
//! as u64. Everything is little-endian and fixed-width, so file sizes have
//! closed forms: a shard file is `40 + 8*(hi-lo+1) + 8*edge_count` bytes.
//!
//! All reads go through [`ShardStore`], which owns the [`IoCounters`] used
//! to verify the engine's I/O behaviour (cache hits bypass the store and
//! therefore the counters).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::model::{DegreeInfo, GraphMeta, VertexId, VertexInterval};

pub const SHARD_MAGIC: [u8; 8] = *b"SEMGRAPH";
pub const FORMAT_VERSION: u32 = 1;
/// Fixed shard header size in bytes.
pub const SHARD_HEADER_LEN: u64 = 40;
/// Bytes per row-array entry on disk.
pub const ROW_ENTRY_BYTES: u64 = 8;
/// Bytes per col-array entry (one edge record) on disk.
pub const COL_ENTRY_BYTES: u64 = 8;

pub const PROPERTY_FILE: &str = "property.bin";
pub const VERTEX_FILE: &str = "vertices.bin";
pub const IDMAP_FILE: &str = "idmap.bin";

pub fn shard_file_name(shard_id: u32) -> String {
    format!("shard_{shard_id}.bin")
}

/// One vertex interval's in-edges in CSR form.
///
/// `row` has `interval.len() + 1` entries with `row[0] == 0`; the in-edge
/// sources of vertex `v` in `[lo, hi)` are `col[row[v-lo] .. row[v-lo+1]]`,
/// sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shard {
    pub shard_id: u32,
    pub interval: VertexInterval,
    pub row: Vec<u64>,
    pub col: Vec<VertexId>,
}

impl Shard {
    /// In-edge sources of `v`, which must lie inside the interval.
    pub fn in_neighbors(&self, v: VertexId) -> &[VertexId] {
        debug_assert!(self.interval.contains(v));
        let i = (v - self.interval.lo) as usize;
        &self.col[self.row[i] as usize..self.row[i + 1] as usize]
    }

    /// Structural invariants: row shape, monotonicity, and agreement with
    /// the interval's edge count. Does not check col entries against a
    /// vertex count; see [`Shard::validate`].
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        let len = self.interval.len() as usize;
        if self.interval.is_empty() {
            return Err(format!(
                "empty interval [{}, {})",
                self.interval.lo, self.interval.hi
            ));
        }
        if self.row.len() != len + 1 {
            return Err(format!(
                "row length {} does not match interval length {} + 1",
                self.row.len(),
                len
            ));
        }
        if self.row[0] != 0 {
            return Err(format!("row[0] is {}, expected 0", self.row[0]));
        }
        if self.row.windows(2).any(|w| w[0] > w[1]) {
            return Err("row array is not non-decreasing".to_string());
        }
        if *self.row.last().unwrap() != self.col.len() as u64 {
            return Err(format!(
                "row[last] is {} but col has {} entries",
                self.row.last().unwrap(),
                self.col.len()
            ));
        }
        if self.interval.edge_count != self.col.len() as u64 {
            return Err(format!(
                "interval edge_count {} but col has {} entries",
                self.interval.edge_count,
                self.col.len()
            ));
        }
        Ok(())
    }

    /// Full validation including source-id range checks.
    pub fn validate(&self, vertex_count: u64) -> std::result::Result<(), String> {
        self.check_structure()?;
        if let Some(&bad) = self.col.iter().find(|&&u| u >= vertex_count) {
            return Err(format!("col entry {bad} >= vertex_count {vertex_count}"));
        }
        Ok(())
    }

    /// Exact on-disk size of this shard.
    pub fn file_len(&self) -> u64 {
        shard_file_len(&self.interval)
    }
}

/// Exact on-disk size of a shard covering `interval`.
pub fn shard_file_len(interval: &VertexInterval) -> u64 {
    SHARD_HEADER_LEN + ROW_ENTRY_BYTES * (interval.len() + 1) + COL_ENTRY_BYTES * interval.edge_count
}

/// Sum of all shard file sizes for a graph, from its metadata alone.
pub fn total_shard_file_len(meta: &GraphMeta) -> u64 {
    meta.intervals.iter().map(shard_file_len).sum()
}

/// Decoded shard file header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardHeader {
    pub shard_id: u32,
    pub lo: u64,
    pub hi: u64,
    pub edge_count: u64,
}

impl ShardHeader {
    pub fn interval(&self) -> VertexInterval {
        VertexInterval::new(self.lo, self.hi, self.edge_count)
    }

    pub fn of(shard: &Shard) -> Self {
        Self {
            shard_id: shard.shard_id,
            lo: shard.interval.lo,
            hi: shard.interval.hi,
            edge_count: shard.interval.edge_count,
        }
    }

    fn encode(&self) -> [u8; SHARD_HEADER_LEN as usize] {
        let mut buf = [0u8; SHARD_HEADER_LEN as usize];
        buf[0..8].copy_from_slice(&SHARD_MAGIC);
        buf[8..12].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf[12..16].copy_from_slice(&self.shard_id.to_le_bytes());
        buf[16..24].copy_from_slice(&self.lo.to_le_bytes());
        buf[24..32].copy_from_slice(&self.hi.to_le_bytes());
        buf[32..40].copy_from_slice(&self.edge_count.to_le_bytes());
        buf
    }

    fn decode(buf: &[u8]) -> std::result::Result<Self, String> {
        if buf.len() < SHARD_HEADER_LEN as usize {
            return Err(format!("file too short for header: {} bytes", buf.len()));
        }
        if buf[0..8] != SHARD_MAGIC {
            return Err("bad magic".to_string());
        }
        let version = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(format!(
                "unsupported version {version}, expected {FORMAT_VERSION}"
            ));
        }
        Ok(Self {
            shard_id: u32::from_le_bytes(buf[12..16].try_into().unwrap()),
            lo: u64::from_le_bytes(buf[16..24].try_into().unwrap()),
            hi: u64::from_le_bytes(buf[24..32].try_into().unwrap()),
            edge_count: u64::from_le_bytes(buf[32..40].try_into().unwrap()),
        })
    }
}

/// Encode the post-header portion of a shard file: row then col, u64 LE.
pub fn encode_shard_body(shard: &Shard) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (shard.row.len() + shard.col.len()));
    for &r in &shard.row {
        out.extend_from_slice(&r.to_le_bytes());
    }
    for &c in &shard.col {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out
}

/// Decode a shard body (the bytes after the header) against its header.
pub fn decode_shard_body(header: &ShardHeader, body: &[u8]) -> std::result::Result<Shard, String> {
    if header.hi <= header.lo {
        return Err(format!("empty interval [{}, {})", header.lo, header.hi));
    }
    let row_len = (header.hi - header.lo + 1) as usize;
    let expected = 8 * row_len as u64 + 8 * header.edge_count;
    if body.len() as u64 != expected {
        return Err(format!(
            "truncated or oversized body: {} bytes, expected {expected}",
            body.len()
        ));
    }
    let mut row = Vec::with_capacity(row_len);
    for chunk in body[..8 * row_len].chunks_exact(8) {
        row.push(u64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let mut col = Vec::with_capacity(header.edge_count as usize);
    for chunk in body[8 * row_len..].chunks_exact(8) {
        col.push(u64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let shard = Shard {
        shard_id: header.shard_id,
        interval: header.interval(),
        row,
        col,
    };
    shard.check_structure()?;
    Ok(shard)
}

/// Monotone I/O counters for a run. Vertex writes are expected to stay at 0
/// for the whole iteration phase; that is the property the engine's tests
/// pin down.
#[derive(Debug, Default)]
pub struct IoCounters {
    shard_bytes_read: AtomicU64,
    shard_loads: AtomicU64,
    vertex_bytes_written: AtomicU64,
    cache_hits: AtomicU64,
    cache_misses: AtomicU64,
}

/// Plain-value snapshot of [`IoCounters`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IoSnapshot {
    pub shard_bytes_read: u64,
    pub shard_loads: u64,
    pub vertex_bytes_written: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

impl IoCounters {
    pub fn shard_bytes_read(&self) -> u64 {
        self.shard_bytes_read.load(Ordering::Relaxed)
    }

    pub fn shard_loads(&self) -> u64 {
        self.shard_loads.load(Ordering::Relaxed)
    }

    pub fn vertex_bytes_written(&self) -> u64 {
        self.vertex_bytes_written.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub fn cache_misses(&self) -> u64 {
        self.cache_misses.load(Ordering::Relaxed)
    }

    pub fn record_shard_read(&self, bytes: u64) {
        self.shard_bytes_read.fetch_add(bytes, Ordering::Relaxed);
        self.shard_loads.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_vertex_write(&self, bytes: u64) {
        self.vertex_bytes_written.fetch_add(bytes, Ordering::Relaxed);
    }

    pub fn record_cache_hit(&self) {
        self.cache_hits.fetch_add(1, Ordering::Relaxed);
    }

    pub fn record_cache_miss(&self) {
        self.cache_misses.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> IoSnapshot {
        IoSnapshot {
            shard_bytes_read: self.shard_bytes_read(),
            shard_loads: self.shard_loads(),
            vertex_bytes_written: self.vertex_bytes_written(),
            cache_hits: self.cache_hits(),
            cache_misses: self.cache_misses(),
        }
    }
}

/// Handle to a graph directory plus the I/O counters for this process.
#[derive(Debug)]
pub struct ShardStore {
    dir: PathBuf,
    counters: IoCounters,
}

impl ShardStore {
    /// Opens an existing graph directory.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(Error::NotFound { path: dir });
        }
        Ok(Self {
            dir,
            counters: IoCounters::default(),
        })
    }

    /// Creates the directory (and parents) if needed.
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir,
            counters: IoCounters::default(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn counters(&self) -> &IoCounters {
        &self.counters
    }

    pub fn shard_path(&self, shard_id: u32) -> PathBuf {
        self.dir.join(shard_file_name(shard_id))
    }

    /// Serializes a shard to `shard_<id>.bin`. Returns the file size.
    pub fn write_shard(&self, shard: &Shard) -> Result<u64> {
        let path = self.shard_path(shard.shard_id);
        if let Err(msg) = shard.check_structure() {
            return Err(Error::InvalidArgument(format!(
                "refusing to write malformed shard {}: {msg}",
                shard.shard_id
            )));
        }
        let mut bytes = Vec::with_capacity(shard.file_len() as usize);
        bytes.extend_from_slice(&ShardHeader::of(shard).encode());
        bytes.extend_from_slice(&encode_shard_body(shard));
        debug_assert_eq!(bytes.len() as u64, shard.file_len());
        write_atomic(&path, &bytes)?;
        Ok(bytes.len() as u64)
    }

    /// Reads and decodes a shard, counting the bytes read and the load.
    pub fn read_shard(&self, shard_id: u32) -> Result<Shard> {
        let (header, body) = self.read_shard_raw(shard_id)?;
        let path = self.shard_path(shard_id);
        decode_shard_body(&header, &body).map_err(|msg| Error::corrupt(path, msg))
    }

    /// Reads a shard file, returning the decoded header and the raw body
    /// bytes (everything after the header). Counts the full file size.
    pub fn read_shard_raw(&self, shard_id: u32) -> Result<(ShardHeader, Vec<u8>)> {
        let path = self.shard_path(shard_id);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.counters.record_shard_read(bytes.len() as u64);
        let header = ShardHeader::decode(&bytes).map_err(|msg| Error::corrupt(&path, msg))?;
        if header.shard_id != shard_id {
            return Err(Error::corrupt(
                &path,
                format!("header shard_id {} != file name {shard_id}", header.shard_id),
            ));
        }
        let mut body = bytes;
        body.drain(..SHARD_HEADER_LEN as usize);
        Ok((header, body))
    }

    /// Persists the property and vertex information files.
    pub fn write_metadata(
        &self,
        meta: &GraphMeta,
        degrees: &DegreeInfo,
        values: &[f64],
    ) -> Result<()> {
        meta.validate()?;
        let n = meta.vertex_count as usize;
        if degrees.in_degree.len() != n || degrees.out_degree.len() != n || values.len() != n {
            return Err(Error::InvalidArgument(format!(
                "array lengths (values {}, in {}, out {}) do not match vertex_count {n}",
                values.len(),
                degrees.in_degree.len(),
                degrees.out_degree.len()
            )));
        }

        let mut prop = Vec::with_capacity(24 + 24 * meta.intervals.len());
        prop.extend_from_slice(&meta.vertex_count.to_le_bytes());
        prop.extend_from_slice(&meta.edge_count.to_le_bytes());
        prop.extend_from_slice(&meta.shard_count.to_le_bytes());
        for iv in &meta.intervals {
            prop.extend_from_slice(&iv.lo.to_le_bytes());
            prop.extend_from_slice(&iv.hi.to_le_bytes());
            prop.extend_from_slice(&iv.edge_count.to_le_bytes());
        }
        write_atomic(&self.dir.join(PROPERTY_FILE), &prop)?;

        let mut vert = Vec::with_capacity(24 * n);
        for &v in values {
            vert.extend_from_slice(&v.to_le_bytes());
        }
        for &d in &degrees.in_degree {
            vert.extend_from_slice(&d.to_le_bytes());
        }
        for &d in &degrees.out_degree {
            vert.extend_from_slice(&d.to_le_bytes());
        }
        write_atomic(&self.dir.join(VERTEX_FILE), &vert)?;
        self.counters.record_vertex_write(vert.len() as u64);
        Ok(())
    }

    /// Reads and validates the property and vertex information files.
    pub fn read_metadata(&self) -> Result<(GraphMeta, DegreeInfo, Vec<f64>)> {
        let prop_path = self.dir.join(PROPERTY_FILE);
        let prop = fs::read(&prop_path).map_err(|e| match e.kind() {
            io::ErrorKind::NotFound => Error::NotFound { path: prop_path.clone() },
            _ => Error::io(&prop_path, e),
        })?;
        if prop.len() < 24 {
            return Err(Error::corrupt(&prop_path, "shorter than the fixed header"));
        }
        let vertex_count = u64::from_le_bytes(prop[0..8].try_into().unwrap());
        let edge_count = u64::from_le_bytes(prop[8..16].try_into().unwrap());
        let shard_count = u64::from_le_bytes(prop[16..24].try_into().unwrap());
        let expected = 24 + 24 * shard_count;
        if prop.len() as u64 != expected {
            return Err(Error::corrupt(
                &prop_path,
                format!("{} bytes, expected {expected}", prop.len()),
            ));
        }
        let mut intervals = Vec::with_capacity(shard_count as usize);
        for rec in prop[24..].chunks_exact(24) {
            intervals.push(VertexInterval::new(
                u64::from_le_bytes(rec[0..8].try_into().unwrap()),
                u64::from_le_bytes(rec[8..16].try_into().unwrap()),
                u64::from_le_bytes(rec[16..24].try_into().unwrap()),
            ));
        }
        let meta = GraphMeta {
            vertex_count,
            edge_count,
            shard_count,
            intervals,
        };
        meta.validate()?;

        let vert_path = self.dir.join(VERTEX_FILE);
        let vert = fs::read(&vert_path).map_err(|e| Error::io(&vert_path, e))?;
        let n = vertex_count as usize;
        if vert.len() as u64 != 24 * vertex_count {
            return Err(Error::corrupt(
                &vert_path,
                format!("{} bytes, expected {}", vert.len(), 24 * vertex_count),
            ));
        }
        let values = vert[..8 * n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let in_degree: Vec<u64> = vert[8 * n..16 * n]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let out_degree: Vec<u64> = vert[16 * n..]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok((
            meta,
            DegreeInfo {
                in_degree,
                out_degree,
            },
            values,
        ))
    }

    /// Persists the dense-to-original id table written when the
    /// preprocessor had to remap sparse input ids.
    pub fn write_idmap(&self, to_original: &[u64]) -> Result<()> {
        let mut bytes = Vec::with_capacity(8 * to_original.len());
        for &id in to_original {
            bytes.extend_from_slice(&id.to_le_bytes());
        }
        write_atomic(&self.dir.join(IDMAP_FILE), &bytes)
    }

    /// Reads the id remap table if one was written.
    pub fn read_idmap(&self) -> Result<Option<Vec<u64>>> {
        let path = self.dir.join(IDMAP_FILE);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        if bytes.len() % 8 != 0 {
            return Err(Error::corrupt(&path, "length is not a multiple of 8"));
        }
        Ok(Some(
            bytes
                .chunks_exact(8)
                .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ))
    }
}

/// Writes `bytes` to `path` via a temp file in the same directory plus an
/// atomic rename, so re-runs never leave a half-written file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let result = (|| -> io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

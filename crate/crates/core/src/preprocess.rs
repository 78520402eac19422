//! The four-step preprocessing pipeline: scan, interval computation,
//! destination bucketing, CSR conversion.
//!
//! Input ids are canonicalized to dense 0-based ids. When the input already
//! uses every id in `[0, max]` the mapping is the identity; otherwise the
//! distinct ids are compacted in ascending order and the dense-to-original
//! table is persisted as a sidecar (`idmap.bin`) so results can be
//! translated back. Duplicate edges and self-loops are preserved
//! (multigraph semantics), which keeps the shard round trip exact.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::num::IntErrorKind;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{DegreeInfo, GraphMeta, VertexInterval};
use crate::store::{Shard, ShardStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeListFormat {
    /// One edge per line: two whitespace-separated decimal ids, `#` comments.
    Text,
    /// Packed `(src, dst)` pairs, each a u64 little-endian.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeListSource {
    pub format: EdgeListFormat,
    pub path: PathBuf,
}

impl EdgeListSource {
    pub fn text(path: impl Into<PathBuf>) -> Self {
        Self {
            format: EdgeListFormat::Text,
            path: path.into(),
        }
    }

    pub fn binary(path: impl Into<PathBuf>) -> Self {
        Self {
            format: EdgeListFormat::Binary,
            path: path.into(),
        }
    }
}

/// Streams `(src, dst)` records to `f`. With `symmetrize` every record is
/// followed by its mirror, doubling the edge count.
pub fn for_each_edge<F>(source: &EdgeListSource, symmetrize: bool, mut f: F) -> Result<()>
where
    F: FnMut(u64, u64) -> Result<()>,
{
    let file = File::open(&source.path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound {
                path: source.path.clone(),
            }
        } else {
            Error::io(&source.path, e)
        }
    })?;
    let mut emit = |u: u64, v: u64| -> Result<()> {
        f(u, v)?;
        if symmetrize {
            f(v, u)?;
        }
        Ok(())
    };
    match source.format {
        EdgeListFormat::Text => {
            let mut reader = BufReader::new(file);
            let mut line = String::new();
            let mut line_no = 0u64;
            loop {
                line.clear();
                let n = reader
                    .read_line(&mut line)
                    .map_err(|e| Error::io(&source.path, e))?;
                if n == 0 {
                    break;
                }
                line_no += 1;
                if line.starts_with('#') {
                    continue;
                }
                let (u, v) = parse_text_edge(&line, &source.path, line_no)?;
                emit(u, v)?;
            }
        }
        EdgeListFormat::Binary => {
            let mut reader = BufReader::new(file);
            let mut buf = [0u8; 16];
            let mut record = 0u64;
            loop {
                match read_record(&mut reader, &mut buf) {
                    Ok(true) => {}
                    Ok(false) => break,
                    Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                        return Err(Error::corrupt(
                            &source.path,
                            format!("truncated record after {record} edges"),
                        ))
                    }
                    Err(e) => return Err(Error::io(&source.path, e)),
                }
                record += 1;
                let u = u64::from_le_bytes(buf[0..8].try_into().unwrap());
                let v = u64::from_le_bytes(buf[8..16].try_into().unwrap());
                emit(u, v)?;
            }
        }
    }
    Ok(())
}

fn parse_text_edge(line: &str, path: &Path, line_no: u64) -> Result<(u64, u64)> {
    let mut it = line.split_whitespace();
    let parse = |tok: &str| -> Result<u64> {
        tok.parse::<u64>().map_err(|e| {
            if *e.kind() == IntErrorKind::PosOverflow {
                Error::IdOverflow {
                    path: path.to_path_buf(),
                    line: line_no,
                }
            } else {
                Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("not a vertex id: {tok:?}"),
                }
            }
        })
    };
    let u = match it.next() {
        Some(tok) => parse(tok)?,
        None => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: "expected \"src dst\", found an empty line".into(),
            })
        }
    };
    let v = match it.next() {
        Some(tok) => parse(tok)?,
        None => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: "missing destination id".into(),
            })
        }
    };
    if let Some(extra) = it.next() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: format!("unexpected trailing token {extra:?}"),
        });
    }
    Ok((u, v))
}

/// Reads one 16-byte record; Ok(false) on clean EOF.
fn read_record<R: Read>(reader: &mut R, buf: &mut [u8; 16]) -> std::io::Result<bool> {
    let mut filled = 0;
    while filled < 16 {
        let n = reader.read(&mut buf[filled..])?;
        if n == 0 {
            return if filled == 0 {
                Ok(false)
            } else {
                Err(std::io::Error::from(std::io::ErrorKind::UnexpectedEof))
            };
        }
        filled += n;
    }
    Ok(true)
}

/// Interval sizing knobs. The default target is desk-scale; production
/// deployments would raise it so a shard still fits in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardingPolicy {
    pub target_edges_per_shard: u64,
    pub max_shard_count: Option<u64>,
}

impl Default for ShardingPolicy {
    fn default() -> Self {
        Self {
            target_edges_per_shard: 1 << 20,
            max_shard_count: None,
        }
    }
}

/// Dense-id translation produced by the scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdMap {
    /// Input ids were already `[0, n)`.
    Identity,
    /// `to_original[dense]` is the original id; sorted ascending, so the
    /// dense order preserves the original order.
    Remapped { to_original: Vec<u64> },
}

impl IdMap {
    pub fn is_identity(&self) -> bool {
        matches!(self, IdMap::Identity)
    }

    /// Dense id for an original id; `None` if the id never appeared.
    pub fn to_dense(&self, original: u64) -> Option<u64> {
        match self {
            IdMap::Identity => Some(original),
            IdMap::Remapped { to_original } => to_original
                .binary_search(&original)
                .ok()
                .map(|i| i as u64),
        }
    }

    pub fn to_original(&self, dense: u64) -> u64 {
        match self {
            IdMap::Identity => dense,
            IdMap::Remapped { to_original } => to_original[dense as usize],
        }
    }
}

/// Result of the first pass over the input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanSummary {
    pub vertex_count: u64,
    pub edge_count: u64,
    pub degrees: DegreeInfo,
    pub id_map: IdMap,
}

/// Pass 1: stream the input once, tally per-vertex degrees and decide the
/// id mapping.
///
/// Self-loops count toward both degrees of the vertex; duplicates are kept.
/// The dense vertex count is `1 + max id` when the input ids already cover
/// `[0, max]`, otherwise the number of distinct ids after remapping.
pub fn scan_degrees(source: &EdgeListSource, symmetrize: bool) -> Result<ScanSummary> {
    let mut tally: HashMap<u64, (u64, u64)> = HashMap::new();
    let mut edge_count = 0u64;
    for_each_edge(source, symmetrize, |u, v| {
        tally.entry(u).or_default().1 += 1;
        tally.entry(v).or_default().0 += 1;
        edge_count += 1;
        Ok(())
    })?;
    if edge_count == 0 {
        return Err(Error::EmptyInput {
            path: source.path.clone(),
        });
    }

    let mut ids: Vec<u64> = tally.keys().copied().collect();
    ids.sort_unstable();
    let distinct = ids.len() as u64;
    let max_id = *ids.last().unwrap();
    let dense = max_id == distinct - 1;

    let vertex_count = distinct;
    let mut in_degree = vec![0u64; vertex_count as usize];
    let mut out_degree = vec![0u64; vertex_count as usize];
    for (dense_id, original) in ids.iter().enumerate() {
        let (din, dout) = tally[original];
        in_degree[dense_id] = din;
        out_degree[dense_id] = dout;
    }

    let id_map = if dense {
        IdMap::Identity
    } else {
        IdMap::Remapped { to_original: ids }
    };
    Ok(ScanSummary {
        vertex_count,
        edge_count,
        degrees: DegreeInfo {
            in_degree,
            out_degree,
        },
        id_map,
    })
}

/// Pass 2 planning: greedy scan over vertex ids accumulating in-degree; an
/// interval closes once its accumulated in-degree reaches the target, so
/// every interval holds at least one vertex and a single hub vertex can own
/// an interval alone. An optional shard-count cap folds the remainder into
/// the final interval.
pub fn compute_intervals(
    degrees: &DegreeInfo,
    policy: &ShardingPolicy,
) -> Result<Vec<VertexInterval>> {
    if policy.target_edges_per_shard == 0 {
        return Err(Error::InvalidArgument(
            "target_edges_per_shard must be at least 1".into(),
        ));
    }
    if policy.max_shard_count == Some(0) {
        return Err(Error::InvalidArgument(
            "max_shard_count must be at least 1".into(),
        ));
    }
    let n = degrees.in_degree.len() as u64;
    if n == 0 {
        return Err(Error::InvalidArgument("no vertices to partition".into()));
    }

    let mut intervals = Vec::new();
    let mut lo = 0u64;
    let mut acc = 0u64;
    for v in 0..n {
        acc += degrees.in_degree[v as usize];
        let capped = policy
            .max_shard_count
            .is_some_and(|cap| intervals.len() as u64 + 1 >= cap);
        if acc >= policy.target_edges_per_shard && !capped {
            intervals.push(VertexInterval::new(lo, v + 1, acc));
            lo = v + 1;
            acc = 0;
        }
    }
    if lo < n || intervals.is_empty() {
        intervals.push(VertexInterval::new(lo, n, acc));
    }
    Ok(intervals)
}

/// Destination-bucketed raw edges spilled to disk, one append-only file per
/// shard, each a packed sequence of `(src, dst)` u64 LE pairs in dense ids.
#[derive(Debug)]
pub struct EdgeBuckets {
    paths: Vec<PathBuf>,
    pub counts: Vec<u64>,
}

impl EdgeBuckets {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn path(&self, bucket: usize) -> &Path {
        &self.paths[bucket]
    }

    /// Reads the raw `(src, dst)` pairs of one bucket.
    pub fn read_bucket(&self, bucket: usize) -> Result<Vec<(u64, u64)>> {
        let path = &self.paths[bucket];
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() % 16 != 0 {
            return Err(Error::corrupt(path, "bucket length not a multiple of 16"));
        }
        Ok(bytes
            .chunks_exact(16)
            .map(|c| {
                (
                    u64::from_le_bytes(c[0..8].try_into().unwrap()),
                    u64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect())
    }

    pub fn remove_files(&self) -> Result<()> {
        for path in &self.paths {
            fs::remove_file(path).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Pass 3: stream the input again and append every edge to the bucket of
/// the interval containing its destination.
pub fn partition_edges(
    source: &EdgeListSource,
    intervals: &[VertexInterval],
    id_map: &IdMap,
    symmetrize: bool,
    scratch_dir: &Path,
) -> Result<EdgeBuckets> {
    fs::create_dir_all(scratch_dir).map_err(|e| Error::io(scratch_dir, e))?;
    let vertex_count = intervals.last().map(|iv| iv.hi).unwrap_or(0);
    let mut writers = Vec::with_capacity(intervals.len());
    let mut paths = Vec::with_capacity(intervals.len());
    for k in 0..intervals.len() {
        let path = scratch_dir.join(format!("bucket_{k}.tmp"));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        writers.push(BufWriter::new(file));
        paths.push(path);
    }
    let mut counts = vec![0u64; intervals.len()];

    let locate = |v: u64| intervals.partition_point(|iv| iv.hi <= v);
    for_each_edge(source, symmetrize, |raw_u, raw_v| {
        let map = |raw: u64| {
            id_map.to_dense(raw).filter(|&d| d < vertex_count).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "edge endpoint {raw} is outside the scanned id range"
                ))
            })
        };
        let u = map(raw_u)?;
        let v = map(raw_v)?;
        let k = locate(v);
        debug_assert!(intervals[k].contains(v));
        let mut rec = [0u8; 16];
        rec[0..8].copy_from_slice(&u.to_le_bytes());
        rec[8..16].copy_from_slice(&v.to_le_bytes());
        writers[k]
            .write_all(&rec)
            .map_err(|e| Error::io(&paths[k], e))?;
        counts[k] += 1;
        Ok(())
    })?;
    for (w, path) in writers.iter_mut().zip(&paths) {
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(EdgeBuckets { paths, counts })
}

/// Pass 4: convert every bucket to CSR (sources sorted ascending within
/// each adjacency list) and persist the shard files. Bucket files are
/// removed afterwards.
pub fn build_shards(
    buckets: &EdgeBuckets,
    intervals: &[VertexInterval],
    store: &ShardStore,
) -> Result<u64> {
    if buckets.len() != intervals.len() {
        return Err(Error::InvalidArgument(format!(
            "{} buckets for {} intervals",
            buckets.len(),
            intervals.len()
        )));
    }
    let mut total_bytes = 0u64;
    for (k, interval) in intervals.iter().enumerate() {
        let pairs = buckets.read_bucket(k)?;
        if pairs.len() as u64 != interval.edge_count {
            return Err(Error::InvalidArgument(format!(
                "bucket {k} has {} edges but interval expects {}",
                pairs.len(),
                interval.edge_count
            )));
        }
        let shard = csr_from_bucket(k as u32, *interval, &pairs)?;
        total_bytes += store.write_shard(&shard)?;
    }
    buckets.remove_files()?;
    Ok(total_bytes)
}

/// Groups a bucket's edges by destination and packs them into CSR form.
pub fn csr_from_bucket(
    shard_id: u32,
    interval: VertexInterval,
    pairs: &[(u64, u64)],
) -> Result<Shard> {
    let len = interval.len() as usize;
    let mut row = vec![0u64; len + 1];
    for &(_, dst) in pairs {
        if !interval.contains(dst) {
            return Err(Error::InvalidArgument(format!(
                "destination {dst} outside interval [{}, {})",
                interval.lo, interval.hi
            )));
        }
        row[(dst - interval.lo) as usize + 1] += 1;
    }
    for i in 1..row.len() {
        row[i] += row[i - 1];
    }
    let mut col = vec![0u64; pairs.len()];
    let mut cursor: Vec<u64> = row[..len].to_vec();
    for &(src, dst) in pairs {
        let slot = &mut cursor[(dst - interval.lo) as usize];
        col[*slot as usize] = src;
        *slot += 1;
    }
    for i in 0..len {
        col[row[i] as usize..row[i + 1] as usize].sort_unstable();
    }
    Ok(Shard {
        shard_id,
        interval,
        row,
        col,
    })
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessOptions {
    pub policy: ShardingPolicy,
    /// Emit the mirror of every edge; required for meaningful WCC.
    pub symmetrize: bool,
}

#[derive(Debug)]
pub struct PreprocessSummary {
    pub meta: GraphMeta,
    pub remapped: bool,
    pub shard_bytes: u64,
}

/// Runs the whole pipeline into `out_dir`, leaving a complete graph
/// directory behind.
pub fn preprocess(
    source: &EdgeListSource,
    out_dir: &Path,
    options: &PreprocessOptions,
) -> Result<PreprocessSummary> {
    let scan = scan_degrees(source, options.symmetrize)?;
    let intervals = compute_intervals(&scan.degrees, &options.policy)?;
    let store = ShardStore::create(out_dir)?;
    let buckets = partition_edges(
        source,
        &intervals,
        &scan.id_map,
        options.symmetrize,
        out_dir,
    )?;
    debug_assert_eq!(buckets.counts.iter().sum::<u64>(), scan.edge_count);
    let shard_bytes = build_shards(&buckets, &intervals, &store)?;

    let meta = GraphMeta::new(scan.vertex_count, scan.edge_count, intervals);
    let init_values = vec![0.0; scan.vertex_count as usize];
    store.write_metadata(&meta, &scan.degrees, &init_values)?;
    let remapped = match &scan.id_map {
        IdMap::Identity => false,
        IdMap::Remapped { to_original } => {
            store.write_idmap(to_original)?;
            true
        }
    };
    Ok(PreprocessSummary {
        meta,
        remapped,
        shard_bytes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn write_text(dir: &Path, name: &str, content: &str) -> EdgeListSource {
        let path = dir.join(name);
        fs::write(&path, content).unwrap();
        EdgeListSource::text(path)
    }

    fn scan_str(content: &str) -> Result<ScanSummary> {
        let dir = tempfile::tempdir().unwrap();
        let source = write_text(dir.path(), "edges.txt", content);
        scan_degrees(&source, false)
    }

    #[test]
    fn scan_tallies_degrees() {
        let s = scan_str("0 1\n1 0\n1 2\n").unwrap();
        assert_eq!(s.vertex_count, 3);
        assert_eq!(s.edge_count, 3);
        assert_eq!(s.degrees.in_degree, vec![1, 1, 1]);
        assert_eq!(s.degrees.out_degree, vec![1, 2, 0]);
        assert!(s.id_map.is_identity());
    }

    #[test]
    fn scan_rejects_empty_input() {
        assert!(matches!(scan_str(""), Err(Error::EmptyInput { .. })));
        // Comment-only files are empty too.
        assert!(matches!(
            scan_str("# nothing here\n"),
            Err(Error::EmptyInput { .. })
        ));
    }

    #[test]
    fn scan_counts_self_loops_on_both_sides() {
        let s = scan_str("0 0\n").unwrap();
        assert_eq!(s.vertex_count, 1);
        assert_eq!(s.edge_count, 1);
        assert_eq!(s.degrees.in_degree, vec![1]);
        assert_eq!(s.degrees.out_degree, vec![1]);
    }

    #[test]
    fn scan_reports_malformed_line_numbers() {
        let err = scan_str("0 1\nnot an edge\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error: {other}"),
        }
        let err = scan_str("0 1\n\n2 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = scan_str("0 1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn scan_distinguishes_id_overflow() {
        let err = scan_str("0 99999999999999999999999999\n").unwrap_err();
        assert!(matches!(err, Error::IdOverflow { line: 1, .. }), "{err}");
    }

    #[test]
    fn scan_skips_comments_and_remaps_sparse_ids() {
        let s = scan_str("# header\n10 30\n30 20\n").unwrap();
        assert_eq!(s.vertex_count, 3);
        assert_eq!(s.edge_count, 2);
        match &s.id_map {
            IdMap::Remapped { to_original } => assert_eq!(to_original, &vec![10, 20, 30]),
            IdMap::Identity => panic!("expected remap"),
        }
        // dense ids follow ascending original order: 10->0, 20->1, 30->2
        assert_eq!(s.degrees.out_degree, vec![1, 0, 1]);
        assert_eq!(s.degrees.in_degree, vec![0, 1, 1]);
        assert_eq!(s.id_map.to_dense(20), Some(1));
        assert_eq!(s.id_map.to_dense(25), None);
        assert_eq!(s.id_map.to_original(2), 30);
    }

    #[test]
    fn scan_symmetrize_doubles_edges() {
        let dir = tempfile::tempdir().unwrap();
        let source = write_text(dir.path(), "e.txt", "0 1\n1 2\n");
        let s = scan_degrees(&source, true).unwrap();
        assert_eq!(s.edge_count, 4);
        assert_eq!(s.degrees.in_degree, vec![1, 2, 1]);
        assert_eq!(s.degrees.out_degree, vec![1, 2, 1]);
    }

    #[test]
    fn binary_format_round_trips_and_detects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.bin");
        let mut bytes = Vec::new();
        for (u, v) in [(0u64, 1u64), (1, 0), (1, 2)] {
            bytes.extend_from_slice(&u.to_le_bytes());
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::write(&path, &bytes).unwrap();
        let s = scan_degrees(&EdgeListSource::binary(&path), false).unwrap();
        assert_eq!(s.edge_count, 3);
        assert_eq!(s.degrees.out_degree, vec![1, 2, 0]);

        fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        let err = scan_degrees(&EdgeListSource::binary(&path), false).unwrap_err();
        assert!(matches!(err, Error::Corrupt { .. }), "{err}");
    }

    #[test]
    fn intervals_split_exactly_at_target() {
        let degrees = DegreeInfo {
            in_degree: vec![3, 3, 3, 3],
            out_degree: vec![3, 3, 3, 3],
        };
        let policy = ShardingPolicy {
            target_edges_per_shard: 6,
            max_shard_count: None,
        };
        let ivs = compute_intervals(&degrees, &policy).unwrap();
        assert_eq!(
            ivs,
            vec![VertexInterval::new(0, 2, 6), VertexInterval::new(2, 4, 6)]
        );
    }

    #[test]
    fn hub_vertex_gets_its_own_interval() {
        let degrees = DegreeInfo {
            in_degree: vec![10, 1],
            out_degree: vec![0, 0],
        };
        let policy = ShardingPolicy {
            target_edges_per_shard: 5,
            max_shard_count: None,
        };
        let ivs = compute_intervals(&degrees, &policy).unwrap();
        assert_eq!(
            ivs,
            vec![VertexInterval::new(0, 1, 10), VertexInterval::new(1, 2, 1)]
        );
    }

    #[test]
    fn small_graph_fits_one_interval() {
        let degrees = DegreeInfo {
            in_degree: vec![1, 1, 1],
            out_degree: vec![1, 1, 1],
        };
        let policy = ShardingPolicy {
            target_edges_per_shard: 100,
            max_shard_count: None,
        };
        let ivs = compute_intervals(&degrees, &policy).unwrap();
        assert_eq!(ivs, vec![VertexInterval::new(0, 3, 3)]);
    }

    #[test]
    fn shard_count_cap_folds_the_tail() {
        let degrees = DegreeInfo {
            in_degree: vec![2, 2, 2, 2, 2, 2],
            out_degree: vec![0; 6],
        };
        let policy = ShardingPolicy {
            target_edges_per_shard: 2,
            max_shard_count: Some(2),
        };
        let ivs = compute_intervals(&degrees, &policy).unwrap();
        assert_eq!(
            ivs,
            vec![VertexInterval::new(0, 1, 2), VertexInterval::new(1, 6, 10)]
        );
    }

    #[test]
    fn interval_cover_is_exact_for_zero_degree_tails() {
        let degrees = DegreeInfo {
            in_degree: vec![5, 0, 0],
            out_degree: vec![0; 3],
        };
        let policy = ShardingPolicy {
            target_edges_per_shard: 5,
            max_shard_count: None,
        };
        let ivs = compute_intervals(&degrees, &policy).unwrap();
        assert_eq!(
            ivs,
            vec![VertexInterval::new(0, 1, 5), VertexInterval::new(1, 3, 0)]
        );
    }

    #[test]
    fn partition_routes_by_destination() {
        let dir = tempfile::tempdir().unwrap();
        let source = write_text(dir.path(), "e.txt", "0 5\n5 0\n3 2\n");
        let intervals = vec![
            VertexInterval::new(0, 2, 1),
            VertexInterval::new(2, 4, 1),
            VertexInterval::new(4, 6, 1),
        ];
        let buckets = partition_edges(
            &source,
            &intervals,
            &IdMap::Identity,
            false,
            &dir.path().join("scratch"),
        )
        .unwrap();
        assert_eq!(buckets.counts, vec![1, 1, 1]);
        assert_eq!(buckets.read_bucket(0).unwrap(), vec![(5, 0)]);
        assert_eq!(buckets.read_bucket(1).unwrap(), vec![(3, 2)]);
        assert_eq!(buckets.read_bucket(2).unwrap(), vec![(0, 5)]);
    }

    #[test]
    fn partition_rejects_out_of_range_endpoints() {
        let dir = tempfile::tempdir().unwrap();
        let source = write_text(dir.path(), "e.txt", "0 9\n");
        let intervals = vec![VertexInterval::new(0, 2, 1)];
        let err = partition_edges(
            &source,
            &intervals,
            &IdMap::Identity,
            false,
            &dir.path().join("scratch"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)), "{err}");
    }

    #[test]
    fn csr_groups_by_destination_with_sorted_sources() {
        let interval = VertexInterval::new(2, 4, 3);
        let shard = csr_from_bucket(1, interval, &[(0, 2), (5, 2), (1, 3)]).unwrap();
        assert_eq!(shard.row, vec![0, 2, 3]);
        assert_eq!(shard.col, vec![0, 5, 1]);
    }

    #[test]
    fn csr_of_empty_bucket_is_all_zero_rows() {
        let interval = VertexInterval::new(4, 6, 0);
        let shard = csr_from_bucket(2, interval, &[]).unwrap();
        assert_eq!(shard.row, vec![0, 0, 0]);
        assert!(shard.col.is_empty());
    }

    #[test]
    fn csr_single_edge() {
        let interval = VertexInterval::new(0, 2, 1);
        let shard = csr_from_bucket(0, interval, &[(0, 1)]).unwrap();
        assert_eq!(shard.row, vec![0, 0, 1]);
        assert_eq!(shard.col, vec![0]);
    }

    /// Decodes every shard of a preprocessed directory back into a
    /// destination-keyed edge multiset.
    fn decode_edges(store: &ShardStore, meta: &GraphMeta) -> BTreeMap<(u64, u64), u64> {
        let mut edges = BTreeMap::new();
        for k in 0..meta.shard_count as u32 {
            let shard = store.read_shard(k).unwrap();
            shard.validate(meta.vertex_count).unwrap();
            for v in shard.interval.lo..shard.interval.hi {
                for &u in shard.in_neighbors(v) {
                    *edges.entry((u, v)).or_default() += 1;
                }
            }
        }
        edges
    }

    #[test]
    fn pipeline_round_trips_the_edge_multiset() {
        let dir = tempfile::tempdir().unwrap();
        // Duplicates and a self-loop on purpose.
        let text = "0 1\n0 1\n3 3\n2 0\n1 2\n4 1\n";
        let source = write_text(dir.path(), "e.txt", text);
        let out = dir.path().join("graph");
        let options = PreprocessOptions {
            policy: ShardingPolicy {
                target_edges_per_shard: 2,
                max_shard_count: None,
            },
            symmetrize: false,
        };
        let summary = preprocess(&source, &out, &options).unwrap();
        assert_eq!(summary.meta.edge_count, 6);
        assert!(!summary.remapped);

        let store = ShardStore::open(&out).unwrap();
        let (meta, degrees, values) = store.read_metadata().unwrap();
        assert_eq!(meta, summary.meta);
        assert_eq!(values, vec![0.0; 5]);
        assert_eq!(degrees.in_degree.iter().sum::<u64>(), 6);
        assert_eq!(degrees.out_degree.iter().sum::<u64>(), 6);

        let mut expected = BTreeMap::new();
        for e in [(0, 1), (0, 1), (3, 3), (2, 0), (1, 2), (4, 1)] {
            *expected.entry(e).or_insert(0u64) += 1;
        }
        assert_eq!(decode_edges(&store, &meta), expected);

        // Bucket spill files must be gone.
        for entry in fs::read_dir(&out).unwrap() {
            let name = entry.unwrap().file_name();
            assert!(
                !name.to_string_lossy().contains("bucket_"),
                "leftover {name:?}"
            );
        }
    }

    #[test]
    fn pipeline_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let source = write_text(dir.path(), "e.txt", "0 1\n1 2\n2 3\n3 4\n4 0\n2 0\n");
        let options = PreprocessOptions {
            policy: ShardingPolicy {
                target_edges_per_shard: 2,
                max_shard_count: None,
            },
            symmetrize: false,
        };
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        preprocess(&source, &out_a, &options).unwrap();
        preprocess(&source, &out_b, &options).unwrap();

        let mut names: Vec<String> = fs::read_dir(&out_a)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        assert!(names.len() >= 3);
        for name in names {
            let a = fs::read(out_a.join(&name)).unwrap();
            let b = fs::read(out_b.join(&name)).unwrap();
            assert_eq!(a, b, "file {name} differs between runs");
        }
    }

    #[test]
    fn pipeline_remap_writes_sidecar_and_translates_back() {
        let dir = tempfile::tempdir().unwrap();
        let source = write_text(dir.path(), "e.txt", "1000000 7\n7 99\n");
        let out = dir.path().join("graph");
        let summary = preprocess(&source, &out, &PreprocessOptions::default()).unwrap();
        assert!(summary.remapped);
        assert_eq!(summary.meta.vertex_count, 3);

        let store = ShardStore::open(&out).unwrap();
        let idmap = store.read_idmap().unwrap().expect("sidecar written");
        assert_eq!(idmap, vec![7, 99, 1000000]);
        // Edge (1000000, 7) must appear as dense (2, 0).
        let (meta, _, _) = store.read_metadata().unwrap();
        let edges = decode_edges(&store, &meta);
        assert_eq!(edges.get(&(2, 0)), Some(&1));
        assert_eq!(edges.get(&(0, 1)), Some(&1));
    }

    #[test]
    fn uniform_destinations_balance_shards() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 4096u64;
        let e = 1 << 16;
        let mut text = String::new();
        for _ in 0..e {
            let u = rng.random_range(0..n);
            let v = rng.random_range(0..n);
            text.push_str(&format!("{u} {v}\n"));
        }
        let dir = tempfile::tempdir().unwrap();
        let source = write_text(dir.path(), "e.txt", &text);
        let scan = scan_degrees(&source, false).unwrap();
        let policy = ShardingPolicy {
            target_edges_per_shard: e / 8,
            max_shard_count: None,
        };
        let ivs = compute_intervals(&scan.degrees, &policy).unwrap();
        assert!(ivs.len() >= 4, "want several shards, got {}", ivs.len());
        let max = ivs.iter().map(|iv| iv.edge_count).max().unwrap();
        let min = ivs.iter().map(|iv| iv.edge_count).min().unwrap();
        assert!(
            max as f64 / min as f64 <= 2.0,
            "imbalance {max}/{min} exceeds 2x"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        // Round trip: decoding all shards reproduces the input multiset.
        #[test]
        fn random_edge_lists_round_trip(
            edges in proptest::collection::vec((0u64..40, 0u64..40), 1..120),
            target in 1u64..20,
        ) {
            let dir = tempfile::tempdir().unwrap();
            let mut text = String::new();
            for &(u, v) in &edges {
                text.push_str(&format!("{u} {v}\n"));
            }
            let source = write_text(dir.path(), "e.txt", &text);
            let out = dir.path().join("g");
            let options = PreprocessOptions {
                policy: ShardingPolicy { target_edges_per_shard: target, max_shard_count: None },
                symmetrize: false,
            };
            let summary = preprocess(&source, &out, &options).unwrap();
            summary.meta.validate().unwrap();

            let store = ShardStore::open(&out).unwrap();
            let (meta, degrees, _) = store.read_metadata().unwrap();
            prop_assert_eq!(degrees.in_degree.iter().sum::<u64>(), meta.edge_count);
            prop_assert_eq!(degrees.out_degree.iter().sum::<u64>(), meta.edge_count);

            let scan = scan_degrees(&source, false).unwrap();
            let mut expected: BTreeMap<(u64, u64), u64> = BTreeMap::new();
            for &(u, v) in &edges {
                let d = (scan.id_map.to_dense(u).unwrap(), scan.id_map.to_dense(v).unwrap());
                *expected.entry(d).or_default() += 1;
            }
            prop_assert_eq!(decode_edges(&store, &meta), expected);
        }
    }
}

//! The vertex-centric sliding-window execution loop.
//!
//! Both vertex arrays stay in memory for the whole run; shards stream in
//! from disk (or the cache) and never come back out, so iterations write
//! no vertex bytes to disk at all. Each iteration walks the shards in
//! ascending id order through a dynamic work queue: a worker takes the
//! next shard id, loads the shard unless the scheduler skipped it, and
//! computes `dst[v] = update(v, ...)` for every vertex of the shard's
//! interval. Intervals are disjoint, so every `dst` index has exactly one
//! writer per iteration and no locks or atomics guard the value arrays —
//! debug builds verify this with a write-once shadow bitmap.
//!
//! Iteration 0 always loads every shard: selective scheduling is only
//! sound once a full pass has established every vertex's value.

use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::cache::{CacheConfig, ShardCache};
use crate::error::{Error, Result};
use crate::model::{DegreeInfo, GraphMeta, VertexId, VertexState};
use crate::schedule::{self, ScheduleAction, ScheduleDecision, ShardBloomFilter};
use crate::store::{Shard, ShardStore};

/// Engine knobs. `float_tolerance` loosens the change flag from exact
/// inequality to `|new - old| > tolerance` when nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub worker_count: usize,
    pub max_iterations: usize,
    pub selective_scheduling: bool,
    pub activation_threshold: f64,
    pub cache: CacheConfig,
    pub float_tolerance: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            worker_count: std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
            max_iterations: 200,
            selective_scheduling: true,
            activation_threshold: schedule::DEFAULT_ACTIVATION_THRESHOLD,
            cache: CacheConfig::default(),
            float_tolerance: 0.0,
        }
    }
}

impl EngineConfig {
    fn validate(&self) -> Result<()> {
        if self.worker_count == 0 {
            return Err(Error::InvalidArgument("worker_count must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.activation_threshold) {
            return Err(Error::InvalidArgument(format!(
                "activation_threshold {} outside [0, 1]",
                self.activation_threshold
            )));
        }
        if self.float_tolerance < 0.0 {
            return Err(Error::InvalidArgument(
                "float_tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-iteration record emitted by the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    /// Fraction of vertices whose value changed in this iteration.
    pub active_ratio: f64,
    pub shards_loaded: usize,
    pub shards_skipped: usize,
    pub wall_time: Duration,
    /// Shard file bytes read from disk during this iteration.
    pub bytes_read: u64,
}

#[derive(Serialize)]
struct ReportLine {
    iter: usize,
    active_ratio: f64,
    shards_loaded: usize,
    shards_skipped: usize,
    wall_ms: f64,
    bytes_read: u64,
}

impl IterationReport {
    /// One line of the run's JSON-lines metrics stream.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&ReportLine {
            iter: self.iteration,
            active_ratio: self.active_ratio,
            shards_loaded: self.shards_loaded,
            shards_skipped: self.shards_skipped,
            wall_ms: self.wall_time.as_secs_f64() * 1e3,
            bytes_read: self.bytes_read,
        })
        .expect("report serialization cannot fail")
    }
}

/// Runs `update` to convergence (no active vertices) or `max_iterations`.
///
/// Returns the final vertex values and one report per executed iteration.
/// Vertices in skipped shards carry their previous value forward and are
/// never marked active.
pub fn run<F>(
    store: &ShardStore,
    meta: &GraphMeta,
    degrees: &DegreeInfo,
    update: F,
    init_values: &[f64],
    config: &EngineConfig,
) -> Result<(Vec<f64>, Vec<IterationReport>)>
where
    F: Fn(VertexId, &[VertexId], &[f64], &DegreeInfo) -> (f64, bool) + Sync,
{
    config.validate()?;
    meta.validate()?;
    if init_values.len() as u64 != meta.vertex_count {
        return Err(Error::InvalidArgument(format!(
            "init_values has {} entries for {} vertices",
            init_values.len(),
            meta.vertex_count
        )));
    }

    let shard_count = meta.intervals.len();
    let cache = ShardCache::new(config.cache);
    // Load phase: build the per-shard filters, warming the cache along the
    // way like any other shard access.
    let filters: Option<Vec<ShardBloomFilter>> = if config.selective_scheduling {
        let mut fs = Vec::with_capacity(shard_count);
        for shard_id in 0..shard_count as u32 {
            let shard = cache.get_or_load(store, shard_id)?;
            fs.push(ShardBloomFilter::from_shard(&shard));
        }
        Some(fs)
    } else {
        None
    };

    let mut state = VertexState::new(init_values.to_vec());
    let mut reports: Vec<IterationReport> = Vec::new();

    for iteration in 0..config.max_iterations {
        let started = Instant::now();
        let bytes_before = store.counters().shard_bytes_read();

        // Iteration 0 is a mandatory full pass; afterwards the previous
        // iteration's ratio drives the skip decision.
        let ratio_for_scheduling = if iteration == 0 {
            f64::INFINITY
        } else {
            state.active_ratio()
        };
        let decisions: Vec<ScheduleDecision> = (0..shard_count as u32)
            .map(|shard_id| match &filters {
                Some(fs) => schedule::decide(
                    shard_id,
                    fs,
                    &state.active,
                    ratio_for_scheduling,
                    true,
                    config.activation_threshold,
                ),
                None => schedule::decide(shard_id, &[], &[], ratio_for_scheduling, false, 0.0),
            })
            .collect();
        let shards_loaded = decisions
            .iter()
            .filter(|d| d.action == ScheduleAction::Load)
            .count();

        let active = execute_iteration(
            store,
            meta,
            degrees,
            &update,
            &cache,
            &decisions,
            &mut state,
            config.worker_count,
        )?;
        state.active = active;
        state.swap_buffers();

        reports.push(IterationReport {
            iteration,
            active_ratio: state.active_ratio(),
            shards_loaded,
            shards_skipped: shard_count - shards_loaded,
            wall_time: started.elapsed(),
            bytes_read: store.counters().shard_bytes_read() - bytes_before,
        });

        if state.active.is_empty() {
            break;
        }
    }

    Ok((state.src_values, reports))
}

/// One parallel pass over all shards. Returns the merged, sorted active
/// list.
#[allow(clippy::too_many_arguments)]
fn execute_iteration<F>(
    store: &ShardStore,
    meta: &GraphMeta,
    degrees: &DegreeInfo,
    update: &F,
    cache: &ShardCache,
    decisions: &[ScheduleDecision],
    state: &mut VertexState,
    worker_count: usize,
) -> Result<Vec<VertexId>>
where
    F: Fn(VertexId, &[VertexId], &[f64], &DegreeInfo) -> (f64, bool) + Sync,
{
    let shard_count = meta.intervals.len();
    let src: &[f64] = &state.src_values;

    // Partition dst into one disjoint mutable segment per interval. Each
    // slot is taken exactly once, so the mutexes never contend.
    let mut segments: Vec<Mutex<Option<&mut [f64]>>> = Vec::with_capacity(shard_count);
    let mut rest: &mut [f64] = &mut state.dst_values;
    for iv in &meta.intervals {
        let (seg, tail) = rest.split_at_mut(iv.len() as usize);
        segments.push(Mutex::new(Some(seg)));
        rest = tail;
    }

    let shadow = WriteOnceMap::new(meta.vertex_count as usize);
    let next_shard = AtomicUsize::new(0);
    let workers = worker_count.min(shard_count).max(1);

    let mut per_shard: Vec<(usize, Vec<VertexId>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| -> Result<Vec<(usize, Vec<VertexId>)>> {
                    let mut locals = Vec::new();
                    loop {
                        let k = next_shard.fetch_add(1, Ordering::Relaxed);
                        if k >= shard_count {
                            break;
                        }
                        let seg = segments[k]
                            .lock()
                            .unwrap()
                            .take()
                            .expect("each dst segment is taken exactly once");
                        let iv = &meta.intervals[k];
                        match decisions[k].action {
                            ScheduleAction::Skip => {
                                seg.copy_from_slice(&src[iv.lo as usize..iv.hi as usize]);
                                shadow.mark_range(iv.lo, iv.hi);
                            }
                            ScheduleAction::Load => {
                                let shard = cache.get_or_load(store, k as u32)?;
                                let active = process_shard(&shard, src, seg, update, degrees)?;
                                shadow.mark_range(iv.lo, iv.hi);
                                locals.push((k, active));
                            }
                        }
                    }
                    Ok(locals)
                })
            })
            .collect();

        let mut merged = Vec::new();
        let mut first_err = None;
        for handle in handles {
            match handle.join().expect("engine worker panicked outside the update guard") {
                Ok(mut locals) => merged.append(&mut locals),
                Err(e) if first_err.is_none() => first_err = Some(e),
                Err(_) => {}
            }
        }
        match first_err {
            Some(e) => Err(e),
            None => Ok(merged),
        }
    })?;

    shadow.assert_complete();

    // Merge in shard order so the active list is sorted and deterministic.
    per_shard.sort_unstable_by_key(|(k, _)| *k);
    let mut active = Vec::new();
    for (_, mut local) in per_shard {
        active.append(&mut local);
    }
    Ok(active)
}

/// Applies `update` to every vertex of the shard's interval, writing the
/// whole `dst` segment exactly once. Returns the vertices whose change
/// flag was set. A panicking update function surfaces as an error naming
/// the shard and vertex.
pub fn process_shard<F>(
    shard: &Shard,
    src_values: &[f64],
    dst_segment: &mut [f64],
    update: &F,
    degrees: &DegreeInfo,
) -> Result<Vec<VertexId>>
where
    F: Fn(VertexId, &[VertexId], &[f64], &DegreeInfo) -> (f64, bool) + Sync,
{
    let iv = shard.interval;
    if dst_segment.len() as u64 != iv.len() {
        return Err(Error::InvalidArgument(format!(
            "dst segment covers {} vertices but shard {} covers {}",
            dst_segment.len(),
            shard.shard_id,
            iv.len()
        )));
    }
    let mut active = Vec::new();
    let mut current = iv.lo;
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
        for i in 0..iv.len() as usize {
            let v = iv.lo + i as u64;
            current = v;
            let (value, changed) = update(v, shard.in_neighbors(v), src_values, degrees);
            dst_segment[i] = value;
            if changed {
                active.push(v);
            }
        }
    }));
    match outcome {
        Ok(()) => Ok(active),
        Err(payload) => Err(Error::UpdatePanic {
            shard_id: shard.shard_id,
            vertex: current,
            message: panic_message(&*payload),
        }),
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".to_string()
    }
}

/// Debug-build guard for the single-writer contract: every dst index must
/// be written exactly once per iteration. Compiles to nothing in release
/// builds.
struct WriteOnceMap {
    #[cfg(debug_assertions)]
    written: Vec<std::sync::atomic::AtomicBool>,
    #[cfg(debug_assertions)]
    len: usize,
}

impl WriteOnceMap {
    #[cfg(debug_assertions)]
    fn new(len: usize) -> Self {
        let mut written = Vec::with_capacity(len);
        written.resize_with(len, || std::sync::atomic::AtomicBool::new(false));
        Self { written, len }
    }

    #[cfg(not(debug_assertions))]
    fn new(_len: usize) -> Self {
        Self {}
    }

    #[cfg(debug_assertions)]
    fn mark_range(&self, lo: u64, hi: u64) {
        for v in lo..hi {
            let prev = self.written[v as usize].swap(true, Ordering::Relaxed);
            assert!(!prev, "vertex {v} written twice in one iteration");
        }
    }

    #[cfg(not(debug_assertions))]
    fn mark_range(&self, _lo: u64, _hi: u64) {}

    #[cfg(debug_assertions)]
    fn assert_complete(&self) {
        for v in 0..self.len {
            assert!(
                self.written[v].load(Ordering::Relaxed),
                "vertex {v} never written this iteration"
            );
        }
    }

    #[cfg(not(debug_assertions))]
    fn assert_complete(&self) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algo::{AlgorithmKind, AlgorithmSpec};
    use crate::preprocess::{preprocess, EdgeListSource, PreprocessOptions, ShardingPolicy};

    /// Builds a graph directory from edge text and opens it.
    fn store_from_text(
        text: &str,
        target_edges_per_shard: u64,
        symmetrize: bool,
    ) -> (tempfile::TempDir, ShardStore, GraphMeta, DegreeInfo) {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("edges.txt");
        std::fs::write(&input, text).unwrap();
        let out = dir.path().join("graph");
        preprocess(
            &EdgeListSource::text(&input),
            &out,
            &PreprocessOptions {
                policy: ShardingPolicy {
                    target_edges_per_shard,
                    max_shard_count: None,
                },
                symmetrize,
            },
        )
        .unwrap();
        let store = ShardStore::open(&out).unwrap();
        let (meta, degrees, _) = store.read_metadata().unwrap();
        (dir, store, meta, degrees)
    }

    fn single_vertex_store() -> (tempfile::TempDir, ShardStore, GraphMeta, DegreeInfo) {
        // One vertex, no edges: built directly since the edge-list path
        // rejects empty inputs.
        let dir = tempfile::tempdir().unwrap();
        let store = ShardStore::create(dir.path().join("graph")).unwrap();
        let meta = GraphMeta::new(1, 0, vec![crate::model::VertexInterval::new(0, 1, 0)]);
        let degrees = DegreeInfo {
            in_degree: vec![0],
            out_degree: vec![0],
        };
        store
            .write_shard(&Shard {
                shard_id: 0,
                interval: meta.intervals[0],
                row: vec![0, 0],
                col: vec![],
            })
            .unwrap();
        store.write_metadata(&meta, &degrees, &[0.0]).unwrap();
        (dir, store, meta, degrees)
    }

    fn config(workers: usize) -> EngineConfig {
        EngineConfig {
            worker_count: workers,
            ..EngineConfig::default()
        }
    }

    #[test]
    fn identity_update_stops_after_one_full_pass() {
        let (_dir, store, meta, degrees) = store_from_text("0 1\n1 2\n2 3\n3 4\n", 2, false);
        let init: Vec<f64> = (0..5).map(|v| v as f64 * 1.5).collect();
        let identity =
            |v: VertexId, _n: &[VertexId], src: &[f64], _d: &DegreeInfo| (src[v as usize], false);
        let (values, reports) =
            run(&store, &meta, &degrees, identity, &init, &config(2)).unwrap();
        assert_eq!(values, init);
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].iteration, 0);
        assert_eq!(reports[0].active_ratio, 0.0);
        assert_eq!(reports[0].shards_skipped, 0, "iteration 0 loads everything");
    }

    #[test]
    fn empty_shard_vertices_get_the_empty_sum_value() {
        // Vertices 2 and 3 have no in-edges; their shard is empty.
        let (_dir, store, meta, degrees) = store_from_text("2 0\n3 1\n", 1, false);
        let spec = AlgorithmSpec::new(AlgorithmKind::PageRank);
        let init = spec.initial_values(meta.vertex_count);
        let mut cfg = config(1);
        cfg.max_iterations = 1;
        let (values, _) = run(
            &store,
            &meta,
            &degrees,
            spec.update_fn(0.0),
            &init,
            &cfg,
        )
        .unwrap();
        let n = meta.vertex_count as f64;
        assert_eq!(values[2], 0.15 / n);
        assert_eq!(values[3], 0.15 / n);
    }

    #[test]
    fn single_vertex_graph_converges_within_two_iterations() {
        let (_dir, store, meta, degrees) = single_vertex_store();
        for kind in [AlgorithmKind::PageRank, AlgorithmKind::Sssp, AlgorithmKind::Wcc] {
            let spec = AlgorithmSpec::new(kind);
            let init = spec.initial_values(1);
            let (values, reports) = run(
                &store,
                &meta,
                &degrees,
                spec.update_fn(0.0),
                &init,
                &config(1),
            )
            .unwrap();
            assert!(reports.len() <= 2, "{kind}: {} iterations", reports.len());
            match kind {
                AlgorithmKind::PageRank => assert_eq!(values, vec![0.15]),
                AlgorithmKind::Sssp => assert_eq!(values, vec![0.0]),
                AlgorithmKind::Wcc => assert_eq!(values, vec![0.0]),
            }
        }
    }

    #[test]
    fn worker_counts_do_not_change_results() {
        let text = "0 1\n1 2\n2 3\n3 4\n4 5\n5 0\n2 0\n4 1\n";
        let (_dir, store, meta, degrees) = store_from_text(text, 2, false);
        let spec = AlgorithmSpec::new(AlgorithmKind::PageRank);
        let init = spec.initial_values(meta.vertex_count);
        let mut cfg = config(1);
        cfg.max_iterations = 12;
        let (sequential, _) = run(
            &store,
            &meta,
            &degrees,
            spec.update_fn(0.0),
            &init,
            &cfg,
        )
        .unwrap();
        for workers in [2, 4, 8] {
            let mut cfg = config(workers);
            cfg.max_iterations = 12;
            let (parallel, _) = run(
                &store,
                &meta,
                &degrees,
                spec.update_fn(0.0),
                &init,
                &cfg,
            )
            .unwrap();
            assert_eq!(
                parallel.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                sequential.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                "bit-identical across {workers} workers"
            );
        }
    }

    #[test]
    fn selective_scheduling_skips_shards_without_changing_results() {
        // Symmetrized line: SSSP activity shrinks to a moving frontier.
        let n = 64;
        let text: String = (0..n - 1).map(|i| format!("{i} {}\n", i + 1)).collect();
        let (_dir, store, meta, degrees) = store_from_text(&text, 4, true);
        let spec = AlgorithmSpec::new(AlgorithmKind::Sssp);
        let init = spec.initial_values(meta.vertex_count);

        let mut selective = config(2);
        selective.selective_scheduling = true;
        // Small graph: raise the threshold so skipping can engage at all.
        selective.activation_threshold = 0.2;
        selective.max_iterations = 500;
        let (with_skip, reports_skip) = run(
            &store,
            &meta,
            &degrees,
            spec.update_fn(0.0),
            &init,
            &selective,
        )
        .unwrap();

        let mut full = config(2);
        full.selective_scheduling = false;
        full.max_iterations = 500;
        let (without_skip, reports_full) = run(
            &store,
            &meta,
            &degrees,
            spec.update_fn(0.0),
            &init,
            &full,
        )
        .unwrap();

        assert_eq!(
            with_skip.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            without_skip.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert!(
            reports_skip.iter().any(|r| r.shards_skipped > 0),
            "expected at least one skipped shard on a line graph"
        );
        assert!(reports_full.iter().all(|r| r.shards_skipped == 0));
        for r in reports_skip.iter().chain(&reports_full) {
            assert_eq!(
                r.shards_loaded + r.shards_skipped,
                meta.shard_count as usize
            );
        }
        // Distances are the line distances.
        for v in 0..n as usize {
            assert_eq!(with_skip[v], v as f64);
        }
    }

    #[test]
    fn no_vertex_bytes_written_during_iterations() {
        let (_dir, store, meta, degrees) = store_from_text("0 1\n1 2\n2 0\n", 2, false);
        let before = store.counters().vertex_bytes_written();
        let spec = AlgorithmSpec::new(AlgorithmKind::Wcc);
        let init = spec.initial_values(meta.vertex_count);
        run(
            &store,
            &meta,
            &degrees,
            spec.update_fn(0.0),
            &init,
            &config(2),
        )
        .unwrap();
        assert_eq!(store.counters().vertex_bytes_written(), before);
    }

    #[test]
    fn panicking_update_reports_shard_and_vertex() {
        let (_dir, store, meta, degrees) = store_from_text("0 1\n1 2\n2 3\n", 2, false);
        let bomb = |v: VertexId, _n: &[VertexId], src: &[f64], _d: &DegreeInfo| {
            if v == 2 {
                panic!("boom at {v}");
            }
            (src[v as usize], false)
        };
        let err = run(&store, &meta, &degrees, bomb, &[0.0; 4], &config(1)).unwrap_err();
        match err {
            Error::UpdatePanic {
                shard_id,
                vertex,
                message,
            } => {
                assert_eq!(vertex, 2);
                assert_eq!(shard_id, meta.interval_of(2).unwrap() as u32);
                assert!(message.contains("boom"), "{message}");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn max_iterations_caps_nonconverging_runs() {
        let (_dir, store, meta, degrees) = store_from_text("0 1\n1 0\n", 2, false);
        // Always-changing update never converges.
        let restless =
            |v: VertexId, _n: &[VertexId], src: &[f64], _d: &DegreeInfo| (src[v as usize] + 1.0, true);
        let mut cfg = config(1);
        cfg.max_iterations = 7;
        let (values, reports) =
            run(&store, &meta, &degrees, restless, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(reports.len(), 7);
        assert_eq!(values, vec![7.0, 7.0]);
        assert!(reports.iter().all(|r| r.active_ratio == 1.0));
    }

    #[test]
    fn init_length_mismatch_is_rejected() {
        let (_dir, store, meta, degrees) = store_from_text("0 1\n", 2, false);
        let identity =
            |v: VertexId, _n: &[VertexId], src: &[f64], _d: &DegreeInfo| (src[v as usize], false);
        let err = run(&store, &meta, &degrees, identity, &[0.0; 9], &config(1)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn report_json_lines_use_the_documented_fields() {
        let report = IterationReport {
            iteration: 3,
            active_ratio: 0.25,
            shards_loaded: 7,
            shards_skipped: 1,
            wall_time: Duration::from_micros(1500),
            bytes_read: 4096,
        };
        assert_eq!(
            report.to_json_line(),
            r#"{"iter":3,"active_ratio":0.25,"shards_loaded":7,"shards_skipped":1,"wall_ms":1.5,"bytes_read":4096}"#
        );
    }

    #[test]
    fn process_shard_requires_a_matching_segment() {
        let shard = Shard {
            shard_id: 0,
            interval: crate::model::VertexInterval::new(0, 2, 0),
            row: vec![0, 0, 0],
            col: vec![],
        };
        let degrees = DegreeInfo {
            in_degree: vec![0, 0],
            out_degree: vec![0, 0],
        };
        let identity =
            |v: VertexId, _n: &[VertexId], src: &[f64], _d: &DegreeInfo| (src[v as usize], false);
        let mut too_small = [0.0; 1];
        assert!(process_shard(&shard, &[0.0, 0.0], &mut too_small, &identity, &degrees).is_err());
        let mut right = [0.0; 2];
        let active =
            process_shard(&shard, &[1.0, 2.0], &mut right, &identity, &degrees).unwrap();
        assert!(active.is_empty());
        assert_eq!(right, [1.0, 2.0]);
    }
}

//! Semi-external-memory graph analytics engine.
//!
//! All vertices live in memory for the whole run; edges live on disk in
//! destination-partitioned CSR shards and stream through a sliding window
//! of shard-sized reads. Iterative vertex-centric algorithms (PageRank,
//! SSSP, WCC ship in [`algo`]) pull neighbor values from an in-memory
//! source array and write into a destination array, so iterations never
//! write vertex data to disk.
//!
//! Pipeline: [`gen`] emits synthetic edge lists, [`preprocess`] turns any
//! edge list into a graph directory of shards plus metadata ([`store`]),
//! and [`engine`] runs an update function over it — with Bloom-filter
//! shard skipping ([`schedule`]) and a budgeted compressed shard cache
//! ([`cache`]). [`cost`] evaluates closed-form I/O and memory costs of
//! this and prior out-of-core computation models.

pub mod algo;
pub mod cache;
pub mod cost;
pub mod engine;
pub mod error;
pub mod gen;
pub mod model;
pub mod preprocess;
pub mod schedule;
pub mod store;

pub use error::{Error, Result};
pub use model::{DegreeInfo, GraphMeta, VertexId, VertexInterval, VertexState};

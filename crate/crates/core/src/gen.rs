//! Synthetic graph generation for testing and benchmarking.
//!
//! All generators are deterministic: a `(GenSpec, seed)` pair fully
//! determines the emitted edge list, byte for byte, on every platform
//! (random kinds use a seeded ChaCha stream).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::EdgeListSource;

/// Recursive-matrix quadrant probabilities for the power-law kind.
pub const RMAT_SKEW: [f64; 4] = [0.57, 0.19, 0.19, 0.05];

/// Hard cap on generated edges, to keep desk runs desk-sized.
pub const MAX_EDGES: u64 = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    /// Recursive-quadrant sampling with skewed probabilities; heavy-tailed
    /// degree distribution.
    PowerLaw,
    /// Both endpoints uniform in `[0, n)`.
    UniformRandom,
    /// Edges `(i, i+1)` for `i` in `[0, n-1)`.
    Line,
    /// Edges `(i, (i+1) mod n)`.
    Cycle,
    /// Spokes into a hub: `(i, 0)` for `i` in `[1, n)`.
    Star,
    /// All ordered pairs `(i, j)`, `i != j`.
    Complete,
}

impl GraphKind {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "powerlaw" => Some(Self::PowerLaw),
            "uniform" => Some(Self::UniformRandom),
            "line" => Some(Self::Line),
            "cycle" => Some(Self::Cycle),
            "star" => Some(Self::Star),
            "complete" => Some(Self::Complete),
            _ => None,
        }
    }

    fn needs_edge_count(self) -> bool {
        matches!(self, Self::PowerLaw | Self::UniformRandom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSpec {
    pub kind: GraphKind,
    pub vertex_count: u64,
    /// Required for the random kinds, ignored by the structured ones.
    pub edge_count: Option<u64>,
    pub seed: u64,
}

/// Writes the generated edge list to `out` as text and returns a source
/// pointing at it.
pub fn generate(spec: &GenSpec, out: &Path) -> Result<EdgeListSource> {
    validate(spec)?;
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut w = BufWriter::new(file);
    let result = emit(spec, &mut w).and_then(|()| w.flush());
    result.map_err(|e| Error::io(out, e))?;
    Ok(EdgeListSource::text(out))
}

fn validate(spec: &GenSpec) -> Result<()> {
    if spec.vertex_count == 0 {
        return Err(Error::InvalidArgument(
            "vertex count must be at least 1".into(),
        ));
    }
    if spec.kind.needs_edge_count() {
        match spec.edge_count {
            None => {
                return Err(Error::InvalidArgument(format!(
                    "{:?} requires an edge count",
                    spec.kind
                )))
            }
            Some(e) if e == 0 || e > MAX_EDGES => {
                return Err(Error::InvalidArgument(format!(
                    "edge count must be in [1, {MAX_EDGES}]"
                )))
            }
            Some(_) => {}
        }
    }
    if spec.kind == GraphKind::Complete {
        // n*(n-1) edges; keep the output bounded.
        if spec.vertex_count > 4096 {
            return Err(Error::InvalidArgument(
                "complete graphs are limited to 4096 vertices".into(),
            ));
        }
    }
    Ok(())
}

fn emit<W: Write>(spec: &GenSpec, w: &mut W) -> std::io::Result<()> {
    let n = spec.vertex_count;
    match spec.kind {
        GraphKind::Line => {
            for i in 0..n.saturating_sub(1) {
                writeln!(w, "{} {}", i, i + 1)?;
            }
        }
        GraphKind::Cycle => {
            for i in 0..n {
                writeln!(w, "{} {}", i, (i + 1) % n)?;
            }
        }
        GraphKind::Star => {
            for i in 1..n {
                writeln!(w, "{i} 0")?;
            }
        }
        GraphKind::Complete => {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        writeln!(w, "{i} {j}")?;
                    }
                }
            }
        }
        GraphKind::UniformRandom => {
            let e = spec.edge_count.unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for _ in 0..e {
                let u = rng.random_range(0..n);
                let v = rng.random_range(0..n);
                writeln!(w, "{u} {v}")?;
            }
        }
        GraphKind::PowerLaw => {
            let e = spec.edge_count.unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            for _ in 0..e {
                let (u, v) = rmat_edge(&mut rng, n);
                writeln!(w, "{u} {v}")?;
            }
        }
    }
    Ok(())
}

/// Samples one edge by descending a 2^levels × 2^levels adjacency matrix,
/// picking a quadrant per level with the [`RMAT_SKEW`] probabilities.
/// Out-of-range samples (possible when `n` is not a power of two) are
/// rejected and redrawn.
fn rmat_edge(rng: &mut ChaCha8Rng, n: u64) -> (u64, u64) {
    let levels = 64 - (n - 1).leading_zeros().min(63);
    loop {
        let mut src = 0u64;
        let mut dst = 0u64;
        for _ in 0..levels.max(1) {
            let r: f64 = rng.random();
            let (sbit, dbit) = if r < RMAT_SKEW[0] {
                (0, 0)
            } else if r < RMAT_SKEW[0] + RMAT_SKEW[1] {
                (0, 1)
            } else if r < RMAT_SKEW[0] + RMAT_SKEW[1] + RMAT_SKEW[2] {
                (1, 0)
            } else {
                (1, 1)
            };
            src = (src << 1) | sbit;
            dst = (dst << 1) | dbit;
        }
        if src < n && dst < n {
            return (src, dst);
        }
    }
}

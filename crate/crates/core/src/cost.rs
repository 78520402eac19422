//! Closed-form per-iteration I/O and memory analysis of five graph
//! computation models, evaluated in bytes.
//!
//! Let C be the size of a vertex record, D the size of an edge record,
//! P the shard/partition count, N the worker count and θ the cache miss
//! ratio. Per iteration:
//!
//! | model | data read            | data write        | memory              |
//! |-------|----------------------|-------------------|---------------------|
//! | PSW   | C|V| + 2(C+D)|E|     | C|V| + 2(C+D)|E|  | (C|V|+2(C+D)|E|)/P  |
//! | ESG   | C|V| + (C+D)|E|      | C|V| + C|E|       | C|V|/P              |
//! | VSP   | C(1+δ)|V| + D|E|     | C|V|              | C(2+δ)|V|/P         |
//! | DSW   | C√P|V| + D|E|        | C√P|V|            | 2C|V|/√P            |
//! | VSW   | θD|E|                | 0                 | 2C|V| + ND|E|/P     |
//!
//! with δ ≈ (1 − e^(−d_avg/P))·P and d_avg = |E|/|V|.
//!
//! The sliding-window row is what this engine implements; the others model
//! prior out-of-core designs for comparison. `predict_vs_measured` checks
//! the VSW read prediction against a run's measured counters, accounting
//! the shard headers and row arrays (which D does not cover) as a separate
//! additive term.

use std::fmt;

use serde::Serialize;

use crate::engine::IterationReport;
use crate::error::{Error, Result};
use crate::store::{ROW_ENTRY_BYTES, SHARD_HEADER_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ComputationModel {
    Psw,
    Esg,
    Vsp,
    Dsw,
    Vsw,
}

impl ComputationModel {
    pub const ALL: [ComputationModel; 5] = [
        ComputationModel::Psw,
        ComputationModel::Esg,
        ComputationModel::Vsp,
        ComputationModel::Dsw,
        ComputationModel::Vsw,
    ];

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "psw" => Some(Self::Psw),
            "esg" => Some(Self::Esg),
            "vsp" => Some(Self::Vsp),
            "dsw" => Some(Self::Dsw),
            "vsw" => Some(Self::Vsw),
            _ => None,
        }
    }
}

impl fmt::Display for ComputationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Psw => "PSW",
            Self::Esg => "ESG",
            Self::Vsp => "VSP",
            Self::Dsw => "DSW",
            Self::Vsw => "VSW",
        };
        f.write_str(name)
    }
}

/// Parameters feeding the formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostInputs {
    /// C: bytes per vertex record.
    pub vertex_record_bytes: u64,
    /// D: bytes per edge record.
    pub edge_record_bytes: u64,
    pub vertex_count: u64,
    pub edge_count: u64,
    /// P: shard or partition count.
    pub shard_count: u64,
    /// N: CPU workers.
    pub worker_count: u64,
    /// θ: fraction of edge bytes that miss the cache and hit disk.
    pub cache_miss_ratio: f64,
}

impl CostInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("vertex_record_bytes", self.vertex_record_bytes),
            ("edge_record_bytes", self.edge_record_bytes),
            ("vertex_count", self.vertex_count),
            ("edge_count", self.edge_count),
            ("shard_count", self.shard_count),
            ("worker_count", self.worker_count),
        ] {
            if value == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.cache_miss_ratio) {
            return Err(Error::InvalidArgument(format!(
                "cache_miss_ratio {} outside [0, 1]",
                self.cache_miss_ratio
            )));
        }
        Ok(())
    }

    /// d_avg = |E| / |V|.
    pub fn avg_degree(&self) -> f64 {
        self.edge_count as f64 / self.vertex_count as f64
    }

    /// δ ≈ (1 − e^(−d_avg/P))·P, the expected v-shard inflation factor.
    pub fn vsp_delta(&self) -> f64 {
        let p = self.shard_count as f64;
        (1.0 - (-self.avg_degree() / p).exp()) * p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport {
    pub model: ComputationModel,
    pub read_bytes: f64,
    pub write_bytes: f64,
    pub memory_bytes: f64,
}

/// Evaluates one model's row exactly as printed above.
pub fn evaluate(model: ComputationModel, inputs: &CostInputs) -> Result<CostReport> {
    inputs.validate()?;
    let c = inputs.vertex_record_bytes as f64;
    let d = inputs.edge_record_bytes as f64;
    let v = inputs.vertex_count as f64;
    let e = inputs.edge_count as f64;
    let p = inputs.shard_count as f64;
    let n = inputs.worker_count as f64;
    let theta = inputs.cache_miss_ratio;

    let (read_bytes, write_bytes, memory_bytes) = match model {
        ComputationModel::Psw => {
            let io = c * v + 2.0 * (c + d) * e;
            (io, io, io / p)
        }
        ComputationModel::Esg => (c * v + (c + d) * e, c * v + c * e, c * v / p),
        ComputationModel::Vsp => {
            let delta = inputs.vsp_delta();
            (
                c * (1.0 + delta) * v + d * e,
                c * v,
                c * (2.0 + delta) * v / p,
            )
        }
        ComputationModel::Dsw => {
            let sqrt_p = p.sqrt();
            (c * sqrt_p * v + d * e, c * sqrt_p * v, 2.0 * c * v / sqrt_p)
        }
        ComputationModel::Vsw => (theta * d * e, 0.0, 2.0 * c * v + n * d * e / p),
    };
    Ok(CostReport {
        model,
        read_bytes,
        write_bytes,
        memory_bytes,
    })
}

/// Evaluates every model, in the fixed order PSW, ESG, VSP, DSW, VSW.
pub fn compare_all(inputs: &CostInputs) -> Result<Vec<CostReport>> {
    ComputationModel::ALL
        .iter()
        .map(|&m| evaluate(m, inputs))
        .collect()
}

/// Shard-file bytes per full sweep that the edge-record term D|E| does not
/// cover: one header plus one row array per shard.
pub fn sweep_overhead_bytes(vertex_count: u64, shard_count: u64) -> u64 {
    shard_count * SHARD_HEADER_LEN + ROW_ENTRY_BYTES * (vertex_count + shard_count)
}

/// Comparison of the VSW read prediction against measured counters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationSummary {
    /// Last (steady-state) iteration's measured shard bytes read.
    pub measured_bytes: u64,
    /// θD|E| — the edge-record prediction.
    pub predicted_edge_bytes: f64,
    /// θ × (headers + row arrays): file bytes the edge term cannot see.
    pub predicted_overhead_bytes: f64,
    pub predicted_total_bytes: f64,
    /// measured − θD|E|; for a θ=1 run this is exactly the overhead.
    pub deviation_vs_edge_bytes: f64,
    /// measured − total prediction.
    pub deviation_vs_total_bytes: f64,
    /// Deviation relative to the total prediction; 0 when both are 0.
    pub relative_deviation: f64,
}

/// Compares the VSW data-read row against a scheduling-off run.
///
/// The last report is taken as the steady state. Runs with any skipped
/// shard are rejected since the formulas assume every shard streams by.
pub fn predict_vs_measured(
    inputs: &CostInputs,
    reports: &[IterationReport],
) -> Result<DeviationSummary> {
    inputs.validate()?;
    if reports.is_empty() {
        return Err(Error::InvalidArgument("empty report list".into()));
    }
    if let Some(r) = reports.iter().find(|r| r.shards_skipped > 0) {
        return Err(Error::InvalidArgument(format!(
            "iteration {} skipped {} shards; predictions assume a scheduling-off run",
            r.iteration, r.shards_skipped
        )));
    }
    let theta = inputs.cache_miss_ratio;
    let measured = reports.last().unwrap().bytes_read;
    let predicted_edge =
        theta * inputs.edge_record_bytes as f64 * inputs.edge_count as f64;
    let predicted_overhead =
        theta * sweep_overhead_bytes(inputs.vertex_count, inputs.shard_count) as f64;
    let predicted_total = predicted_edge + predicted_overhead;
    let deviation_total = measured as f64 - predicted_total;
    let relative = if predicted_total == 0.0 {
        if measured == 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        deviation_total / predicted_total
    };
    Ok(DeviationSummary {
        measured_bytes: measured,
        predicted_edge_bytes: predicted_edge,
        predicted_overhead_bytes: predicted_overhead,
        predicted_total_bytes: predicted_total,
        deviation_vs_edge_bytes: measured as f64 - predicted_edge,
        deviation_vs_total_bytes: deviation_total,
        relative_deviation: relative,
    })
}

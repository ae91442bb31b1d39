use std::fmt::Write as _;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::world::GridWorld;

use super::{run, MetricsRecord};

/// What a batch keeps from each run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub seed: u64,
    pub trace: Vec<MetricsRecord>,
    pub world_hash: String,
}

impl RunSummary {
    pub fn last(&self) -> &MetricsRecord {
        self.trace.last().expect("runs have at least one tick")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub tick: u64,
    /// `(mean, std)` for each of [`AGGREGATE_METRICS`], population std.
    pub stats: [(f64, f64); 4],
}

pub const AGGREGATE_METRICS: [&str; 4] = [
    "active_robots",
    "explored_cells",
    "bytes_per_robot",
    "stig_ops_per_robot",
];

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub config: SimConfig,
    /// Ordered by seed.
    pub runs: Vec<RunSummary>,
    pub aggregate: Vec<AggregateRow>,
}

/// SHA-256 of the world's CSV dump.
pub fn world_hash(world: &GridWorld) -> String {
    hex::encode(Sha256::digest(world.to_csv().as_bytes()))
}

fn metric_values(r: &MetricsRecord) -> [f64; 4] {
    [
        r.active_robots as f64,
        r.explored_cells as f64,
        r.bytes_per_robot,
        r.stig_ops_per_robot,
    ]
}

/// Per-tick mean and population standard deviation across traces of equal
/// length.
pub fn aggregate(traces: &[&[MetricsRecord]]) -> Vec<AggregateRow> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    let n = traces.len() as f64;
    (0..first.len())
        .map(|t| {
            let mut stats = [(0.0, 0.0); 4];
            for (m, slot) in stats.iter_mut().enumerate() {
                let mean = traces
                    .iter()
                    .map(|tr| metric_values(&tr[t])[m])
                    .sum::<f64>()
                    / n;
                let var = traces
                    .iter()
                    .map(|tr| (metric_values(&tr[t])[m] - mean).powi(2))
                    .sum::<f64>()
                    / n;
                *slot = (mean, var.sqrt());
            }
            AggregateRow {
                tick: first[t].tick,
                stats,
            }
        })
        .collect()
}

pub fn aggregate_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("tick");
    for m in AGGREGATE_METRICS {
        let _ = write!(out, ",{m}_mean,{m}_std");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", r.tick);
        for (mean, std) in r.stats {
            let _ = write!(out, ",{mean},{std}");
        }
        out.push('\n');
    }
    out
}

/// Runs seeds `seed_base..seed_base + n_runs` of `config` on up to `jobs`
/// worker threads (0 picks the rayon default).
pub fn batch(
    config: &SimConfig,
    n_runs: usize,
    seed_base: u64,
    jobs: usize,
) -> Result<BatchResult> {
    if n_runs == 0 {
        return Err(Error::invalid("runs", "must be at least 1"));
    }
    config.validate()?;
    let seeds: Vec<u64> = (0..n_runs as u64)
        .map(|i| seed_base.wrapping_add(i))
        .collect();
    let one = |seed: &u64| -> Result<RunSummary> {
        let cfg = SimConfig {
            seed: *seed,
            ..config.clone()
        };
        let res = run(&cfg)?;
        Ok(RunSummary {
            seed: *seed,
            world_hash: world_hash(&res.state.world),
            trace: res.trace,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let runs = pool.install(|| seeds.par_iter().map(one).collect::<Result<Vec<_>>>())?;
    let traces: Vec<&[MetricsRecord]> = runs.iter().map(|r| r.trace.as_slice()).collect();
    let aggregate = aggregate(&traces);
    Ok(BatchResult {
        config: config.clone(),
        runs,
        aggregate,
    })
}

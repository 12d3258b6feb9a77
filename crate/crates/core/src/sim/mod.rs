//! Monte Carlo simulation of sampling, service and time-stamp noise.
//!
//! [`engine`] runs the epoch recursion used everywhere; [`event`] is an
//! event-list implementation kept only as a cross-check.

pub mod engine;
pub mod event;
pub mod rng;
pub mod stats;
pub mod trace;

use rayon::prelude::*;

pub use engine::{simulate_plan, CyclePlan, EpochRecord, NoiseModel, SimOptions, SimRun, BURN_IN_CYCLES};
pub use event::{simulate_events, EventRun};
pub use rng::derive_seed;
pub use stats::{EstimatorKind, ProcessEstimates, SimEstimate, Z95};
pub use trace::write_trace;

use crate::error::{Error, Result};
use crate::model::{SystemConfig, ThresholdPolicy};
use crate::multi::{ASSchedule, MetricReport, RRPolicy};
use crate::sim::stats::{combined_influence, std_error_of, ProcessBatches};

impl SimRun {
    pub fn estimates(&self) -> Vec<ProcessEstimates> {
        self.tables.iter().map(|t| t.estimates(self.seed)).collect()
    }

    /// Per-batch influence values of the weighted objective, for paired comparisons.
    pub(crate) fn objective_influence(&self, cfg: &SystemConfig) -> Option<Vec<f64>> {
        let (wa, we) = objective_weights(cfg);
        combined_influence(&self.tables, &wa, &we)
    }
}

pub(crate) fn objective_weights(cfg: &SystemConfig) -> (Vec<f64>, Vec<f64>) {
    cfg.processes.iter().map(|p| (p.weight, 1.0 - p.weight)).unzip()
}

/// Standard error of `objective(a) - objective(b)` for two runs sharing seed
/// and cycle count.
pub fn paired_std_error(cfg: &SystemConfig, a: &SimRun, b: &SimRun) -> Result<f64> {
    if a.cycles != b.cycles || a.seed != b.seed {
        return Err(Error::InvalidConfig("paired runs need the same seed and cycle count".into()));
    }
    let (za, zb) = match (a.objective_influence(cfg), b.objective_influence(cfg)) {
        (Some(za), Some(zb)) => (za, zb),
        _ => return Ok(f64::NAN),
    };
    let d: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| x - y).collect();
    Ok(std_error_of(&d))
}

/// Single-process run of `epochs` deliveries under a threshold policy.
pub fn simulate_single(
    cfg: &SystemConfig,
    policy: &ThresholdPolicy,
    epochs: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<ProcessEstimates> {
    cfg.sole_process()?;
    let run = simulate_plan(cfg, &CyclePlan::single(policy.threshold), epochs, seed, opts)?;
    Ok(run.tables[0].estimates(seed))
}

pub fn simulate_rr(cfg: &SystemConfig, policy: &RRPolicy, cycles: u64, seed: u64, opts: SimOptions) -> Result<MetricReport> {
    let plan = CyclePlan::round_robin(cfg.len(), policy.threshold);
    let run = simulate_plan(cfg, &plan, cycles, seed, opts)?;
    Ok(MetricReport::from_run(cfg, &run))
}

pub fn simulate_as(cfg: &SystemConfig, sched: &ASSchedule, cycles: u64, seed: u64, opts: SimOptions) -> Result<MetricReport> {
    sched.validate(cfg.len())?;
    let run = simulate_plan(cfg, &CyclePlan::asymmetric(&sched.m), cycles, seed, opts)?;
    Ok(MetricReport::from_run(cfg, &run))
}

/// Independent replications seeded by [`derive_seed`], run in parallel and
/// merged in replication order. Batch tables are concatenated, so the result
/// does not depend on the thread count.
pub fn simulate_replicated(
    cfg: &SystemConfig,
    plan: &CyclePlan,
    cycles: u64,
    replications: u64,
    master_seed: u64,
    opts: SimOptions,
) -> Result<SimRun> {
    if replications == 0 {
        return Err(Error::InvalidConfig("need at least one replication".into()));
    }
    let runs = (0..replications)
        .into_par_iter()
        .map(|r| simulate_plan(cfg, plan, cycles, derive_seed(master_seed, r), opts))
        .collect::<Result<Vec<_>>>()?;
    let mut tables = vec![ProcessBatches::default(); cfg.len()];
    let mut trace = opts.trace.then(Vec::new);
    for run in runs {
        for (t, r) in tables.iter_mut().zip(run.tables) {
            t.batches.extend(r.batches);
        }
        if let (Some(all), Some(part)) = (trace.as_mut(), run.trace) {
            all.extend(part);
        }
    }
    Ok(SimRun {
        tables,
        cycles: cycles * replications,
        seed: master_seed,
        trace,
    })
}

//! Point estimates and batch-means standard errors.
//!
//! Consecutive epochs are correlated through the previous service time, so
//! standard errors come from batch means over contiguous blocks of cycles. Ratio
//! estimates (the AoI) are linearized around the point estimate.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

const MIN_BATCH_CYCLES: u64 = 100;
const MAX_BATCHES: u64 = 500;

/// Number of batches used for a run of `cycles` cycles.
pub fn batch_count(cycles: u64) -> usize {
    if cycles < 2 {
        return cycles.max(1) as usize;
    }
    (cycles / MIN_BATCH_CYCLES).clamp(2, MAX_BATCHES) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Sample-path average of the observed quantity.
    Raw,
    /// Average of the conditional expectation given the sleep length.
    RaoBlackwell,
}

/// A simulated point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Epochs (deliveries) behind the estimate.
    pub epochs: u64,
    pub seed: u64,
    pub kind: EstimatorKind,
}

impl SimEstimate {
    pub fn half_width_95(&self) -> f64 {
        Z95 * self.std_error
    }

    /// Whether `x` lies within `k` standard errors.
    pub fn covers(&self, x: f64, k: f64) -> bool {
        (self.value - x).abs() <= k * self.std_error
    }
}

/// Per-batch sums for one process.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BatchSums {
    /// `Σ a(D_{i-1}) L_i + L_i^2 / 2`
    pub area: f64,
    /// `Σ L_i`
    pub length: f64,
    pub count: u64,
    /// `Σ h(sleep)`
    pub var_sum: f64,
    /// `Σ (S - S')^2`
    pub sq_err: f64,
    /// `Σ (S - S')`
    pub stamp_dev: f64,
}

impl BatchSums {
    pub fn add(&mut self, other: &BatchSums) {
        self.area += other.area;
        self.length += other.length;
        self.count += other.count;
        self.var_sum += other.var_sum;
        self.sq_err += other.sq_err;
        self.stamp_dev += other.stamp_dev;
    }
}

/// Batch table of one process: `batches[b]` holds the sums of batch `b`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProcessBatches {
    pub batches: Vec<BatchSums>,
}

/// Linearized per-batch influence values for every estimate of a process.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Influence {
    pub aoi: Vec<f64>,
    pub err_rb: Vec<f64>,
    pub err_raw: Vec<f64>,
    pub stamp_dev: Vec<f64>,
}

/// Estimates of one process from a batch table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessEstimates {
    pub aoi: SimEstimate,
    /// Rao-Blackwellized time-stamp error.
    pub err: SimEstimate,
    pub err_raw: SimEstimate,
    /// Mean of `S - S'`; zero in expectation.
    pub stamp_bias: SimEstimate,
}

fn std_error(z: &[f64]) -> f64 {
    let b = z.len();
    if b < 2 {
        return f64::NAN;
    }
    let mean = z.iter().sum::<f64>() / b as f64;
    let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

impl ProcessBatches {
    pub fn new(batches: usize) -> Self {
        Self {
            batches: vec![BatchSums::default(); batches],
        }
    }

    pub fn total(&self) -> BatchSums {
        let mut t = BatchSums::default();
        for b in &self.batches {
            t.add(b);
        }
        t
    }

    pub(crate) fn influence(&self) -> Influence {
        let t = self.total();
        let nb = self.batches.len() as f64;
        let ratio = t.area / t.length;
        let n = t.count as f64;
        let (e_rb, e_raw, dev) = (t.var_sum / n, t.sq_err / n, t.stamp_dev / n);
        let per = |f: &dyn Fn(&BatchSums) -> f64| self.batches.iter().map(f).collect::<Vec<_>>();
        Influence {
            aoi: per(&|b| nb * (b.area - ratio * b.length) / t.length),
            err_rb: per(&|b| nb * (b.var_sum - e_rb * b.count as f64) / n),
            err_raw: per(&|b| nb * (b.sq_err - e_raw * b.count as f64) / n),
            stamp_dev: per(&|b| nb * (b.stamp_dev - dev * b.count as f64) / n),
        }
    }

    pub fn estimates(&self, seed: u64) -> ProcessEstimates {
        let t = self.total();
        let n = t.count as f64;
        let inf = self.influence();
        let est = |value, z: &[f64], kind| SimEstimate {
            value,
            std_error: std_error(z),
            epochs: t.count,
            seed,
            kind,
        };
        ProcessEstimates {
            aoi: est(t.area / t.length, &inf.aoi, EstimatorKind::Raw),
            err: est(t.var_sum / n, &inf.err_rb, EstimatorKind::RaoBlackwell),
            err_raw: est(t.sq_err / n, &inf.err_raw, EstimatorKind::Raw),
            stamp_bias: est(t.stamp_dev / n, &inf.stamp_dev, EstimatorKind::Raw),
        }
    }
}

/// Standard error of `Σ_k w_aoi[k] aoi_k + w_err[k] err_k` using the
/// Rao-Blackwellized errors.
pub(crate) fn combined_std_error(tables: &[ProcessBatches], w_aoi: &[f64], w_err: &[f64]) -> f64 {
    combined_influence(tables, w_aoi, w_err).map_or(f64::NAN, |z| std_error(&z))
}

pub(crate) fn combined_influence(tables: &[ProcessBatches], w_aoi: &[f64], w_err: &[f64]) -> Option<Vec<f64>> {
    let nb = tables.first()?.batches.len();
    let mut z = vec![0.0; nb];
    for (k, t) in tables.iter().enumerate() {
        let inf = t.influence();
        for b in 0..nb {
            z[b] += w_aoi[k] * inf.aoi[b] + w_err[k] * inf.err_rb[b];
        }
    }
    Some(z)
}

pub(crate) fn std_error_of(z: &[f64]) -> f64 {
    std_error(z)
}

//! Policies for several processes sharing one channel.
//!
//! Round robin ([`RRPolicy`]) serves processes `1..K` once per cycle and sleeps
//! `[ξ - Σ_k Y_k]^+` before the first slot, the sum running over the previous
//! cycle's service times. The asymmetric schedule ([`ASSchedule`]) gives process
//! `k` a burst of `m_k` back-to-back trials per cycle and never sleeps. A sensor
//! wakes at the start of its own slot, so the first trial of a burst has slept
//! through every other process's burst.
//!
//! Round robin is evaluated by simulation (or in closed form when `K = 1`). The
//! asymmetric schedule with exponential service has a closed form, which
//! [`as_metrics`] uses when asked for [`Estimator::Analytic`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::numeric;
use crate::sim::{self, SimOptions, SimRun, Z95};
use crate::single;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RRPolicy {
    pub threshold: f64,
}

impl RRPolicy {
    pub fn new(threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0) || !threshold.is_finite() {
            return Err(Error::InvalidParameter {
                name: "threshold",
                value: threshold,
                reason: "must be nonnegative and finite",
            });
        }
        Ok(Self { threshold })
    }

    pub fn zero_wait() -> Self {
        Self { threshold: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ASSchedule {
    pub m: Vec<u32>,
}

impl ASSchedule {
    pub fn new(m: Vec<u32>) -> Result<Self> {
        let s = Self { m };
        if s.m.contains(&0) {
            return Err(Error::InvalidConfig("every trial count must be at least 1".into()));
        }
        Ok(s)
    }

    pub fn ones(k: usize) -> Self {
        Self { m: vec![1; k] }
    }

    pub fn validate(&self, processes: usize) -> Result<()> {
        if self.m.len() != processes {
            return Err(Error::InvalidConfig(format!(
                "schedule has {} trial counts for {processes} processes",
                self.m.len()
            )));
        }
        if self.m.contains(&0) {
            return Err(Error::InvalidConfig("every trial count must be at least 1".into()));
        }
        Ok(())
    }
}

/// How metrics are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimator {
    Analytic,
    Simulated { cycles: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Analytic,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessMetrics {
    pub aoi: f64,
    pub err: f64,
    /// 95% half-widths; absent for analytic values.
    pub aoi_half_width: Option<f64>,
    pub err_half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mode: EvalMode,
    pub processes: Vec<ProcessMetrics>,
    /// β per process.
    pub weights: Vec<f64>,
    /// `Σ_k β_k aoi_k + (1 - β_k) err_k`
    pub objective: f64,
    pub objective_half_width: Option<f64>,
    pub cycles: Option<u64>,
    pub seed: Option<u64>,
}

impl MetricReport {
    fn analytic(cfg: &SystemConfig, per: Vec<(f64, f64)>) -> Self {
        let processes = per
            .into_iter()
            .map(|(aoi, err)| ProcessMetrics {
                aoi,
                err,
                aoi_half_width: None,
                err_half_width: None,
            })
            .collect();
        let mut r = Self {
            mode: EvalMode::Analytic,
            processes,
            weights: cfg.processes.iter().map(|p| p.weight).collect(),
            objective: 0.0,
            objective_half_width: None,
            cycles: None,
            seed: None,
        };
        r.objective = r.recompute_objective();
        r
    }

    pub fn from_run(cfg: &SystemConfig, run: &SimRun) -> Self {
        let processes = run
            .estimates()
            .into_iter()
            .map(|e| ProcessMetrics {
                aoi: e.aoi.value,
                err: e.err.value,
                aoi_half_width: Some(e.aoi.half_width_95()),
                err_half_width: Some(e.err.half_width_95()),
            })
            .collect();
        let (wa, we) = sim::objective_weights(cfg);
        let se = sim::stats::combined_std_error(&run.tables, &wa, &we);
        let mut r = Self {
            mode: EvalMode::Simulated,
            processes,
            weights: wa,
            objective: 0.0,
            objective_half_width: Some(Z95 * se),
            cycles: Some(run.cycles),
            seed: Some(run.seed),
        };
        r.objective = r.recompute_objective();
        r
    }

    pub fn recompute_objective(&self) -> f64 {
        self.processes
            .iter()
            .zip(&self.weights)
            .map(|(p, b)| b * p.aoi + (1.0 - b) * p.err)
            .sum()
    }

    pub fn sum_aoi(&self) -> f64 {
        self.processes.iter().map(|p| p.aoi).sum()
    }

    pub fn sum_err(&self) -> f64 {
        self.processes.iter().map(|p| p.err).sum()
    }

    /// Standard error of the objective (NaN when analytic).
    pub fn objective_std_error(&self) -> f64 {
        self.objective_half_width.map_or(f64::NAN, |h| h / Z95)
    }
}

pub fn rr_metrics(cfg: &SystemConfig, policy: &RRPolicy, estimator: Estimator) -> Result<MetricReport> {
    cfg.validate()?;
    RRPolicy::new(policy.threshold)?;
    match estimator {
        Estimator::Analytic => {
            if cfg.len() != 1 {
                return Err(Error::Unsupported(
                    "closed-form round-robin metrics exist only for one process; simulate instead".into(),
                ));
            }
            let aoi = single::aoi_of_threshold(cfg, policy.threshold)?;
            let err = single::error_of_threshold(cfg, policy.threshold)?;
            Ok(MetricReport::analytic(cfg, vec![(aoi, err)]))
        }
        Estimator::Simulated { cycles, seed } => sim::simulate_rr(cfg, policy, cycles, seed, SimOptions::default()),
    }
}

pub fn as_metrics(cfg: &SystemConfig, sched: &ASSchedule, estimator: Estimator) -> Result<MetricReport> {
    cfg.validate()?;
    sched.validate(cfg.len())?;
    match estimator {
        Estimator::Analytic => Ok(MetricReport::analytic(cfg, as_closed_form(cfg, &sched.m))),
        Estimator::Simulated { cycles, seed } => sim::simulate_as(cfg, sched, cycles, seed, SimOptions::default()),
    }
}

/// Per-process `(aoi, err)` of an asymmetric schedule with exponential service.
///
/// Inner epochs of a burst are one trial `T = X + Y`; the opening epoch adds
/// every other process's burst `O_k`. Each epoch starts at age `Y_prev` plus
/// zero-mean noise independent of its length, so
/// `aoi_k = μ_Y + Σ E[L²] / (2 Σ E[L])` over one cycle.
fn as_closed_form(cfg: &SystemConfig, m: &[u32]) -> Vec<(f64, f64)> {
    let mu = cfg.service.mean();
    let var_y = cfg.service.variance();
    let trial_mean: Vec<f64> = cfg.processes.iter().map(|p| 1.0 / p.rate + mu).collect();
    let trial_var: Vec<f64> = cfg.processes.iter().map(|p| 1.0 / (p.rate * p.rate) + var_y).collect();
    let cycle: f64 = m.iter().zip(&trial_mean).map(|(&n, c)| n as f64 * c).sum();
    (0..cfg.len())
        .map(|k| {
            let mk = m[k] as f64;
            let others = |f: &dyn Fn(usize) -> f64| (0..cfg.len()).filter(|&s| s != k).map(f).sum::<f64>();
            let o_mean = others(&|s| m[s] as f64 * trial_mean[s]);
            let o_var = others(&|s| m[s] as f64 * trial_var[s]);
            let t_sq = trial_var[k] + trial_mean[k] * trial_mean[k];
            let open_sq = o_var + trial_var[k] + (o_mean + trial_mean[k]).powi(2);
            let aoi = mu + 0.5 * ((mk - 1.0) * t_sq + open_sq) / cycle;

            let rf = &cfg.processes[k].recovery;
            let alpha = rf.rate();
            let inner = rf.expect_over(&cfg.service);
            // E[h(Y + O_k)] factorizes: h is exponential and the terms are independent
            let opening = inner
                * (0..cfg.len())
                    .filter(|&s| s != k)
                    .map(|s| {
                        let lam = cfg.processes[s].rate;
                        (lam / (lam + alpha) * cfg.service.laplace(alpha)).powi(m[s] as i32)
                    })
                    .product::<f64>();
            let err = ((mk - 1.0) * inner + opening) / mk;
            (aoi, err)
        })
        .collect()
}

/// Candidate thresholds scanned by [`rr_optimize`] before refinement.
pub const RR_GRID_DEFAULT: usize = 24;

/// Minimizes the weighted sum over the round-robin threshold on `[0, xi_max]`.
///
/// Simulated candidates share one seed, so the objective is a smooth function
/// of `ξ` along a fixed sample path and golden-section refinement is stable.
pub fn rr_optimize(
    cfg: &SystemConfig,
    xi_max: f64,
    grid: usize,
    estimator: Estimator,
) -> Result<(RRPolicy, MetricReport)> {
    cfg.validate()?;
    if !cfg.weights_equal() {
        return Err(Error::Unsupported(
            "round-robin threshold optimization requires equal weights".into(),
        ));
    }
    if !(xi_max > 0.0) || !xi_max.is_finite() {
        return Err(Error::InvalidParameter {
            name: "xi_max",
            value: xi_max,
            reason: "must be positive and finite",
        });
    }
    let eval = |xi: f64| rr_metrics(cfg, &RRPolicy { threshold: xi }, estimator);
    let grid = grid.max(2);
    let step = xi_max / grid as f64;
    let points: Vec<f64> = (0..=grid).map(|j| step * j as f64).collect();
    let values = points
        .par_iter()
        .map(|&xi| eval(xi).map(|r| r.objective))
        .collect::<Result<Vec<_>>>()?;
    let best = (0..values.len()).fold(0, |b, j| if values[j] < values[b] { j } else { b });
    let a = points[best.saturating_sub(1)];
    let b = points[(best + 1).min(grid)];
    let (xi, v) = numeric::golden_section(|x| eval(x).map(|r| r.objective), a, b, step * 1e-4)?;
    let xi = if v < values[best] { xi } else { points[best] };
    let policy = RRPolicy { threshold: xi };
    Ok((policy, eval(xi)?))
}

/// Largest per-process count searched exhaustively when `K = 2`.
pub const AS_EXHAUSTIVE_LIMIT: u32 = 32;

/// Minimizes the weighted sum over trial counts in `{1..=m_max}^K`.
///
/// Exhaustive for `K <= 2` and `m_max <= 32`, coordinate descent from
/// `(1, …, 1)` otherwise. Ties go to the lexicographically smallest vector.
pub fn as_optimize(cfg: &SystemConfig, m_max: u32, estimator: Estimator) -> Result<(ASSchedule, MetricReport)> {
    cfg.validate()?;
    if m_max == 0 {
        return Err(Error::InvalidConfig("m_max must be at least 1".into()));
    }
    let k = cfg.len();
    let eval = |m: &[u32]| as_metrics(cfg, &ASSchedule { m: m.to_vec() }, estimator);
    let best = if k <= 2 && m_max <= AS_EXHAUSTIVE_LIMIT {
        let candidates: Vec<Vec<u32>> = lexicographic(k, m_max);
        let values = candidates
            .par_iter()
            .map(|m| eval(m).map(|r| r.objective))
            .collect::<Result<Vec<_>>>()?;
        let idx = (0..values.len()).fold(0, |b, j| if values[j] < values[b] { j } else { b });
        candidates[idx].clone()
    } else {
        coordinate_descent(k, m_max, |m| eval(m).map(|r| r.objective))?
    };
    let report = eval(&best)?;
    Ok((ASSchedule { m: best }, report))
}

fn lexicographic(k: usize, m_max: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u32>| {
                (1..=m_max).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn coordinate_descent<F>(k: usize, m_max: u32, f: F) -> Result<Vec<u32>>
where
    F: Fn(&[u32]) -> Result<f64> + Sync,
{
    let mut m = vec![1u32; k];
    let mut current = f(&m)?;
    loop {
        let mut improved = false;
        for i in 0..k {
            let values = (1..=m_max)
                .into_par_iter()
                .map(|v| {
                    let mut q = m.clone();
                    q[i] = v;
                    f(&q)
                })
                .collect::<Result<Vec<_>>>()?;
            let j = (0..values.len()).fold(0, |b, j| if values[j] < values[b] { j } else { b });
            let cand = j as u32 + 1;
            let better = values[j] < current || (values[j] == current && cand < m[i]);
            if cand != m[i] && better {
                m[i] = cand;
                current = values[j];
                improved = true;
            }
        }
        if !improved {
            return Ok(m);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProcessSpec, RecoveryFunction, ServiceDistribution};

    fn two(alpha1: f64, alpha2: f64, lam: f64, mean: f64, beta: f64) -> SystemConfig {
        let p = |a| ProcessSpec::new(lam, RecoveryFunction::exponential_decay(a).unwrap(), beta).unwrap();
        SystemConfig::new(vec![p(alpha1), p(alpha2)], ServiceDistribution::exponential(mean).unwrap()).unwrap()
    }

    #[test]
    fn as_closed_form_single_process() {
        let cfg = SystemConfig::single(9.0, 1.0, 1.0, 1.0).unwrap();
        for m in [1, 2, 5] {
            let r = as_metrics(&cfg, &ASSchedule::new(vec![m]).unwrap(), Estimator::Analytic).unwrap();
            assert!((r.processes[0].aoi - 2.011111111111).abs() < 1e-11);
            assert!((r.processes[0].err - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn as_closed_form_matches_simulation() {
        let cfg = two(0.7, 2.0, 3.0, 0.5, 0.5);
        for m in [vec![1, 1], vec![3, 1], vec![2, 4]] {
            let s = ASSchedule::new(m).unwrap();
            let a = as_metrics(&cfg, &s, Estimator::Analytic).unwrap();
            let r = as_metrics(&cfg, &s, Estimator::Simulated { cycles: 200_000, seed: 3 }).unwrap();
            for (x, y) in a.processes.iter().zip(&r.processes) {
                assert!((x.aoi - y.aoi).abs() < 1.5 * y.aoi_half_width.unwrap(), "{x:?} {y:?}");
                assert!((x.err - y.err).abs() < 1.5 * y.err_half_width.unwrap(), "{x:?} {y:?}");
            }
        }
    }

    #[test]
    fn objective_is_weighted_sum() {
        let mut cfg = two(1.0, 2.0, 5.0, 1.0, 0.3);
        cfg.processes[1].weight = 0.8;
        let r = as_metrics(&cfg, &ASSchedule::new(vec![2, 1]).unwrap(), Estimator::Analytic).unwrap();
        let p = &r.processes;
        let expect = 0.3 * p[0].aoi + 0.7 * p[0].err + 0.8 * p[1].aoi + 0.2 * p[1].err;
        assert!((r.objective - expect).abs() < 1e-12);
    }

    #[test]
    fn schedule_validation() {
        assert!(ASSchedule::new(vec![1, 0]).is_err());
        assert!(ASSchedule::ones(2).validate(3).is_err());
        assert!(RRPolicy::new(-0.1).is_err());
    }

    #[test]
    fn rr_analytic_needs_one_process() {
        let cfg = two(1.0, 1.0, 5.0, 1.0, 0.5);
        assert!(matches!(
            rr_metrics(&cfg, &RRPolicy::zero_wait(), Estimator::Analytic),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn rr_optimize_rejects_unequal_weights() {
        let mut cfg = two(1.0, 1.0, 5.0, 1.0, 0.5);
        cfg.processes[1].weight = 0.4;
        let est = Estimator::Simulated { cycles: 100, seed: 1 };
        assert!(matches!(rr_optimize(&cfg, 2.0, 4, est), Err(Error::Unsupported(_))));
    }

    #[test]
    fn rr_optimize_single_matches_weighted_solver() {
        let cfg = SystemConfig::single(9.0, 1.0, 1.0, 0.5).unwrap();
        let (p, _) = rr_optimize(&cfg, 5.0, 50, Estimator::Analytic).unwrap();
        let s = single::solve_weighted(&cfg).unwrap();
        assert!((p.threshold - s.threshold).abs() < 0.1);
    }

    #[test]
    fn lexicographic_order() {
        assert_eq!(lexicographic(2, 2), vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);
    }

    #[test]
    fn symmetric_tie_breaks_low() {
        // identical processes: objective(a, b) = objective(b, a) exactly in closed form
        let cfg = two(0.5, 0.5, 2.0, 1.0, 0.05);
        let (s, _) = as_optimize(&cfg, 6, Estimator::Analytic).unwrap();
        assert!(s.m[0] <= s.m[1]);
        let a = as_metrics(&cfg, &ASSchedule::new(vec![1, 3]).unwrap(), Estimator::Analytic).unwrap();
        let b = as_metrics(&cfg, &ASSchedule::new(vec![3, 1]).unwrap(), Estimator::Analytic).unwrap();
        assert!((a.objective - b.objective).abs() < 1e-12);
    }

    #[test]
    fn coordinate_descent_agrees_with_exhaustive_on_small_grid() {
        let cfg = two(0.1, 0.5, 0.02f64.recip(), 0.02, 0.5);
        let (ex, _) = as_optimize(&cfg, 8, Estimator::Analytic).unwrap();
        let cd = coordinate_descent(2, 8, |m| {
            as_metrics(&cfg, &ASSchedule { m: m.to_vec() }, Estimator::Analytic).map(|r| r.objective)
        })
        .unwrap();
        assert_eq!(ex.m, cd);
    }
}

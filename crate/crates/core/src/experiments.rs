//! Parameter sweeps behind the three trade-off figures, written as CSV with a
//! JSON manifest beside each file.
//!
//! Sweep points run in parallel. Point `i` simulates with seed
//! `derive_seed(master, i)` and rows are emitted in grid order, so output is
//! byte-identical for a given spec whatever the thread count.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{ProcessSpec, RecoveryFunction, ServiceDistribution, SystemConfig};
use crate::multi::{self, Estimator, RRPolicy};
use crate::sim::derive_seed;
use crate::single;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Fig3,
    Fig4,
    Fig5,
    Custom,
}

impl ExperimentKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Fig5 => "fig5",
            Self::Custom => "custom",
        }
    }
}

/// Simulation and search budget of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    /// Cycles per candidate during round-robin threshold search.
    pub cycles: u64,
    /// Cycles of the fresh-seed run that reports the chosen threshold.
    pub confirm_cycles: u64,
    pub xi_max: f64,
    pub rr_grid: usize,
    pub m_max: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            cycles: 100_000,
            confirm_cycles: 1_000_000,
            xi_max: 12.0,
            rr_grid: multi::RR_GRID_DEFAULT,
            m_max: multi::AS_EXHAUSTIVE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: ExperimentKind,
    /// β values, each in `(0, 1]`.
    pub betas: Vec<f64>,
    /// α for one process; α of process 1 for two.
    pub alphas: Vec<f64>,
    pub base: SystemConfig,
    #[serde(default)]
    pub budget: Budget,
    pub seed: u64,
    /// Records how the base service parameter was read; informational.
    #[serde(default)]
    pub service_parameter_is_rate: bool,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// `n` log-spaced points from just above `0.01` up to `1`.
pub fn beta_grid(n: usize) -> Vec<f64> {
    // the lower end 0.01 is excluded, the upper end 1 included
    let (lo, hi) = (0.01f64.ln(), 0.0f64);
    (1..=n).map(|j| (lo + (hi - lo) * j as f64 / n as f64).exp()).collect()
}

pub const BETA_POINTS: usize = 25;
pub const FIG3_ALPHAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const FIG4_ALPHAS: [f64; 6] = [0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
pub const FIG5_ALPHAS: [f64; 7] = [0.1, 0.3, 0.5, 0.6, 0.7, 0.8, 0.9];

fn two_process(rate: f64, alpha2: f64, service_parameter: f64, is_rate: bool, beta: f64) -> Result<SystemConfig> {
    let p = ProcessSpec::new(rate, RecoveryFunction::exponential_decay(alpha2)?, beta)?;
    SystemConfig::new(vec![p, p], ServiceDistribution::exponential_from_parameter(service_parameter, is_rate)?)
}

impl SweepSpec {
    pub fn fig3(seed: u64) -> Result<Self> {
        Ok(Self {
            kind: ExperimentKind::Fig3,
            betas: beta_grid(BETA_POINTS),
            alphas: FIG3_ALPHAS.to_vec(),
            base: SystemConfig::single(9.0, 1.0, 1.0, 1.0)?,
            budget: Budget::default(),
            seed,
            service_parameter_is_rate: false,
            output: None,
        })
    }

    pub fn fig4(seed: u64, service_parameter_is_rate: bool) -> Result<Self> {
        Ok(Self {
            kind: ExperimentKind::Fig4,
            betas: beta_grid(BETA_POINTS),
            alphas: FIG4_ALPHAS.to_vec(),
            base: two_process(6.0, 50.0, 1.5, service_parameter_is_rate, 1.0)?,
            budget: Budget::default(),
            seed,
            service_parameter_is_rate,
            output: None,
        })
    }

    pub fn fig5(seed: u64, service_parameter_is_rate: bool) -> Result<Self> {
        Ok(Self {
            kind: ExperimentKind::Fig5,
            betas: vec![0.5],
            alphas: FIG5_ALPHAS.to_vec(),
            base: two_process(90.0, 0.5, 50.0, service_parameter_is_rate, 0.5)?,
            budget: Budget::default(),
            seed,
            service_parameter_is_rate,
            output: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.betas.is_empty() || self.alphas.is_empty() {
            return Err(Error::InvalidConfig("sweep grids must be non-empty".into()));
        }
        if let Some(&b) = self.betas.iter().find(|&&b| !(b > 0.0 && b <= 1.0)) {
            return Err(Error::InvalidParameter {
                name: "beta",
                value: b,
                reason: "must lie in (0, 1]",
            });
        }
        for &a in &self.alphas {
            RecoveryFunction::exponential_decay(a)?;
        }
        let needs = match self.kind {
            ExperimentKind::Fig3 => Some(1),
            ExperimentKind::Fig4 | ExperimentKind::Fig5 => Some(2),
            ExperimentKind::Custom => None,
        };
        if let Some(k) = needs {
            if self.base.len() != k {
                return Err(Error::InvalidConfig(format!(
                    "{} needs {k} process(es), base has {}",
                    self.kind.file_stem(),
                    self.base.len()
                )));
            }
        }
        if self.budget.cycles == 0 || self.budget.confirm_cycles == 0 || self.budget.m_max == 0 {
            return Err(Error::InvalidConfig("budget entries must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the sweep's JSON encoding.
    pub fn config_hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }

    /// `base` with every process weighted `beta` and process 1's recovery rate set to `alpha`.
    fn point(&self, beta: f64, alpha: f64) -> Result<SystemConfig> {
        let mut cfg = self.base.clone();
        for p in &mut cfg.processes {
            p.weight = beta;
        }
        cfg.processes[0].recovery = RecoveryFunction::exponential_decay(alpha)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fig3Policy {
    Optimal,
    ZeroWait,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig3Row {
    pub policy: Fig3Policy,
    /// Empty for the zero-wait baseline.
    pub beta: Option<f64>,
    pub alpha: f64,
    pub threshold: f64,
    pub aoi: f64,
    pub err: f64,
}

/// Optimal threshold per `(α, β)` followed, per α, by the zero-wait point.
pub fn run_fig3(spec: &SweepSpec) -> Result<Vec<Fig3Row>> {
    spec.validate()?;
    spec.base.sole_process()?;
    let points: Vec<(f64, f64)> = spec
        .alphas
        .iter()
        .flat_map(|&a| spec.betas.iter().map(move |&b| (a, b)))
        .collect();
    let mut rows = points
        .par_iter()
        .map(|&(alpha, beta)| {
            let cfg = spec.point(beta, alpha)?;
            let s = single::solve_weighted(&cfg)?;
            Ok(Fig3Row {
                policy: Fig3Policy::Optimal,
                beta: Some(beta),
                alpha,
                threshold: s.threshold,
                aoi: s.aoi,
                err: s.err,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for &alpha in &spec.alphas {
        let cfg = spec.point(1.0, alpha)?;
        rows.push(Fig3Row {
            policy: Fig3Policy::ZeroWait,
            beta: None,
            alpha,
            threshold: 0.0,
            aoi: single::aoi_of_threshold(&cfg, 0.0)?,
            err: single::error_of_threshold(&cfg, 0.0)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fig4Policy {
    Rr,
    As,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig4Row {
    pub beta: f64,
    pub alpha1: f64,
    pub policy: Fig4Policy,
    /// ξ* for round robin, empty for the asymmetric schedule.
    pub threshold: Option<f64>,
    pub m1: Option<u32>,
    pub m2: Option<u32>,
    pub sum_aoi: f64,
    pub sum_err: f64,
    pub objective: f64,
    /// 95% half-width of the objective; empty when exact.
    pub objective_half_width: Option<f64>,
}

/// Round robin (simulated) against the asymmetric schedule (closed form) per `(α₁, β)`.
pub fn run_fig4(spec: &SweepSpec) -> Result<Vec<Fig4Row>> {
    spec.validate()?;
    let points: Vec<(f64, f64)> = spec
        .alphas
        .iter()
        .flat_map(|&a| spec.betas.iter().map(move |&b| (a, b)))
        .collect();
    let b = spec.budget;
    let pairs = points
        .par_iter()
        .enumerate()
        .map(|(i, &(alpha, beta))| {
            let cfg = spec.point(beta, alpha)?;
            let seed = derive_seed(spec.seed, 2 * i as u64);
            let est = Estimator::Simulated { cycles: b.cycles, seed };
            let (policy, _) = multi::rr_optimize(&cfg, b.xi_max, b.rr_grid, est)?;
            // a fresh seed keeps the reported value free of selection bias
            let confirm = Estimator::Simulated {
                cycles: b.confirm_cycles,
                seed: derive_seed(spec.seed, 2 * i as u64 + 1),
            };
            let rr = multi::rr_metrics(&cfg, &RRPolicy { threshold: policy.threshold }, confirm)?;
            let (sched, asr) = multi::as_optimize(&cfg, b.m_max, Estimator::Analytic)?;
            let row = |policy, threshold, m: Option<&[u32]>, r: &multi::MetricReport| Fig4Row {
                beta,
                alpha1: alpha,
                policy,
                threshold,
                m1: m.map(|m| m[0]),
                m2: m.map(|m| m[1]),
                sum_aoi: r.sum_aoi(),
                sum_err: r.sum_err(),
                objective: beta * r.sum_aoi() + (1.0 - beta) * r.sum_err(),
                objective_half_width: r.objective_half_width,
            };
            Ok([
                row(Fig4Policy::Rr, Some(policy.threshold), None, &rr),
                row(Fig4Policy::As, None, Some(&sched.m), &asr),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fig5Row {
    pub alpha1: f64,
    pub m1: u32,
    pub m2: u32,
    pub objective: f64,
}

/// Optimal trial counts per α₁ at the sweep's single β, in closed form.
pub fn run_fig5(spec: &SweepSpec) -> Result<Vec<Fig5Row>> {
    spec.validate()?;
    let beta = match spec.betas.as_slice() {
        [b] => *b,
        _ => return Err(Error::InvalidConfig("fig5 takes exactly one beta".into())),
    };
    spec.alphas
        .par_iter()
        .map(|&alpha| {
            let cfg = spec.point(beta, alpha)?;
            let (s, r) = multi::as_optimize(&cfg, spec.budget.m_max, Estimator::Analytic)?;
            Ok(Fig5Row {
                alpha1: alpha,
                m1: s.m[0],
                m2: s.m[1],
                objective: r.objective,
            })
        })
        .collect()
}

pub fn write_csv<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentKind,
    pub csv: String,
    pub rows: usize,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub spec: SweepSpec,
}

/// Paths written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Written {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub rows: usize,
}

/// Runs the sweep named by `spec.kind` and writes `<stem>.csv` and
/// `<stem>.manifest.json` into `dir`, creating it if needed.
pub fn run_experiment(spec: &SweepSpec, dir: &Path) -> Result<Written> {
    let mut buf = Vec::new();
    let rows = match spec.kind {
        ExperimentKind::Fig3 => {
            let r = run_fig3(spec)?;
            write_csv(&mut buf, &r)?;
            r.len()
        }
        ExperimentKind::Fig4 => {
            let r = run_fig4(spec)?;
            write_csv(&mut buf, &r)?;
            r.len()
        }
        ExperimentKind::Fig5 => {
            let r = run_fig5(spec)?;
            write_csv(&mut buf, &r)?;
            r.len()
        }
        ExperimentKind::Custom => {
            // one process: the single-process trade-off; several: the policy comparison
            if spec.base.len() == 1 {
                let r = run_fig3(spec)?;
                write_csv(&mut buf, &r)?;
                r.len()
            } else {
                let r = run_fig4(spec)?;
                write_csv(&mut buf, &r)?;
                r.len()
            }
        }
    };
    fs::create_dir_all(dir)?;
    let stem = spec.kind.file_stem();
    let csv = dir.join(format!("{stem}.csv"));
    let manifest = dir.join(format!("{stem}.manifest.json"));
    fs::write(&csv, &buf)?;
    let m = Manifest {
        experiment: spec.kind,
        csv: format!("{stem}.csv"),
        rows,
        seed: spec.seed,
        config_hash: spec.config_hash()?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
    };
    fs::write(&manifest, serde_json::to_vec_pretty(&m)?)?;
    Ok(Written { csv, manifest, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_grid_shape() {
        let g = beta_grid(25);
        assert_eq!(g.len(), 25);
        assert!(g[0] > 0.01);
        assert!((g[24] - 1.0).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        let ratios: Vec<f64> = g.windows(2).map(|w| w[1] / w[0]).collect();
        assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-12));
    }

    #[test]
    fn fig5_reading_changes_service() {
        let a = SweepSpec::fig5(1, false).unwrap();
        let b = SweepSpec::fig5(1, true).unwrap();
        assert_eq!(a.base.service.mean(), 50.0);
        assert_eq!(b.base.service.mean(), 0.02);
    }

    #[test]
    fn validation() {
        let mut s = SweepSpec::fig3(0).unwrap();
        s.betas.push(0.0);
        assert!(s.validate().is_err());
        let mut s = SweepSpec::fig3(0).unwrap();
        s.alphas.clear();
        assert!(s.validate().is_err());
        let mut s = SweepSpec::fig4(0, false).unwrap();
        s.base.processes.pop();
        assert!(s.validate().is_err());
    }

    #[test]
    fn spec_json_rejects_unknown_keys() {
        let s = SweepSpec::fig3(3).unwrap();
        let mut v: serde_json::Value = serde_json::to_value(&s).unwrap();
        v["bogus"] = serde_json::json!(1);
        assert!(serde_json::from_value::<SweepSpec>(v).is_err());
        let back: SweepSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn fig3_rows_and_baselines() {
        let mut s = SweepSpec::fig3(0).unwrap();
        s.betas = vec![0.2, 1.0];
        let rows = run_fig3(&s).unwrap();
        assert_eq!(rows.len(), 3 * 2 + 3);
        assert!(rows[6..].iter().all(|r| r.policy == Fig3Policy::ZeroWait && r.beta.is_none()));
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("policy,beta,alpha,threshold,aoi,err\n"));
        assert!(text.contains("zero_wait,,0.5,0.0,"));
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = SweepSpec::fig5(1, false).unwrap();
        let mut b = a.clone();
        assert_eq!(a.config_hash().unwrap(), b.config_hash().unwrap());
        b.seed = 2;
        assert_ne!(a.config_hash().unwrap(), b.config_hash().unwrap());
        assert_eq!(a.config_hash().unwrap().len(), 64);
    }
}

//! Model primitives: service law, recovery function, process and system configuration.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonneg, ensure_positive, Error, Result};
use crate::numeric;

/// Absolute tolerance of [`RecoveryFunction::h_gamma_inverse`].
pub const H_GAMMA_INVERSE_TOL: f64 = 1e-10;

/// Channel busy-time law `Y`.
///
/// Only the exponential law ships. Anything else would have to supply the
/// same surface: moments, pdf, cdf, Laplace transform and a sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceDistribution {
    Exponential { mean: f64 },
}

impl ServiceDistribution {
    pub fn exponential(mean: f64) -> Result<Self> {
        ensure_positive("service mean", mean)?;
        Ok(Self::Exponential { mean })
    }

    /// Builds the exponential law from a single parameter that is either its
    /// mean or its rate.
    pub fn exponential_from_parameter(value: f64, is_rate: bool) -> Result<Self> {
        ensure_positive("service parameter", value)?;
        Self::exponential(if is_rate { 1.0 / value } else { value })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Exponential { mean } => ensure_positive("service mean", mean).map(|_| ()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { mean } => mean,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            Self::Exponential { mean } => 2.0 * mean * mean,
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match *self {
            Self::Exponential { mean } => {
                if y < 0.0 {
                    0.0
                } else {
                    (-y / mean).exp() / mean
                }
            }
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            Self::Exponential { mean } => {
                if y <= 0.0 {
                    0.0
                } else {
                    -(-y / mean).exp_m1()
                }
            }
        }
    }

    /// `E[exp(-s Y)]` for `s >= 0`.
    pub fn laplace(&self, s: f64) -> f64 {
        match *self {
            Self::Exponential { mean } => 1.0 / (1.0 + s * mean),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Exponential { mean } => mean * rng.sample::<f64, _>(Exp1),
        }
    }
}

/// Time-stamp error variance as a function of the server's sleep before a sample.
///
/// Must be non-increasing and convex on `[0, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RecoveryFunction {
    /// `h(x) = exp(-rate * x)`.
    ExponentialDecay { rate: f64 },
}

impl RecoveryFunction {
    pub fn exponential_decay(rate: f64) -> Result<Self> {
        ensure_nonneg("recovery rate", rate)?;
        if !rate.is_finite() {
            return Err(Error::InvalidParameter {
                name: "recovery rate",
                value: rate,
                reason: "must be finite",
            });
        }
        Ok(Self::ExponentialDecay { rate })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::ExponentialDecay { rate } => Self::exponential_decay(rate).map(|_| ()),
        }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            Self::ExponentialDecay { rate } => rate,
        }
    }

    /// `h(x)`; rejects negative `x`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        ensure_nonneg("x", x)?;
        Ok(self.value(x))
    }

    /// Unchecked `h(x)` for hot loops; callers guarantee `x >= 0`.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Self::ExponentialDecay { rate } => (-rate * x).exp(),
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::ExponentialDecay { rate } => -rate * (-rate * x).exp(),
        }
    }

    /// `lim_{x→∞} h(x)`: the smallest error any amount of sleep can reach.
    pub fn infimum(&self) -> f64 {
        match *self {
            Self::ExponentialDecay { rate } if rate > 0.0 => 0.0,
            Self::ExponentialDecay { .. } => 1.0,
        }
    }

    /// `E[h(Y)]` for `Y` drawn from `service`.
    pub fn expect_over(&self, service: &ServiceDistribution) -> f64 {
        match *self {
            Self::ExponentialDecay { rate } => service.laplace(rate),
        }
    }

    /// `H_γ(x) = x + γ h'(x)`, strictly increasing in `x` for `γ >= 0`.
    pub fn h_gamma(&self, gamma: f64, x: f64) -> Result<f64> {
        ensure_nonneg("gamma", gamma)?;
        Ok(x + gamma * self.derivative(x))
    }

    /// The `x >= 0` with `H_γ(x) = target`, or `0` when `target <= H_γ(0)`.
    pub fn h_gamma_inverse(&self, gamma: f64, target: f64) -> Result<f64> {
        let at_zero = self.h_gamma(gamma, 0.0)?;
        if target.is_nan() {
            return Err(Error::InvalidParameter {
                name: "target",
                value: target,
                reason: "must be a number",
            });
        }
        if target <= at_zero {
            return Ok(0.0);
        }
        let h = |x: f64| x + gamma * self.derivative(x) - target;
        let hi = numeric::expand_upper(1.0, 2.0, |x| h(x) >= 0.0)?;
        let r = numeric::bisect(|x| Ok(h(x)), 0.0, hi, H_GAMMA_INVERSE_TOL, |_| 0.0)?;
        Ok(r.x)
    }
}

/// Per-process parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSpec {
    /// Poisson sampling rate λ.
    pub rate: f64,
    pub recovery: RecoveryFunction,
    /// Weight β on AoI; `1 - β` goes to the time-stamp error.
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

impl ProcessSpec {
    pub fn new(rate: f64, recovery: RecoveryFunction, weight: f64) -> Result<Self> {
        let p = Self { rate, recovery, weight };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("sampling rate", self.rate)?;
        self.recovery.validate()?;
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::InvalidParameter {
                name: "weight",
                value: self.weight,
                reason: "must lie in [0, 1]",
            });
        }
        Ok(())
    }

    pub fn mean_interarrival(&self) -> f64 {
        1.0 / self.rate
    }
}

/// Processes sharing one channel, plus an optional credibility bound τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub processes: Vec<ProcessSpec>,
    pub service: ServiceDistribution,
    #[serde(default)]
    pub credibility_bound: Option<f64>,
}

impl SystemConfig {
    pub fn new(processes: Vec<ProcessSpec>, service: ServiceDistribution) -> Result<Self> {
        let cfg = Self {
            processes,
            service,
            credibility_bound: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Single process with exponential recovery and exponential service.
    pub fn single(rate: f64, service_mean: f64, recovery_rate: f64, weight: f64) -> Result<Self> {
        Self::new(
            vec![ProcessSpec::new(
                rate,
                RecoveryFunction::exponential_decay(recovery_rate)?,
                weight,
            )?],
            ServiceDistribution::exponential(service_mean)?,
        )
    }

    pub fn with_credibility_bound(mut self, tau: Option<f64>) -> Self {
        self.credibility_bound = tau;
        self
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        for p in &mut self.processes {
            p.weight = weight;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.processes.is_empty() {
            return Err(Error::InvalidConfig("at least one process is required".into()));
        }
        for p in &self.processes {
            p.validate()?;
        }
        self.service.validate()?;
        if let Some(tau) = self.credibility_bound {
            ensure_nonneg("credibility bound", tau)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.processes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.processes.is_empty()
    }

    pub fn weights_equal(&self) -> bool {
        let w0 = self.processes[0].weight;
        self.processes.iter().all(|p| p.weight == w0)
    }

    /// The single process of a `K = 1` configuration.
    pub fn sole_process(&self) -> Result<&ProcessSpec> {
        match self.processes.as_slice() {
            [p] => Ok(p),
            _ => Err(Error::InvalidConfig(format!(
                "expected exactly one process, found {}",
                self.processes.len()
            ))),
        }
    }
}

/// Wait `[ξ - y]^+` after a service of length `y`; `ξ = 0` is zero-wait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub threshold: f64,
}

impl ThresholdPolicy {
    pub fn new(threshold: f64) -> Result<Self> {
        ensure_nonneg("threshold", threshold)?;
        Ok(Self { threshold })
    }

    pub fn zero_wait() -> Self {
        Self { threshold: 0.0 }
    }

    #[inline]
    pub fn wait_after(&self, y: f64) -> f64 {
        (self.threshold - y).max(0.0)
    }
}

/// `h(x)` with the argument checked.
pub fn h_eval(rf: &RecoveryFunction, x: f64) -> Result<f64> {
    rf.eval(x)
}

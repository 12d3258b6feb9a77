//! Single-process threshold solver.
//!
//! The long-term average AoI of a stationary threshold policy `ω(y) = [ξ - y]^+`
//! is a ratio of expectations. Minimizing it under a credibility bound
//! `E[h(max(Y, ξ))] <= τ` goes through the Dinkelbach parametrization
//! `p(θ) = min_ξ N(ξ) - θ D(ξ)`, whose root is the optimal AoI. For fixed θ the
//! minimizer is the threshold `max(0, θ - 1/λ - μ_Y)`, pushed up to the
//! smallest credible threshold when the bound binds.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonneg, Error, Result};
use crate::model::{ProcessSpec, RecoveryFunction, ServiceDistribution, SystemConfig};
use crate::numeric;

/// Quadrature tolerance for the expectation routes.
pub const QUAD_TOL: f64 = 1e-10;
/// `|e(ξ) - τ|` at which the credibility bisection stops.
pub const CREDIBILITY_ERR_TOL: f64 = 1e-9;
/// Bracket width at which any threshold bisection stops.
pub const THRESHOLD_BRACKET_TOL: f64 = 1e-10;
/// Relative `|p(θ)|` at which the outer Dinkelbach bisection stops.
pub const DINKELBACH_P_TOL: f64 = 1e-8;
pub const THETA_BRACKET_TOL: f64 = 1e-10;
/// Threshold tolerance of the weighted line search.
pub const LINE_SEARCH_TOL: f64 = 1e-8;
const LINE_SEARCH_CELLS: usize = 64;

/// Expectations of the wait `ω(Y) = [ξ - Y]^+` that enter the AoI ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaitMoments {
    /// `E[ω(Y)]`
    pub wait: f64,
    /// `E[ω(Y)^2]`
    pub wait_sq: f64,
    /// `E[Y ω(Y)]`
    pub service_wait: f64,
}

impl WaitMoments {
    /// Closed forms for the exponential service law.
    pub fn closed_form(service: &ServiceDistribution, xi: f64) -> Self {
        match *service {
            ServiceDistribution::Exponential { mean: mu } => {
                if xi == 0.0 {
                    return Self { wait: 0.0, wait_sq: 0.0, service_wait: 0.0 };
                }
                let tail = (-xi / mu).exp();
                Self {
                    wait: xi + mu * (-xi / mu).exp_m1(),
                    wait_sq: xi * xi - 2.0 * mu * xi + 2.0 * mu * mu * (1.0 - tail),
                    service_wait: xi * mu - 2.0 * mu * mu + (mu * xi + 2.0 * mu * mu) * tail,
                }
            }
        }
    }

    /// The same expectations by adaptive quadrature against the pdf on `[0, ξ]`.
    pub fn by_quadrature(service: &ServiceDistribution, xi: f64) -> Result<Self> {
        let f = |g: &dyn Fn(f64) -> f64| numeric::integrate(|y| g(y) * service.pdf(y), 0.0, xi, QUAD_TOL);
        Ok(Self {
            wait: f(&|y| xi - y)?,
            wait_sq: f(&|y| (xi - y) * (xi - y))?,
            service_wait: f(&|y| y * (xi - y))?,
        })
    }
}

/// Numerator and denominator of the AoI ratio at threshold ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoiRatio {
    /// `E[Y_{i-1} L_i] + E[L_i^2] / 2`
    pub numerator: f64,
    /// `E[L_i]`
    pub denominator: f64,
}

impl AoiRatio {
    pub fn from_moments(process: &ProcessSpec, service: &ServiceDistribution, m: WaitMoments) -> Self {
        let inv_lambda = process.mean_interarrival();
        let mu = service.mean();
        let cycle = inv_lambda + mu;
        // E[(X + Y)^2] with X ~ exp(λ) independent of Y
        let fresh_sq = 2.0 * inv_lambda * inv_lambda + 2.0 * mu * inv_lambda + service.second_moment();
        Self {
            numerator: m.service_wait + mu * cycle + 0.5 * (m.wait_sq + 2.0 * m.wait * cycle + fresh_sq),
            denominator: m.wait + cycle,
        }
    }

    pub fn value(&self) -> f64 {
        self.numerator / self.denominator
    }

    /// Dinkelbach objective `N - θ D`.
    pub fn parametric(&self, theta: f64) -> f64 {
        self.numerator - theta * self.denominator
    }
}

fn sole(cfg: &SystemConfig) -> Result<&ProcessSpec> {
    cfg.validate()?;
    cfg.sole_process()
}

pub fn aoi_ratio(cfg: &SystemConfig, xi: f64) -> Result<AoiRatio> {
    let p = sole(cfg)?;
    ensure_nonneg("threshold", xi)?;
    Ok(AoiRatio::from_moments(p, &cfg.service, WaitMoments::closed_form(&cfg.service, xi)))
}

/// Long-term average AoI of the threshold policy with threshold ξ.
pub fn aoi_of_threshold(cfg: &SystemConfig, xi: f64) -> Result<f64> {
    Ok(aoi_ratio(cfg, xi)?.value())
}

/// Same quantity through quadrature of the wait moments.
pub fn aoi_of_threshold_by_quadrature(cfg: &SystemConfig, xi: f64) -> Result<f64> {
    let p = sole(cfg)?;
    ensure_nonneg("threshold", xi)?;
    let m = WaitMoments::by_quadrature(&cfg.service, xi)?;
    Ok(AoiRatio::from_moments(p, &cfg.service, m).value())
}

/// `E[h(max(Y, ξ))]`: the sleep before a sample is `Y + [ξ - Y]^+`.
pub fn expected_error(rf: &RecoveryFunction, service: &ServiceDistribution, xi: f64) -> f64 {
    match (*rf, *service) {
        (RecoveryFunction::ExponentialDecay { rate: a }, ServiceDistribution::Exponential { mean: mu }) => {
            if xi == 0.0 {
                return rf.expect_over(service);
            }
            (-a * xi).exp() * -(-xi / mu).exp_m1() + (-(a + 1.0 / mu) * xi).exp() / (1.0 + a * mu)
        }
    }
}

/// `E[h(max(Y, ξ))]` by quadrature: `h(ξ) F(ξ)` plus the tail integral over `[ξ, ∞)`.
pub fn expected_error_by_quadrature(rf: &RecoveryFunction, service: &ServiceDistribution, xi: f64) -> Result<f64> {
    let tail = numeric::integrate_to_infinity(|y| rf.value(y) * service.pdf(y), xi, QUAD_TOL)?;
    Ok(rf.value(xi) * service.cdf(xi) + tail)
}

/// Long-term average time-stamp error of the threshold policy with threshold ξ.
pub fn error_of_threshold(cfg: &SystemConfig, xi: f64) -> Result<f64> {
    let p = sole(cfg)?;
    ensure_nonneg("threshold", xi)?;
    Ok(expected_error(&p.recovery, &cfg.service, xi))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::Infeasible {
            tau,
            reason: "the error only reaches zero in the limit of unbounded waiting".into(),
        });
    }
    Ok(())
}

/// Smallest threshold whose long-term error is at most τ.
pub fn solve_threshold_for_credibility(cfg: &SystemConfig, tau: f64) -> Result<f64> {
    let p = sole(cfg)?;
    check_tau(tau)?;
    let err = |xi: f64| expected_error(&p.recovery, &cfg.service, xi);
    if err(0.0) <= tau {
        return Ok(0.0);
    }
    if tau <= p.recovery.infimum() {
        return Err(Error::Infeasible {
            tau,
            reason: format!("no threshold brings the error below {}", p.recovery.infimum()),
        });
    }
    let hi = numeric::expand_upper(1.0, 2.0, |xi| err(xi) <= tau)?;
    let r = numeric::bisect(
        |xi| Ok(err(xi) - tau),
        0.0,
        hi,
        THRESHOLD_BRACKET_TOL,
        |_| CREDIBILITY_ERR_TOL,
    )?;
    // the bracket upper end is always credible
    Ok(if err(r.x) <= tau + CREDIBILITY_ERR_TOL { r.x } else { r.hi })
}

/// `p(θ)` together with the threshold that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachValue {
    pub value: f64,
    pub threshold: f64,
    /// The credibility bound forced the threshold above `θ - 1/λ - μ_Y`.
    pub binding: bool,
}

fn credible_floor(cfg: &SystemConfig, tau: Option<f64>) -> Result<f64> {
    match tau {
        Some(t) if t.is_finite() => solve_threshold_for_credibility(cfg, t),
        Some(t) if t.is_nan() => Err(Error::Infeasible { tau: t, reason: "not a number".into() }),
        _ => Ok(0.0),
    }
}

/// The Dinkelbach auxiliary problem `p(θ)`. `tau = None` (or `∞`) drops the bound.
pub fn dinkelbach_p(cfg: &SystemConfig, tau: Option<f64>, theta: f64) -> Result<DinkelbachValue> {
    let floor = credible_floor(cfg, tau)?;
    dinkelbach_with_floor(cfg, floor, theta)
}

fn dinkelbach_with_floor(cfg: &SystemConfig, floor: f64, theta: f64) -> Result<DinkelbachValue> {
    let p = sole(cfg)?;
    let unconstrained = (theta - p.mean_interarrival() - cfg.service.mean()).max(0.0);
    // error is non-increasing in ξ, so the bound is the half-line ξ >= floor
    let binding = unconstrained < floor;
    let threshold = if binding { floor } else { unconstrained };
    let value = aoi_ratio(cfg, threshold)?.parametric(theta);
    Ok(DinkelbachValue { value, threshold, binding })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Dinkelbach,
    LineSearch,
}

/// Optimal threshold policy for one process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleSolution {
    /// Optimal long-term average AoI (root of `p`); for the weighted form, the achieved AoI.
    pub theta_star: f64,
    pub threshold: f64,
    /// Whether the credibility bound is active (positive multiplier).
    pub constraint_binding: bool,
    pub aoi: f64,
    pub err: f64,
    /// `aoi` for the constrained form, `aoi + (1 - β)/β · err` for the weighted form.
    pub objective: f64,
    pub method: SolveMethod,
}

/// Minimizes AoI subject to `error <= τ` (`None` = unconstrained).
pub fn solve_single(cfg: &SystemConfig, tau: Option<f64>) -> Result<SingleSolution> {
    let p = sole(cfg)?;
    let floor = credible_floor(cfg, tau)?;
    let pf = |theta: f64| dinkelbach_with_floor(cfg, floor, theta);

    // the credible floor is a feasible policy, so its AoI bounds θ* from above
    let mut upper = aoi_of_threshold(cfg, floor)?;
    upper = numeric::expand_upper(upper, 2.0, |th| pf(th).map(|v| v.value < 0.0).unwrap_or(false))?;
    let lower = cfg.service.mean().max(0.0);
    let root = numeric::bisect(
        |th| pf(th).map(|v| v.value),
        lower,
        upper,
        THETA_BRACKET_TOL,
        |th| DINKELBACH_P_TOL * (1.0 + th),
    )?;
    let theta = root.x;
    let at = pf(theta)?;
    let aoi = aoi_of_threshold(cfg, at.threshold)?;
    let err = expected_error(&p.recovery, &cfg.service, at.threshold);
    Ok(SingleSolution {
        theta_star: theta,
        threshold: at.threshold,
        constraint_binding: at.binding,
        aoi,
        err,
        objective: aoi,
        method: SolveMethod::Dinkelbach,
    })
}

/// `(1 - β) / β`, rejecting β outside `(0, 1]`.
pub fn error_weight(beta: f64) -> Result<f64> {
    if beta == 0.0 {
        return Err(Error::UnboundedWait);
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "must lie in (0, 1]",
        });
    }
    Ok((1.0 - beta) / beta)
}

/// Minimizes `AoI + (1 - β)/β · error` over the threshold by line search,
/// with β taken from the process weight.
pub fn solve_weighted(cfg: &SystemConfig) -> Result<SingleSolution> {
    let p = sole(cfg)?;
    let w = error_weight(p.weight)?;
    let objective = |xi: f64| -> Result<f64> {
        Ok(aoi_of_threshold(cfg, xi)? + w * expected_error(&p.recovery, &cfg.service, xi))
    };
    // AoI grows linearly in ξ while the error term is bounded, so doubling terminates
    let mut hi = 1.0;
    let mut f_hi = objective(hi)?;
    for _ in 0..200 {
        let f_next = objective(2.0 * hi)?;
        if f_next >= f_hi {
            break;
        }
        hi *= 2.0;
        f_hi = f_next;
    }
    let (xi, obj) = numeric::scan_then_golden(objective, 0.0, 2.0 * hi, LINE_SEARCH_CELLS, LINE_SEARCH_TOL)?;
    let aoi = aoi_of_threshold(cfg, xi)?;
    Ok(SingleSolution {
        theta_star: aoi,
        threshold: xi,
        constraint_binding: false,
        aoi,
        err: expected_error(&p.recovery, &cfg.service, xi),
        objective: obj,
        method: SolveMethod::LineSearch,
    })
}

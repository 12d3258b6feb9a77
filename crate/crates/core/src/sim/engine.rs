//! Epoch-recursive simulation.
//!
//! The channel serves one scheduled sample at a time, so no event queue is
//! needed: a cycle is a fixed sequence of slots, and each slot wakes its
//! sensor, waits for a fresh sample, and serves it. One slot per cycle may
//! first sleep `[ξ - (sum of the last cycle's service times)]^+`.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::sim::rng::ProcessStreams;
use crate::sim::stats::{batch_count, ProcessBatches};

/// Cycles discarded before recording. Two cycles make every recorded epoch
/// (and the noise on its starting age) stationary.
pub const BURN_IN_CYCLES: u64 = 2;

/// Law of the time-stamp noise `S' - S`: zero mean, variance `h(sleep)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    #[default]
    Gaussian,
    /// Uniform on `[-sqrt(3 v), sqrt(3 v)]`.
    Uniform,
    /// Forces the variance to zero: `S' = S`.
    Zero,
}

impl NoiseModel {
    #[inline]
    pub(crate) fn draw<R: Rng + ?Sized>(self, rng: &mut R, variance: f64) -> f64 {
        match self {
            NoiseModel::Gaussian => variance.sqrt() * rng.sample::<f64, _>(StandardNormal),
            NoiseModel::Uniform => (3.0 * variance).sqrt() * rng.random_range(-1.0..1.0),
            NoiseModel::Zero => 0.0,
        }
    }

    pub(crate) fn variance(self, h: f64) -> f64 {
        match self {
            NoiseModel::Zero => 0.0,
            _ => h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimOptions {
    pub noise: NoiseModel,
    /// Keep every recorded delivery as an [`EpochRecord`].
    pub trace: bool,
}

/// One delivered sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub process: usize,
    /// Per-process delivery index, starting at 1 after burn-in.
    pub i: u64,
    /// True sample (arrival) time.
    pub s: f64,
    /// Received time stamp.
    pub s_prime: f64,
    pub d: f64,
    pub y: f64,
    pub x: f64,
    /// Sleep before the sensor woke for this sample.
    pub w: f64,
    /// `d` minus the previous delivery of the same process.
    pub l: f64,
    /// Age at the previous delivery: `D_prev - S'_prev`.
    pub start_age: f64,
}

/// Ordered slots of one cycle, plus where the threshold wait sits.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePlan {
    pub slots: Vec<usize>,
    pub wait_slot: usize,
    pub threshold: f64,
}

impl CyclePlan {
    pub fn single(threshold: f64) -> Self {
        Self::round_robin(1, threshold)
    }

    /// Processes `0..k` once each, waiting before process 0.
    pub fn round_robin(k: usize, threshold: f64) -> Self {
        Self {
            slots: (0..k).collect(),
            wait_slot: 0,
            threshold,
        }
    }

    /// Bursts of `m[k]` back-to-back trials per process, no waiting.
    pub fn asymmetric(m: &[u32]) -> Self {
        Self {
            slots: m
                .iter()
                .enumerate()
                .flat_map(|(k, &n)| std::iter::repeat_n(k, n as usize))
                .collect(),
            wait_slot: 0,
            threshold: 0.0,
        }
    }

    pub fn with_wait_slot(mut self, slot: usize) -> Self {
        self.wait_slot = slot;
        self
    }

    pub fn validate(&self, processes: usize) -> Result<()> {
        if self.slots.is_empty() {
            return Err(Error::InvalidConfig("cycle plan has no slots".into()));
        }
        if let Some(&k) = self.slots.iter().find(|&&k| k >= processes) {
            return Err(Error::InvalidConfig(format!("slot refers to process {k} of {processes}")));
        }
        if (0..processes).any(|k| !self.slots.contains(&k)) {
            return Err(Error::InvalidConfig("every process needs at least one slot".into()));
        }
        if self.wait_slot >= self.slots.len() {
            return Err(Error::InvalidConfig("wait slot out of range".into()));
        }
        if !(self.threshold >= 0.0) || !self.threshold.is_finite() {
            return Err(Error::InvalidParameter {
                name: "threshold",
                value: self.threshold,
                reason: "must be nonnegative and finite",
            });
        }
        Ok(())
    }
}

/// Raw outcome of a simulation: batch tables per process and an optional trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub tables: Vec<ProcessBatches>,
    pub cycles: u64,
    pub seed: u64,
    pub trace: Option<Vec<EpochRecord>>,
}

#[derive(Debug, Clone, Copy)]
struct ProcessState {
    arrival: f64,
    stamp: f64,
    delivery: f64,
    seen: bool,
    delivered: u64,
}

pub fn simulate_plan(
    cfg: &SystemConfig,
    plan: &CyclePlan,
    cycles: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<SimRun> {
    cfg.validate()?;
    plan.validate(cfg.len())?;
    if cycles == 0 {
        return Err(Error::InvalidConfig("simulation needs at least one cycle".into()));
    }
    let k = cfg.len();
    let nb = batch_count(cycles);
    let mut tables = vec![ProcessBatches::new(nb); k];
    let mut streams: Vec<ProcessStreams> = (0..k).map(|p| ProcessStreams::new(seed, p)).collect();
    let mut state = vec![
        ProcessState {
            arrival: 0.0,
            stamp: 0.0,
            delivery: 0.0,
            seen: false,
            delivered: 0,
        };
        k
    ];
    let n_slots = plan.slots.len();
    let mut recent = vec![0.0f64; n_slots];
    let mut recent_pos = 0;
    let mut trace = opts.trace.then(Vec::new);
    let mut now = 0.0f64;

    for cycle in 0..BURN_IN_CYCLES + cycles {
        let recorded = cycle.checked_sub(BURN_IN_CYCLES);
        let batch = recorded.map(|c| (c as u128 * nb as u128 / cycles as u128) as usize);
        for (j, &p) in plan.slots.iter().enumerate() {
            let spec = &cfg.processes[p];
            let wait = if j == plan.wait_slot && plan.threshold > 0.0 {
                (plan.threshold - recent.iter().sum::<f64>()).max(0.0)
            } else {
                0.0
            };
            let wake = now + wait;
            let rng = &mut streams[p];
            let x = rng.sampling.sample::<f64, _>(Exp1) / spec.rate;
            let y = cfg.service.sample(&mut rng.service);
            let s = wake + x;
            let d = s + y;
            let st = &mut state[p];
            let sleep = if st.seen { wake - st.arrival } else { wake };
            let h = spec.recovery.value(sleep);
            let variance = opts.noise.variance(h);
            let dev = opts.noise.draw(&mut rng.noise, variance);
            let s_prime = s + dev;

            if let (Some(b), true) = (batch, st.seen) {
                let l = d - st.delivery;
                let start_age = st.delivery - st.stamp;
                let sums = &mut tables[p].batches[b];
                sums.area += start_age * l + 0.5 * l * l;
                sums.length += l;
                sums.count += 1;
                sums.var_sum += variance;
                sums.sq_err += dev * dev;
                sums.stamp_dev += dev;
                st.delivered += 1;
                if let Some(tr) = trace.as_mut() {
                    tr.push(EpochRecord {
                        process: p,
                        i: st.delivered,
                        s,
                        s_prime,
                        d,
                        y,
                        x,
                        w: wait,
                        l,
                        start_age,
                    });
                }
            }
            st.arrival = s;
            st.stamp = s_prime;
            st.delivery = d;
            st.seen = true;
            recent[recent_pos] = y;
            recent_pos = (recent_pos + 1) % n_slots;
            now = d;
        }
    }
    Ok(SimRun {
        tables,
        cycles,
        seed,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> SystemConfig {
        let mut c = SystemConfig::single(6.0, 1.5, 2.0, 0.5).unwrap();
        c.processes.push(c.processes[0]);
        c
    }

    #[test]
    fn plan_shapes() {
        assert_eq!(CyclePlan::asymmetric(&[2, 1, 3]).slots, vec![0, 0, 1, 2, 2, 2]);
        assert_eq!(CyclePlan::round_robin(3, 1.0).slots, vec![0, 1, 2]);
        assert!(CyclePlan::asymmetric(&[1, 0]).validate(2).is_err());
        assert!(CyclePlan::round_robin(2, 0.0).with_wait_slot(2).validate(2).is_err());
        assert!(CyclePlan::round_robin(2, -1.0).validate(2).is_err());
        assert!(CyclePlan::round_robin(3, 0.0).validate(2).is_err());
    }

    #[test]
    fn zero_cycles_rejected() {
        let c = SystemConfig::single(9.0, 1.0, 1.0, 1.0).unwrap();
        assert!(simulate_plan(&c, &CyclePlan::single(0.0), 0, 1, SimOptions::default()).is_err());
    }

    #[test]
    fn trace_invariants() {
        let opts = SimOptions {
            trace: true,
            ..Default::default()
        };
        let run = simulate_plan(&two(), &CyclePlan::round_robin(2, 3.0), 500, 9, opts).unwrap();
        let tr = run.trace.unwrap();
        assert_eq!(tr.len(), 1000);
        let mut prev: [Option<EpochRecord>; 2] = [None, None];
        for r in &tr {
            assert!((r.d - (r.s + r.y)).abs() < 1e-9);
            assert!(r.l > 0.0 && r.w >= 0.0);
            if r.process == 1 {
                assert_eq!(r.w, 0.0);
            }
            if let Some(p) = prev[r.process] {
                assert!((r.start_age - (p.y + p.s - p.s_prime)).abs() < 1e-9);
                assert!((r.l - (r.d - p.d)).abs() < 1e-9);
                assert_eq!(r.i, p.i + 1);
            }
            prev[r.process] = Some(*r);
        }
    }

    #[test]
    fn zero_noise_gives_exact_stamps() {
        let opts = SimOptions {
            noise: NoiseModel::Zero,
            trace: true,
        };
        let c = SystemConfig::single(9.0, 1.0, 1.0, 1.0).unwrap();
        let run = simulate_plan(&c, &CyclePlan::single(1.0), 2000, 3, opts).unwrap();
        assert!(run.trace.unwrap().iter().all(|r| r.s == r.s_prime));
        let t = run.tables[0].total();
        assert_eq!(t.sq_err, 0.0);
        assert_eq!(t.var_sum, 0.0);
    }

    #[test]
    fn asymmetric_ones_is_zero_wait_round_robin() {
        let opts = SimOptions {
            trace: true,
            ..Default::default()
        };
        let a = simulate_plan(&two(), &CyclePlan::asymmetric(&[1, 1]), 3000, 5, opts).unwrap();
        let b = simulate_plan(&two(), &CyclePlan::round_robin(2, 0.0), 3000, 5, opts).unwrap();
        assert_eq!(a, b);
    }
}

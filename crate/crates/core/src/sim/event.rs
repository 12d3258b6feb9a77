//! Event-list cross-check.
//!
//! Drives the same cycle plan through a time-ordered queue of wake, arrival
//! and delivery events and integrates each process's age curve `t - S'` piece
//! by piece between events. It shares only the random streams with the
//! epoch-recursive engine, so agreement between the two is a check on the
//! epoch bookkeeping.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::model::SystemConfig;
use crate::sim::engine::{CyclePlan, SimOptions, BURN_IN_CYCLES};
use crate::sim::rng::ProcessStreams;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Wake,
    Arrival,
    Delivery,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: Kind,
    slot: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// Point estimates from the event-list run.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRun {
    /// Time-average age per process over the observation window.
    pub aoi: Vec<f64>,
    /// Mean of `(S - S')^2` per process.
    pub err_raw: Vec<f64>,
    /// Mean of the noise variance per process.
    pub err_rb: Vec<f64>,
    pub deliveries: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Proc {
    last_arrival: Option<f64>,
    stamp: f64,
    area: f64,
    observed_from: Option<f64>,
    last_delivery: f64,
    sq_err: f64,
    var_sum: f64,
    deliveries: u64,
}

pub fn simulate_events(
    cfg: &SystemConfig,
    plan: &CyclePlan,
    cycles: u64,
    seed: u64,
    opts: SimOptions,
) -> Result<EventRun> {
    cfg.validate()?;
    plan.validate(cfg.len())?;
    if cycles == 0 {
        return Err(Error::InvalidConfig("simulation needs at least one cycle".into()));
    }
    let k = cfg.len();
    let n_slots = plan.slots.len();
    let total_slots = (BURN_IN_CYCLES + cycles) as usize * n_slots;
    let burn_slots = BURN_IN_CYCLES as usize * n_slots;
    let mut streams: Vec<ProcessStreams> = (0..k).map(|p| ProcessStreams::new(seed, p)).collect();
    let mut procs = vec![Proc::default(); k];
    let mut services: VecDeque<f64> = VecDeque::from(vec![0.0; n_slots]);
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<Event>, time, kind, slot| {
        heap.push(Event { time, seq, kind, slot });
        seq += 1;
    };

    let first_wait = if plan.wait_slot == 0 { plan.threshold } else { 0.0 };
    push(&mut heap, first_wait, Kind::Wake, 0);
    // service and stamp of the sample currently in flight
    let mut in_flight = (0.0, 0.0, 0.0);

    while let Some(ev) = heap.pop() {
        let p = plan.slots[ev.slot % n_slots];
        let spec = &cfg.processes[p];
        match ev.kind {
            Kind::Wake => {
                let x = streams[p].sampling.sample::<f64, _>(Exp1) / spec.rate;
                let sleep = ev.time - procs[p].last_arrival.unwrap_or(0.0);
                let h = spec.recovery.value(sleep);
                in_flight.2 = opts.noise.variance(h);
                push(&mut heap, ev.time + x, Kind::Arrival, ev.slot);
            }
            Kind::Arrival => {
                let y = cfg.service.sample(&mut streams[p].service);
                let dev = opts.noise.draw(&mut streams[p].noise, in_flight.2);
                in_flight.0 = y;
                in_flight.1 = ev.time + dev;
                procs[p].last_arrival = Some(ev.time);
                if ev.slot >= burn_slots {
                    procs[p].sq_err += dev * dev;
                    procs[p].var_sum += in_flight.2;
                }
                push(&mut heap, ev.time + y, Kind::Delivery, ev.slot);
            }
            Kind::Delivery => {
                let t = ev.time;
                let pr = &mut procs[p];
                if ev.slot >= burn_slots {
                    let from = pr.last_delivery;
                    // age is linear with unit slope between deliveries
                    pr.area += 0.5 * ((t - pr.stamp).powi(2) - (from - pr.stamp).powi(2));
                    pr.deliveries += 1;
                    if pr.observed_from.is_none() {
                        pr.observed_from = Some(from);
                    }
                }
                pr.stamp = in_flight.1;
                pr.last_delivery = t;
                services.pop_front();
                services.push_back(in_flight.0);
                let next = ev.slot + 1;
                if next < total_slots {
                    let wait = if next % n_slots == plan.wait_slot && plan.threshold > 0.0 {
                        (plan.threshold - services.iter().sum::<f64>()).max(0.0)
                    } else {
                        0.0
                    };
                    push(&mut heap, t + wait, Kind::Wake, next);
                }
            }
        }
    }

    let aoi = procs
        .iter()
        .map(|p| p.area / (p.last_delivery - p.observed_from.unwrap_or(p.last_delivery)))
        .collect();
    let per = |f: fn(&Proc) -> f64| procs.iter().map(|p| f(p) / p.deliveries as f64).collect();
    Ok(EventRun {
        aoi,
        err_raw: per(|p| p.sq_err),
        err_rb: per(|p| p.var_sum),
        deliveries: procs.iter().map(|p| p.deliveries).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::engine::simulate_plan;

    #[test]
    fn matches_engine_on_same_streams() {
        let mut cfg = SystemConfig::single(6.0, 1.5, 0.7, 0.5).unwrap();
        cfg.processes.push(cfg.processes[0]);
        cfg.processes[1].rate = 3.0;
        let plan = CyclePlan::asymmetric(&[2, 3]);
        let ev = simulate_events(&cfg, &plan, 4000, 11, SimOptions::default()).unwrap();
        let run = simulate_plan(&cfg, &plan, 4000, 11, SimOptions::default()).unwrap();
        for p in 0..2 {
            let e = run.tables[p].estimates(11);
            assert_eq!(ev.deliveries[p], e.aoi.epochs);
            assert!((ev.aoi[p] - e.aoi.value).abs() < 1e-9 * e.aoi.value);
            assert!((ev.err_raw[p] - e.err_raw.value).abs() < 1e-12);
            assert!((ev.err_rb[p] - e.err.value).abs() < 1e-12);
        }
    }
}

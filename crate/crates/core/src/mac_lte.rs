//! Centrally scheduled LTE small cell: round-robin over UEs, one UE at the
//! head of each TTI. Capacity the head UE cannot use passes on to the next
//! UEs in rotation, so a TTI is never wasted while any queue holds data.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LteMacParams {
    pub tti_ms: f64,
    pub dl_bandwidth_mhz: f64,
    pub overhead_fraction: f64,
    /// Aggregate UL capacity available to diverted UL traffic.
    pub ul_capacity_mbps: f64,
}

impl Default for LteMacParams {
    fn default() -> Self {
        LteMacParams {
            tti_ms: 1.0,
            dl_bandwidth_mhz: 10.0,
            overhead_fraction: 0.25,
            ul_capacity_mbps: 30.0,
        }
    }
}

impl LteMacParams {
    pub fn tti(&self) -> SimTime {
        SimTime::from_secs_f64(self.tti_ms * 1e-3)
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.tti_ms > 0.0) {
            return Err(("lte.tti_ms", "must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.overhead_fraction) {
            return Err(("lte.overhead_fraction", "must lie in [0, 1)".into()));
        }
        if !(self.ul_capacity_mbps > 0.0) {
            return Err(("lte.ul_capacity_mbps", "must be positive".into()));
        }
        Ok(())
    }
}

/// Rotating head-of-TTI pointer.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    next: usize,
    served: Vec<u64>,
}

impl RoundRobin {
    pub fn new(n: usize) -> Self {
        RoundRobin {
            next: 0,
            served: vec![0; n],
        }
    }

    /// Visit order for this TTI: UEs with data, starting from the rotation
    /// pointer. The pointer then moves past the head UE.
    pub fn schedule_tti(&mut self, has_data: &[bool]) -> Vec<usize> {
        let n = has_data.len();
        if self.served.len() != n {
            self.served.resize(n, 0);
        }
        let order: Vec<usize> = (0..n)
            .map(|k| (self.next + k) % n.max(1))
            .filter(|&ue| has_data[ue])
            .collect();
        if let Some(&head) = order.first() {
            self.served[head] += 1;
            self.next = (head + 1) % n;
        }
        order
    }

    /// TTIs in which each UE was at the head.
    pub fn served(&self) -> &[u64] {
        &self.served
    }
}

/// Equal time shares among UEs with queued data.
pub fn allocation_shares(has_data: &[bool]) -> Vec<f64> {
    let active = has_data.iter().filter(|&&b| b).count();
    has_data
        .iter()
        .map(|&b| if b && active > 0 { 1.0 / active as f64 } else { 0.0 })
        .collect()
}

/// Bits a UE can receive in one TTI with the given share.
pub fn serve_tti(rate_mbps: f64, tti: SimTime, allocation: f64, overhead_fraction: f64, queued_bits: u64) -> u64 {
    debug_assert!((0.0..=1.0).contains(&allocation));
    let capacity = rate_mbps * 1e6 * tti.as_secs_f64() * allocation * (1.0 - overhead_fraction);
    (capacity.max(0.0).floor() as u64).min(queued_bits)
}

/// Round-robin estimate of every LTE UE's throughput after adding one more:
/// each full-allocation rate divided by N + 1. The candidate is last.
pub fn estimate_post_switch_throughput(existing_rates_mbps: &[f64], candidate_rate_mbps: f64) -> Vec<f64> {
    let share = (existing_rates_mbps.len() + 1) as f64;
    existing_rates_mbps
        .iter()
        .chain(std::iter::once(&candidate_rate_mbps))
        .map(|r| r / share)
        .collect()
}

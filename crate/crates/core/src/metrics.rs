//! Per-drop ledgers and their reduction into throughput distributions.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::Mode;
use crate::error::{Error, Result};
use crate::rlm::{SwitchCause, SwitchDirection};
use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub time: SimTime,
    pub ue: usize,
    pub direction: SwitchDirection,
    pub cause: Option<SwitchCause>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UeLedger {
    /// Downlink application bits delivered (no tunnel or probe bytes).
    pub dl_app_bits: u64,
    /// Time during which the UE had downlink data outstanding.
    pub dl_active: SimTime,
    pub ul_app_bits: u64,
    pub dl_files_completed: u64,
    /// Sum over completed downloads of file size / download time, Mbps.
    pub dl_file_rate_sum: f64,
    pub on_lte_at_end: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropResult {
    pub mode: Mode,
    pub n_ues: usize,
    pub drop_index: u64,
    pub seed: u64,
    pub duration: SimTime,
    pub ues: Vec<UeLedger>,
    /// Downlink application bits per cell: index 0 is the BS, then one
    /// entry per AP.
    pub cell_dl_bits: Vec<u64>,
    /// Tunnel headers, padding and probe bytes carried on the air, in bits.
    pub overhead_bits: u64,
    /// Downlink application bits injected but not yet delivered at the end.
    pub in_flight_bits: u64,
    pub injected_dl_bits: u64,
    pub switches: Vec<SwitchEvent>,
    pub denied_switches: u64,
    pub wifi_only_entries: u64,
    /// Initial or re-probe trains whose statistics met the criteria.
    pub probe_trains_passed: u64,
    pub probe_trains_failed: u64,
    pub collisions: u64,
    pub events_processed: u64,
}

/// How per-UE goodput is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThroughputBasis {
    /// Bits over the time the UE had a download outstanding.
    #[default]
    ActiveTime,
    /// Bits over the whole drop.
    Duration,
    /// Mean over completed downloads of file size / download time. A UE
    /// that never finishes a file falls back to `ActiveTime`.
    FileMean,
}

impl DropResult {
    pub fn ue_throughput(&self, ue: usize, basis: ThroughputBasis) -> f64 {
        let l = &self.ues[ue];
        match basis {
            ThroughputBasis::FileMean if l.dl_files_completed > 0 => {
                l.dl_file_rate_sum / l.dl_files_completed as f64
            }
            ThroughputBasis::Duration => mbps(l.dl_app_bits, self.duration),
            _ => mbps(l.dl_app_bits, l.dl_active),
        }
    }

    pub fn ue_throughputs(&self, basis: ThroughputBasis) -> Vec<f64> {
        (0..self.ues.len()).map(|u| self.ue_throughput(u, basis)).collect()
    }

    pub fn sum_cell_throughput(&self) -> f64 {
        mbps(self.cell_dl_bits.iter().sum(), self.duration)
    }

    pub fn cell_throughput(&self, cell: usize) -> f64 {
        mbps(self.cell_dl_bits[cell], self.duration)
    }

    pub fn switched_to_lte(&self) -> usize {
        self.switches
            .iter()
            .filter(|s| s.direction == SwitchDirection::ToLte)
            .count()
    }
}

pub fn mbps(bits: u64, over: SimTime) -> f64 {
    if over == SimTime::ZERO {
        0.0
    } else {
        bits as f64 * 1e3 / over.as_nanos() as f64
    }
}

/// Empirical distribution with linearly interpolated quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Cdf {
    sorted: Vec<f64>,
}

impl Cdf {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        samples.sort_by(f64::total_cmp);
        Ok(Cdf { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let h = (self.sorted.len() - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        self.sorted[lo] + (h - lo as f64) * (self.sorted[hi] - self.sorted[lo])
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    /// Fraction of samples at or below `x`.
    pub fn cdf_at(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }
}

pub fn build_cdf(samples: &[f64]) -> Result<Cdf> {
    Cdf::new(samples.to_vec())
}

pub fn gain(a: &Cdf, b: &Cdf, q: f64) -> f64 {
    a.quantile(q) / b.quantile(q)
}

/// Everything a campaign reports for one (mode, UE count) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mode: Mode,
    pub n_ues: usize,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
    pub sum_cell_median: f64,
    pub sum_cell_max: f64,
    pub drops: usize,
    pub drops_with_switch: usize,
}

impl CellSummary {
    /// Pools UEs across drops. Drop order does not matter.
    pub fn from_drops(mode: Mode, n_ues: usize, drops: &[DropResult], basis: ThroughputBasis) -> Result<Self> {
        let ue = Cdf::new(drops.iter().flat_map(|d| d.ue_throughputs(basis)).collect())?;
        let cell = Cdf::new(drops.iter().map(|d| d.sum_cell_throughput()).collect())?;
        Ok(CellSummary {
            mode,
            n_ues,
            median: ue.median(),
            p10: ue.quantile(0.1),
            p90: ue.quantile(0.9),
            sum_cell_median: cell.median(),
            sum_cell_max: cell.max(),
            drops: drops.len(),
            drops_with_switch: drops.iter().filter(|d| d.switched_to_lte() > 0).count(),
        })
    }

    pub fn switch_drop_fraction(&self) -> f64 {
        if self.drops == 0 {
            0.0
        } else {
            self.drops_with_switch as f64 / self.drops as f64
        }
    }
}

pub fn samples_csv(drops: &[DropResult], basis: ThroughputBasis) -> String {
    let mut out = String::from("mode,n_ues,drop,ue,throughput_mbps\n");
    for d in drops {
        for (u, t) in d.ue_throughputs(basis).iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{:.6}", d.mode.as_str(), d.n_ues, d.drop_index, u, t);
        }
    }
    out
}

pub fn summary_csv(rows: &[CellSummary]) -> String {
    let mut out = String::from("mode,n_ues,median,p10,p90,sum_cell_median\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            r.mode.as_str(),
            r.n_ues,
            r.median,
            r.p10,
            r.p90,
            r.sum_cell_median
        );
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn drop_with(bits: &[u64], active_ms: &[u64]) -> DropResult {
        DropResult {
            mode: Mode::Lwip,
            n_ues: bits.len(),
            drop_index: 0,
            seed: 0,
            duration: SimTime::from_millis(10_000),
            ues: bits
                .iter()
                .zip(active_ms)
                .map(|(&b, &a)| UeLedger {
                    dl_app_bits: b,
                    dl_active: SimTime::from_millis(a),
                    ..UeLedger::default()
                })
                .collect(),
            cell_dl_bits: vec![0, bits.iter().sum(), 0],
            overhead_bits: 0,
            in_flight_bits: 0,
            injected_dl_bits: bits.iter().sum(),
            switches: Vec::new(),
            denied_switches: 0,
            wifi_only_entries: 0,
            probe_trains_passed: 0,
            probe_trains_failed: 0,
            collisions: 0,
            events_processed: 0,
        }
    }

    #[test]
    fn throughput_examples() {
        let d = drop_with(&[630_000_000, 0, 100_000_000], &[10_000, 0, 5_000]);
        assert_eq!(d.ue_throughput(0, ThroughputBasis::Duration), 63.0);
        assert_eq!(d.ue_throughput(0, ThroughputBasis::ActiveTime), 63.0);
        assert_eq!(d.ue_throughput(1, ThroughputBasis::ActiveTime), 0.0);
        assert_eq!(d.ue_throughput(2, ThroughputBasis::ActiveTime), 20.0);
        assert_eq!(d.ue_throughput(2, ThroughputBasis::Duration), 10.0);
        assert_eq!(d.sum_cell_throughput(), 73.0);
        assert_eq!(drop_with(&[], &[]).sum_cell_throughput(), 0.0);
    }

    #[test]
    fn cdf_examples() {
        let c = build_cdf(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(c.median(), 2.0);
        assert_eq!(c.quantile(0.25), 1.5);
        assert_eq!(gain(&c, &c, 0.5), 1.0);
        assert!(matches!(build_cdf(&[]), Err(Error::EmptySamples)));
        let even = build_cdf(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(even.median(), 2.5);
    }

    #[test]
    fn summary_csv_layout() {
        let d = drop_with(&[630_000_000], &[10_000]);
        let s = CellSummary::from_drops(Mode::Lwip, 1, &[d], ThroughputBasis::Duration).unwrap();
        assert_eq!(
            summary_csv(&[s]),
            "mode,n_ues,median,p10,p90,sum_cell_median\nlwip,1,63.000000,63.000000,63.000000,63.000000\n"
        );
    }

    proptest! {
        #[test]
        fn quantiles_monotone(samples in proptest::collection::vec(0.0f64..500.0, 1..60), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let c = build_cdf(&samples).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c.quantile(lo) <= c.quantile(hi));
        }

        #[test]
        fn summary_ignores_drop_order(bits in proptest::collection::vec(0u64..1_000_000_000, 2..8)) {
            let drops: Vec<_> = bits.iter().enumerate().map(|(i, &b)| {
                let mut d = drop_with(&[b, b / 2], &[10_000, 10_000]);
                d.drop_index = i as u64;
                d
            }).collect();
            let mut rev = drops.clone();
            rev.reverse();
            let a = CellSummary::from_drops(Mode::Boost, 2, &drops, ThroughputBasis::ActiveTime).unwrap();
            let b = CellSummary::from_drops(Mode::Boost, 2, &rev, ThroughputBasis::ActiveTime).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

//! Fitting the rate-table scales to the single-UE saturated peaks.

use serde::{Deserialize, Serialize};

use crate::config::CampaignConfig;
use crate::engine::{run_seeded_drop, Mode};
use crate::error::Result;
use crate::metrics::ThroughputBasis;
use crate::traffic::TrafficModel;

pub const LTE_PEAK_TARGET_MBPS: f64 = 63.0;
pub const WIFI_PEAK_TARGET_MBPS: f64 = 140.0;
/// Lone-UE peak reached over the tunnelled aggregation paths.
pub const TUNNEL_PEAK_TARGET_MBPS: f64 = 135.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub lte_scale: f64,
    pub wifi_scale: f64,
    pub lte_peak_mbps: f64,
    pub wifi_peak_mbps: f64,
    pub lwip_peak_mbps: f64,
    pub boost_peak_mbps: f64,
}

/// The configuration with a full-buffer downlink and a single UE.
pub fn saturated(cfg: &CampaignConfig) -> CampaignConfig {
    let mut c = cfg.clone();
    c.traffic.model = TrafficModel::FullBuffer;
    c
}

/// Mean goodput of a lone saturated UE over `drops` drops.
pub fn single_ue_peak(cfg: &CampaignConfig, mode: Mode, drops: u64) -> Result<f64> {
    let c = saturated(cfg);
    let mut sum = 0.0;
    for d in 0..drops {
        let r = run_seeded_drop(&c, mode, 1, d)?;
        sum += r.ue_throughput(0, ThroughputBasis::Duration);
    }
    Ok(sum / drops.max(1) as f64)
}

/// Rescales both tables until the measured peaks sit on their targets.
/// Goodput is close to linear in the scale, so a few fixed-point steps
/// suffice. The Wi-Fi table feeds three peaks (plain, and the two
/// tunnelled modes) and gets the least-squares scale over all of them,
/// since the per-packet tunnel overhead does not let all three land on
/// their targets at once.
pub fn calibrate(cfg: &CampaignConfig, iterations: u32, drops: u64) -> Result<Calibration> {
    let mut c = cfg.clone();
    let measure = |c: &CampaignConfig| -> Result<[f64; 4]> {
        Ok([
            single_ue_peak(c, Mode::LteOnly, drops)?,
            single_ue_peak(c, Mode::WifiOnly, drops)?,
            single_ue_peak(c, Mode::Lwip, drops)?,
            single_ue_peak(c, Mode::Boost, drops)?,
        ])
    };
    let mut peaks = measure(&c)?;
    for _ in 0..iterations {
        let [lte, wifi, lwip, boost] = peaks;
        c.channel.lte_scale *= LTE_PEAK_TARGET_MBPS / lte;
        let num = WIFI_PEAK_TARGET_MBPS * wifi + TUNNEL_PEAK_TARGET_MBPS * (lwip + boost);
        let den = wifi * wifi + lwip * lwip + boost * boost;
        c.channel.wifi_scale *= num / den;
        peaks = measure(&c)?;
    }
    Ok(Calibration {
        lte_scale: c.channel.lte_scale,
        wifi_scale: c.channel.wifi_scale,
        lte_peak_mbps: peaks[0],
        wifi_peak_mbps: peaks[1],
        lwip_peak_mbps: peaks[2],
        boost_peak_mbps: peaks[3],
    })
}

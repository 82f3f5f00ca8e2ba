//! Campaign configuration, read from a TOML file. Omitted keys take their
//! defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{LTE_CALIBRATION_SCALE, WIFI_CALIBRATION_SCALE};
use crate::engine::Mode;
use crate::error::{Error, Result};
use crate::mac_lte::LteMacParams;
use crate::mac_wifi::WifiMacParams;
use crate::metrics::ThroughputBasis;
use crate::rlm::RlmConfig;
use crate::scenario::ScenarioConfig;
use crate::traffic::TrafficConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub lte_scale: f64,
    pub wifi_scale: f64,
    pub wifi_bandwidth_mhz: f64,
    pub ue_speed_kmh: f64,
    pub fading_block_ms: f64,
    pub fading: bool,
    /// Scripted Wi-Fi degradation, for fault-injection runs.
    pub wifi_throttle: Option<WifiThrottle>,
}

/// Caps every Wi-Fi link rate from `onset_s` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WifiThrottle {
    pub onset_s: f64,
    pub rate_mbps: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            lte_scale: LTE_CALIBRATION_SCALE,
            wifi_scale: WIFI_CALIBRATION_SCALE,
            wifi_bandwidth_mhz: 20.0,
            ue_speed_kmh: 3.0,
            fading_block_ms: 1.0,
            fading: true,
            wifi_throttle: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignSettings {
    pub modes: Vec<Mode>,
    pub ue_counts: Vec<usize>,
    pub drops: u64,
    pub duration: f64,
    pub master_seed: u64,
    pub throughput_basis: ThroughputBasis,
    pub output_dir: PathBuf,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        CampaignSettings {
            modes: Mode::ALL.to_vec(),
            ue_counts: vec![4, 20, 32],
            drops: 100,
            duration: 10.0,
            master_seed: 1,
            throughput_basis: ThroughputBasis::ActiveTime,
            output_dir: PathBuf::from("results"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub scenario: ScenarioConfig,
    pub channel: ChannelConfig,
    pub wifi: WifiMacParams,
    pub lte: LteMacParams,
    pub traffic: TrafficConfig,
    pub rlm: RlmConfig,
    pub campaign: CampaignSettings,
}

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::ConfigValidation {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |nl| before.len() - nl - 1) + 1;
    (line, column)
}

impl CampaignConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: CampaignConfig = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
            Error::ConfigParse {
                line,
                column,
                message: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.geometry.validate()?;
        let s = &self.scenario;
        if s.wifi_channels == 0 {
            return Err(invalid("scenario.wifi_channels", "must be at least 1"));
        }
        if !(s.wifi_carrier_ghz > 0.0) {
            return Err(invalid("scenario.wifi_carrier_ghz", "must be positive"));
        }
        if !(s.lte_carrier_ghz > 0.0) {
            return Err(invalid("scenario.lte_carrier_ghz", "must be positive"));
        }
        if !(s.shadowing_sigma_db >= 0.0) {
            return Err(invalid("scenario.shadowing_sigma_db", "must not be negative"));
        }
        let c = &self.channel;
        for (k, v) in [
            ("channel.lte_scale", c.lte_scale),
            ("channel.wifi_scale", c.wifi_scale),
            ("channel.wifi_bandwidth_mhz", c.wifi_bandwidth_mhz),
            ("channel.fading_block_ms", c.fading_block_ms),
        ] {
            if !(v > 0.0) {
                return Err(invalid(k, format!("must be positive, got {v}")));
            }
        }
        if !(c.ue_speed_kmh >= 0.0) {
            return Err(invalid("channel.ue_speed_kmh", "must not be negative"));
        }
        if let Some(t) = c.wifi_throttle {
            if !(t.onset_s >= 0.0) {
                return Err(invalid("channel.wifi_throttle.onset_s", "must not be negative"));
            }
            if !(t.rate_mbps > 0.0) {
                return Err(invalid("channel.wifi_throttle.rate_mbps", "must be positive"));
            }
        }
        self.wifi.validate().map_err(|(k, r)| invalid(k, r))?;
        self.lte.validate().map_err(|(k, r)| invalid(k, r))?;
        let t = &self.traffic;
        if t.mtu == 0 {
            return Err(invalid("traffic.mtu", "must be positive"));
        }
        if t.dl_file_bytes == 0 {
            return Err(invalid("traffic.dl_file_bytes", "must be positive"));
        }
        if !(t.mean_reading_time >= 0.0) {
            return Err(invalid("traffic.mean_reading_time", "must not be negative"));
        }
        self.rlm.validate().map_err(|(k, r)| invalid(k, r))?;
        let m = &self.campaign;
        if m.modes.is_empty() {
            return Err(invalid("campaign.modes", "at least one mode is required"));
        }
        if m.ue_counts.is_empty() || m.ue_counts.contains(&0) {
            return Err(invalid("campaign.ue_counts", "UE counts must be positive"));
        }
        if m.drops == 0 {
            return Err(invalid("campaign.drops", "must be at least 1"));
        }
        if !(m.duration > 0.0) {
            return Err(invalid("campaign.duration", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = CampaignConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, CampaignConfig::default());
        assert_eq!(cfg.rlm.probe.s_ini_bits, 12_000);
        assert_eq!(cfg.wifi.difs_us, 34);
        assert_eq!(cfg.campaign.drops, 100);
    }

    #[test]
    fn negative_threshold_names_key() {
        let err = CampaignConfig::from_toml_str("[rlm.thresholds]\ntph_min = -1.0\n").unwrap_err();
        match err {
            Error::ConfigValidation { key, .. } => assert_eq!(key, "rlm.thresholds.tph_min"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected_with_position() {
        let err = CampaignConfig::from_toml_str("[rlm]\nalpha_beta = 3\n").unwrap_err();
        match err {
            Error::ConfigParse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("alpha_beta"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = CampaignConfig::default();
        cfg.campaign.modes = vec![Mode::Boost];
        cfg.rlm.ewma_alpha = 0.5;
        let back = CampaignConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }
}

//! Radio link management: the controller at the LTE small cell (RCM) that
//! decides each UE's downlink path, and the UE agent (UCM) that measures
//! probes and reports back.
//!
//! Everything here is a pure function of (state, input, now). The engine
//! feeds events in and carries out the returned actions, which keeps the
//! protocol testable without a network.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// How the UE turns an initial probe train into a throughput figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeRateEstimator {
    /// Bits after the first probe over the first-to-last arrival spread.
    /// Reads exactly the sending rate on an undisturbed path.
    Dispersion,
    /// All received bits over the first-to-last arrival spread.
    ReceiveSpan,
    /// All received bits over the time from the first send to the last
    /// arrival.
    TestPeriod,
    /// Mean over probes of probe size divided by its one-way delay. The
    /// only reading that is not pinned to the sending rate, so thresholds
    /// above it stay meaningful.
    #[default]
    PerProbe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub s_ini_bits: u64,
    pub t_ini: f64,
    pub r_ini_mbps: f64,
    pub s_dat_bits: u64,
    pub t_dat: f64,
    pub t_ip: f64,
    pub x_stall: u32,
    /// Extra wait after the test period before the initial probe ACK is
    /// given up on.
    pub initial_ack_grace: f64,
    /// An active probe not acknowledged within this long counts as missing.
    pub data_ack_timeout: f64,
    pub rate_estimator: ProbeRateEstimator,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            s_ini_bits: 12_000,
            t_ini: 0.1,
            r_ini_mbps: 5.0,
            s_dat_bits: 160,
            t_dat: 0.003,
            t_ip: 2.0,
            x_stall: 3,
            initial_ack_grace: 0.1,
            data_ack_timeout: 0.5,
            rate_estimator: ProbeRateEstimator::default(),
        }
    }
}

impl ProbeConfig {
    /// Probes per initial test period.
    pub fn x_ini(&self) -> u64 {
        (self.t_ini * self.r_ini_mbps * 1e6 / self.s_ini_bits as f64).floor() as u64
    }

    pub fn initial_spacing(&self) -> SimTime {
        SimTime::airtime(self.s_ini_bits, self.r_ini_mbps * 1e6)
    }

    pub fn initial_ack_timeout(&self) -> SimTime {
        SimTime::from_secs_f64(self.t_ini + self.initial_ack_grace)
    }

    pub fn data_interval(&self) -> SimTime {
        SimTime::from_secs_f64(self.t_dat)
    }

    pub fn reprobe_interval(&self) -> SimTime {
        SimTime::from_secs_f64(self.t_ip)
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        let positive = [
            ("rlm.probe.s_ini_bits", self.s_ini_bits as f64),
            ("rlm.probe.t_ini", self.t_ini),
            ("rlm.probe.r_ini_mbps", self.r_ini_mbps),
            ("rlm.probe.s_dat_bits", self.s_dat_bits as f64),
            ("rlm.probe.t_dat", self.t_dat),
            ("rlm.probe.t_ip", self.t_ip),
            ("rlm.probe.data_ack_timeout", self.data_ack_timeout),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return Err((k, "must be positive".into()));
            }
        }
        if self.x_stall == 0 {
            return Err(("rlm.probe.x_stall", "must be at least 1".into()));
        }
        if self.x_ini() < 1 {
            return Err(("rlm.probe.t_ini", "test period too short for a single probe".into()));
        }
        if self.initial_ack_grace < 0.0 {
            return Err(("rlm.probe.initial_ack_grace", "must not be negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecisionThresholds {
    pub probe_lost_min: f64,
    pub probe_delay_min: f64,
    pub probe_rate_min: f64,
    pub u_min: f64,
    pub tph_min: f64,
    pub rssi_min: f64,
}

impl Default for DecisionThresholds {
    fn default() -> Self {
        DecisionThresholds {
            probe_lost_min: 0.9,
            probe_delay_min: 0.5,
            probe_rate_min: 5.0,
            u_min: 0.5,
            tph_min: 5.0,
            rssi_min: -82.0,
        }
    }
}

impl DecisionThresholds {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(self.probe_lost_min > 0.0 && self.probe_lost_min <= 1.0) {
            return Err(("rlm.thresholds.probe_lost_min", "must lie in (0, 1]".into()));
        }
        for (k, v) in [
            ("rlm.thresholds.probe_delay_min", self.probe_delay_min),
            ("rlm.thresholds.probe_rate_min", self.probe_rate_min),
            ("rlm.thresholds.u_min", self.u_min),
            ("rlm.thresholds.tph_min", self.tph_min),
        ] {
            if !(v > 0.0) {
                return Err((k, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GovernorConfig {
    pub t_switch: f64,
    pub r_switch: f64,
}

impl Default for GovernorConfig {
    fn default() -> Self {
        GovernorConfig {
            t_switch: 0.5,
            r_switch: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlmConfig {
    pub probe: ProbeConfig,
    pub thresholds: DecisionThresholds,
    pub governor: GovernorConfig,
    pub ewma_alpha: f64,
}

impl Default for RlmConfig {
    fn default() -> Self {
        RlmConfig {
            probe: ProbeConfig::default(),
            thresholds: DecisionThresholds::default(),
            governor: GovernorConfig::default(),
            ewma_alpha: 0.25,
        }
    }
}

impl RlmConfig {
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        self.probe.validate()?;
        self.thresholds.validate()?;
        if !(self.governor.t_switch >= 0.0) {
            return Err(("rlm.governor.t_switch", "must not be negative".into()));
        }
        if !(self.governor.r_switch >= 0.0) {
            return Err(("rlm.governor.r_switch", "must not be negative".into()));
        }
        if !(self.ewma_alpha > 0.0 && self.ewma_alpha <= 1.0) {
            return Err(("rlm.ewma_alpha", "must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Statistics the UCM reports at the end of an initial test period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeStats {
    pub probe_lost: f64,
    /// Mean one-way delay, seconds.
    pub probe_delay: f64,
    /// Mbps.
    pub probe_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathChoice {
    Wifi,
    Lte,
}

/// Initial-phase admission. Wi-Fi only if the pilot is strong enough and
/// loss, delay and rate all pass; no report at all means LTE.
pub fn evaluate_initial_criteria(stats: Option<&ProbeStats>, rssi_dbm: f64, thr: &DecisionThresholds) -> PathChoice {
    let Some(s) = stats else {
        return PathChoice::Lte;
    };
    let pass = rssi_dbm >= thr.rssi_min
        && s.probe_lost < thr.probe_lost_min
        && s.probe_delay < thr.probe_delay_min
        && s.probe_rate >= thr.probe_rate_min;
    if pass {
        PathChoice::Wifi
    } else {
        PathChoice::Lte
    }
}

/// Receiver side of an initial probe train.
#[derive(Debug, Clone, Default)]
pub struct InitialProbeMeter {
    received: u64,
    bits: u64,
    delay_sum: SimTime,
    first_tx: Option<SimTime>,
    first_rx: Option<SimTime>,
    last_rx: SimTime,
    /// Sum of per-probe bits / delay, Mbps.
    per_probe_sum: f64,
}

impl InitialProbeMeter {
    pub fn on_probe(&mut self, sent_at: SimTime, received_at: SimTime, bits: u64) {
        self.received += 1;
        self.bits += bits;
        let delay = received_at - sent_at;
        self.delay_sum += delay;
        if delay > SimTime::ZERO {
            self.per_probe_sum += bits as f64 * 1e3 / delay.as_nanos() as f64;
        }
        if self.first_rx.is_none() {
            self.first_rx = Some(received_at);
            self.first_tx = Some(sent_at);
        }
        self.last_rx = received_at;
    }

    pub fn received(&self) -> u64 {
        self.received
    }

    /// Loss fraction against `expected`, mean delay, and the train's
    /// throughput as read by `estimator`.
    pub fn stats(&self, expected: u64, probe_bits: u64, estimator: ProbeRateEstimator) -> ProbeStats {
        let probe_lost = if expected == 0 {
            0.0
        } else {
            1.0 - self.received.min(expected) as f64 / expected as f64
        };
        let probe_delay = if self.received == 0 {
            f64::INFINITY
        } else {
            self.delay_sum.as_secs_f64() / self.received as f64
        };
        let rx_span = self.first_rx.map_or(0, |f| (self.last_rx - f).as_nanos());
        // bits per ns * 1e3 = Mbps
        let rate = |bits: u64, span: u64| if span > 0 { bits as f64 * 1e3 / span as f64 } else { 0.0 };
        let probe_rate = match estimator {
            _ if self.received == 0 => 0.0,
            ProbeRateEstimator::Dispersion => rate((self.received - 1) * probe_bits, rx_span),
            ProbeRateEstimator::ReceiveSpan if self.received >= 2 => rate(self.received * probe_bits, rx_span),
            ProbeRateEstimator::ReceiveSpan => 0.0,
            ProbeRateEstimator::TestPeriod => {
                let span = self.first_tx.map_or(0, |f| (self.last_rx - f).as_nanos());
                rate(self.received * probe_bits, span)
            }
            ProbeRateEstimator::PerProbe => self.per_probe_sum / self.received as f64,
        };
        ProbeStats {
            probe_lost,
            probe_delay,
            probe_rate,
        }
    }
}

/// Average UE throughput between two active probes, Mbps.
pub fn ucm_on_active_probe(delivered_bits_since_last: u64, elapsed: SimTime) -> f64 {
    assert!(elapsed > SimTime::ZERO, "elapsed time between probes must be positive");
    delivered_bits_since_last as f64 * 1e3 / elapsed.as_nanos() as f64
}

/// UE-side bookkeeping for the data phase.
#[derive(Debug, Clone, Default)]
pub struct ActiveProbeMeter {
    last_probe_rx: Option<SimTime>,
    bits_since: u64,
}

impl ActiveProbeMeter {
    pub fn reset(&mut self, now: SimTime) {
        self.last_probe_rx = Some(now);
        self.bits_since = 0;
    }

    pub fn on_data(&mut self, bits: u64) {
        self.bits_since += bits;
    }

    /// Called once per reception instant that carried at least one probe.
    /// Returns the throughput sample, or `None` when there is no earlier
    /// reference point.
    pub fn on_probe(&mut self, now: SimTime) -> Option<f64> {
        let sample = match self.last_probe_rx {
            Some(prev) if now > prev => Some(ucm_on_active_probe(self.bits_since, now - prev)),
            Some(_) => return None,
            None => None,
        };
        self.last_probe_rx = Some(now);
        self.bits_since = 0;
        sample
    }
}

/// Moving average filter over reported throughput, seeded by its first
/// sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ewma {
    alpha: f64,
    value: Option<f64>,
}

impl Ewma {
    pub fn new(alpha: f64) -> Self {
        Ewma { alpha, value: None }
    }

    pub fn update(&mut self, sample: f64) -> f64 {
        let v = match self.value {
            None => sample,
            Some(prev) => (1.0 - self.alpha) * prev + self.alpha * sample,
        };
        self.value = Some(v);
        v
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn reset(&mut self) {
        self.value = None;
    }

    /// Updates needed for a step change to settle within `tolerance`
    /// (relative) of the new level.
    pub fn settle_updates(alpha: f64, tolerance: f64) -> u32 {
        (tolerance.ln() / (1.0 - alpha).ln()).ceil() as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchDirection {
    ToLte,
    ToWifi,
}

/// Rate limiter and LTE admission check shared by all UEs of one BS.
#[derive(Debug, Clone)]
pub struct SwitchGovernor {
    pub t_switch: SimTime,
    pub r_switch: f64,
    pub last_switch_time: Option<SimTime>,
    pub committed: u64,
    pub denied: u64,
}

impl SwitchGovernor {
    pub fn new(cfg: &GovernorConfig) -> Self {
        SwitchGovernor {
            t_switch: SimTime::from_secs_f64(cfg.t_switch),
            r_switch: cfg.r_switch,
            last_switch_time: None,
            committed: 0,
            denied: 0,
        }
    }

    /// Commits the switch and records the time, or denies it.
    pub fn govern_switch(&mut self, direction: SwitchDirection, now: SimTime, lte_estimate_mbps: f64) -> bool {
        let too_soon = self
            .last_switch_time
            .is_some_and(|last| now.saturating_sub(last) < self.t_switch);
        let lte_full = direction == SwitchDirection::ToLte && lte_estimate_mbps < self.r_switch;
        if too_soon || lte_full {
            self.denied += 1;
            return false;
        }
        self.last_switch_time = Some(now);
        self.committed += 1;
        true
    }
}

/// Which path the RCM steers a UE's downlink onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DlPath {
    Wifi,
    Lte,
    /// Inactive UE parked on Wi-Fi with active probing stopped.
    WifiOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Initial,
    Data,
}

#[derive(Debug, Clone)]
pub struct RcmUeState {
    pub path: DlPath,
    pub phase: Phase,
    pub ewma: Ewma,
    pub missing_ack_streak: u32,
    pub next_probe_time: Option<SimTime>,
    pub next_reprobe_time: Option<SimTime>,
}

impl RcmUeState {
    pub fn new(alpha: f64) -> Self {
        RcmUeState {
            path: DlPath::Lte,
            phase: Phase::Initial,
            ewma: Ewma::new(alpha),
            missing_ack_streak: 0,
            next_probe_time: None,
            next_reprobe_time: None,
        }
    }

    pub fn ewma_throughput(&self) -> f64 {
        self.ewma.value().unwrap_or(0.0)
    }

    fn enter_wifi_data(&mut self, now: SimTime, probe: &ProbeConfig) {
        self.path = DlPath::Wifi;
        self.phase = Phase::Data;
        self.ewma.reset();
        self.missing_ack_streak = 0;
        self.next_probe_time = Some(now + probe.data_interval());
        self.next_reprobe_time = None;
    }

    fn enter_lte(&mut self, now: SimTime, probe: &ProbeConfig) {
        self.path = DlPath::Lte;
        self.phase = Phase::Data;
        self.ewma.reset();
        self.missing_ack_streak = 0;
        self.next_probe_time = None;
        self.next_reprobe_time = Some(now + probe.reprobe_interval());
    }

    fn enter_wifi_only(&mut self) {
        self.path = DlPath::WifiOnly;
        self.phase = Phase::Data;
        self.ewma.reset();
        self.missing_ack_streak = 0;
        self.next_probe_time = None;
        self.next_reprobe_time = None;
    }
}

/// What the RCM concluded from one input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Stay,
    SwitchToLte,
    SwitchToWifi,
    WifiOnlyMode,
    /// A switch was wanted but the governor refused it.
    Denied(SwitchDirection),
}

/// Why a switch to LTE was proposed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwitchCause {
    Stall,
    Congestion,
}

/// Data-phase probe emission: true when an active probe is due at `now`.
/// Advances the probe timer.
pub fn data_phase_tick(state: &mut RcmUeState, now: SimTime, probe: &ProbeConfig) -> bool {
    if state.path != DlPath::Wifi || state.phase != Phase::Data {
        return false;
    }
    match state.next_probe_time {
        Some(t) if t <= now => {
            state.next_probe_time = Some(t + probe.data_interval());
            true
        }
        _ => false,
    }
}

/// Connection-time decision once the initial probe ACK arrived (or timed
/// out, `stats = None`). Not governed: nothing is being switched yet.
pub fn rcm_on_initial_result(
    state: &mut RcmUeState,
    stats: Option<&ProbeStats>,
    rssi_dbm: f64,
    now: SimTime,
    cfg: &RlmConfig,
) -> PathChoice {
    let choice = evaluate_initial_criteria(stats, rssi_dbm, &cfg.thresholds);
    match choice {
        PathChoice::Wifi => state.enter_wifi_data(now, &cfg.probe),
        PathChoice::Lte => state.enter_lte(now, &cfg.probe),
    }
    choice
}

/// Result of a periodic re-probe of a UE that sits on LTE.
pub fn rcm_on_reprobe_result(
    state: &mut RcmUeState,
    stats: Option<&ProbeStats>,
    rssi_dbm: f64,
    governor: &mut SwitchGovernor,
    now: SimTime,
    cfg: &RlmConfig,
) -> Decision {
    if state.path != DlPath::Lte {
        return Decision::Stay;
    }
    state.next_reprobe_time = Some(now + cfg.probe.reprobe_interval());
    if evaluate_initial_criteria(stats, rssi_dbm, &cfg.thresholds) == PathChoice::Lte {
        return Decision::Stay;
    }
    if governor.govern_switch(SwitchDirection::ToWifi, now, f64::INFINITY) {
        state.enter_wifi_data(now, &cfg.probe);
        Decision::SwitchToWifi
    } else {
        Decision::Denied(SwitchDirection::ToWifi)
    }
}

/// True when the re-probe timer of an LTE UE has fired; re-arms it.
pub fn lte_reprobe_timer(state: &mut RcmUeState, now: SimTime) -> bool {
    if state.path != DlPath::Lte {
        return false;
    }
    match state.next_reprobe_time {
        Some(t) if t <= now => {
            // Re-armed when the probe result comes back.
            state.next_reprobe_time = None;
            true
        }
        _ => false,
    }
}

fn propose_lte(state: &mut RcmUeState, governor: &mut SwitchGovernor, now: SimTime, lte_estimate_mbps: f64, cfg: &RlmConfig) -> Decision {
    if governor.govern_switch(SwitchDirection::ToLte, now, lte_estimate_mbps) {
        state.enter_lte(now, &cfg.probe);
        Decision::SwitchToLte
    } else {
        Decision::Denied(SwitchDirection::ToLte)
    }
}

/// Active probe ACK carrying `u_avg` (Mbps, `None` for the first probe of a
/// data phase, which only resets the stall streak).
///
/// Priority: inactivity, then congestion on the filtered value.
pub fn rcm_on_probe_ack(
    state: &mut RcmUeState,
    u_avg: Option<f64>,
    governor: &mut SwitchGovernor,
    now: SimTime,
    lte_estimate_mbps: f64,
    cfg: &RlmConfig,
) -> (Decision, Option<SwitchCause>) {
    if state.path != DlPath::Wifi || state.phase != Phase::Data {
        return (Decision::Stay, None);
    }
    state.missing_ack_streak = 0;
    let Some(u) = u_avg else {
        return (Decision::Stay, None);
    };
    let filtered = state.ewma.update(u);
    if u < cfg.thresholds.u_min {
        state.enter_wifi_only();
        return (Decision::WifiOnlyMode, None);
    }
    if filtered < cfg.thresholds.tph_min {
        return (propose_lte(state, governor, now, lte_estimate_mbps, cfg), Some(SwitchCause::Congestion));
    }
    (Decision::Stay, None)
}

/// An active probe's ACK deadline passed without the ACK.
pub fn rcm_on_missing_ack(
    state: &mut RcmUeState,
    governor: &mut SwitchGovernor,
    now: SimTime,
    lte_estimate_mbps: f64,
    cfg: &RlmConfig,
) -> Decision {
    if state.path != DlPath::Wifi || state.phase != Phase::Data {
        return Decision::Stay;
    }
    state.missing_ack_streak += 1;
    if state.missing_ack_streak >= cfg.probe.x_stall {
        let d = propose_lte(state, governor, now, lte_estimate_mbps, cfg);
        if matches!(d, Decision::Denied(_)) {
            // Still stalled; the next missing ACK retries.
            state.missing_ack_streak = cfg.probe.x_stall - 1;
        }
        return d;
    }
    Decision::Stay
}

/// A UE parked in Wi-Fi only mode offered downlink traffic again.
pub fn rcm_on_traffic_resumed(state: &mut RcmUeState, now: SimTime, cfg: &RlmConfig) -> bool {
    if state.path != DlPath::WifiOnly {
        return false;
    }
    state.enter_wifi_data(now, &cfg.probe);
    true
}

/// Probe and probe-ACK payload as written to traces: class byte, 32-bit
/// sequence, 64-bit microsecond timestamp and three Q32.32 fixed-point
/// statistics, all big-endian.
pub mod wire {
    use super::ProbeStats;
    use crate::traffic::PacketClass;

    pub const PAYLOAD_LEN: usize = 1 + 4 + 8 + 3 * 8;

    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct ProbePayload {
        pub class: PacketClass,
        pub sequence: u32,
        pub timestamp_us: u64,
        pub stats: ProbeStats,
    }

    fn class_byte(c: PacketClass) -> u8 {
        match c {
            PacketClass::FtpData => 0,
            PacketClass::TcpAck => 1,
            PacketClass::Probe => 2,
            PacketClass::ProbeAck => 3,
        }
    }

    pub fn to_fixed(v: f64) -> i64 {
        let scaled = (v * 4_294_967_296.0).round();
        scaled.clamp(i64::MIN as f64, i64::MAX as f64) as i64
    }

    pub fn from_fixed(v: i64) -> f64 {
        v as f64 / 4_294_967_296.0
    }

    pub fn encode(p: &ProbePayload) -> [u8; PAYLOAD_LEN] {
        let mut out = [0u8; PAYLOAD_LEN];
        out[0] = class_byte(p.class);
        out[1..5].copy_from_slice(&p.sequence.to_be_bytes());
        out[5..13].copy_from_slice(&p.timestamp_us.to_be_bytes());
        let fields = [p.stats.probe_lost, p.stats.probe_delay, p.stats.probe_rate];
        for (i, f) in fields.iter().enumerate() {
            let at = 13 + 8 * i;
            out[at..at + 8].copy_from_slice(&to_fixed(*f).to_be_bytes());
        }
        out
    }

    pub fn decode(buf: &[u8]) -> Option<ProbePayload> {
        if buf.len() != PAYLOAD_LEN {
            return None;
        }
        let class = match buf[0] {
            0 => PacketClass::FtpData,
            1 => PacketClass::TcpAck,
            2 => PacketClass::Probe,
            3 => PacketClass::ProbeAck,
            _ => return None,
        };
        let sequence = u32::from_be_bytes(buf[1..5].try_into().ok()?);
        let timestamp_us = u64::from_be_bytes(buf[5..13].try_into().ok()?);
        let field = |i: usize| -> Option<f64> {
            let at = 13 + 8 * i;
            Some(from_fixed(i64::from_be_bytes(buf[at..at + 8].try_into().ok()?)))
        };
        Some(ProbePayload {
            class,
            sequence,
            timestamp_us,
            stats: ProbeStats {
                probe_lost: field(0)?,
                probe_delay: field(1)?,
                probe_rate: field(2)?,
            },
        })
    }

    pub fn to_hex(buf: &[u8]) -> String {
        buf.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    fn stats(lost: f64, delay: f64, rate: f64) -> ProbeStats {
        ProbeStats {
            probe_lost: lost,
            probe_delay: delay,
            probe_rate: rate,
        }
    }

    #[test]
    fn initial_train_shape() {
        let p = ProbeConfig::default();
        assert_eq!(p.x_ini(), 41);
        assert_eq!(p.initial_spacing(), SimTime::from_micros(2400));
        assert_eq!(p.initial_ack_timeout(), ms(200));
    }

    #[test]
    fn initial_criteria_table() {
        let thr = DecisionThresholds::default();
        let cases = [
            (Some(stats(0.0, 0.02, 5.0)), -60.0, PathChoice::Wifi),
            (Some(stats(0.0, 0.02, 4.9)), -60.0, PathChoice::Lte),
            (Some(stats(0.95, 0.02, 6.0)), -60.0, PathChoice::Lte),
            (Some(stats(0.0, 0.6, 6.0)), -60.0, PathChoice::Lte),
            (Some(stats(0.0, 0.02, 6.0)), -83.0, PathChoice::Lte),
            (Some(stats(0.0, 0.02, 6.0)), -82.0, PathChoice::Wifi),
            (None, -60.0, PathChoice::Lte),
        ];
        for (s, rssi, want) in cases {
            assert_eq!(evaluate_initial_criteria(s.as_ref(), rssi, &thr), want, "{s:?} {rssi}");
        }
    }

    fn ideal_train(delay_us: u64, last_extra_us: u64) -> InitialProbeMeter {
        let p = ProbeConfig::default();
        let mut m = InitialProbeMeter::default();
        let n = p.x_ini();
        for k in 0..n {
            let tx = SimTime::from_nanos(k * p.initial_spacing().as_nanos());
            let extra = if k + 1 == n { last_extra_us } else { 0 };
            m.on_probe(tx, tx + SimTime::from_micros(delay_us + extra), p.s_ini_bits);
        }
        m
    }

    #[test]
    fn ideal_train_under_each_estimator() {
        use ProbeRateEstimator::*;
        let m = ideal_train(500, 0);
        let s = m.stats(41, 12_000, Dispersion);
        assert_eq!(s.probe_lost, 0.0);
        assert!((s.probe_delay - 0.0005).abs() < 1e-12);
        assert_eq!(s.probe_rate, 5.0);
        // 41 probes over 40 spacings of 2.4 ms
        let s = m.stats(41, 12_000, ReceiveSpan);
        assert!((s.probe_rate - 41.0 * 12_000.0 / 0.096 / 1e6).abs() < 1e-9);
        let s = m.stats(41, 12_000, TestPeriod);
        assert!((s.probe_rate - 41.0 * 12_000.0 / 0.0965 / 1e6).abs() < 1e-9);
        // 12000 bits every 0.5 ms
        let s = m.stats(41, 12_000, PerProbe);
        assert!((s.probe_rate - 24.0).abs() < 1e-9);
        let thr = DecisionThresholds::default();
        for e in [Dispersion, ReceiveSpan, TestPeriod, PerProbe] {
            let s = m.stats(41, 12_000, e);
            assert_eq!(evaluate_initial_criteria(Some(&s), -50.0, &thr), PathChoice::Wifi, "{e:?}");
        }
    }

    #[test]
    fn held_back_tail_fails_receive_span() {
        let thr = DecisionThresholds::default();
        for (extra_us, want) in [(2_000, PathChoice::Wifi), (2_500, PathChoice::Lte)] {
            let s = ideal_train(200, extra_us).stats(41, 12_000, ProbeRateEstimator::ReceiveSpan);
            assert_eq!(evaluate_initial_criteria(Some(&s), -50.0, &thr), want, "{extra_us} us: {s:?}");
        }
    }

    #[test]
    fn per_probe_rate_falls_with_delay() {
        let thr = DecisionThresholds::default();
        // 12000 bits / 2.4 ms is exactly 5 Mbps
        let s = ideal_train(2_400, 0).stats(41, 12_000, ProbeRateEstimator::PerProbe);
        assert!((s.probe_rate - 5.0).abs() < 1e-9);
        assert_eq!(evaluate_initial_criteria(Some(&s), -50.0, &thr), PathChoice::Wifi);
        let s = ideal_train(3_000, 0).stats(41, 12_000, ProbeRateEstimator::PerProbe);
        assert_eq!(evaluate_initial_criteria(Some(&s), -50.0, &thr), PathChoice::Lte);
    }

    #[test]
    fn meter_loss_and_empty_train() {
        let mut m = InitialProbeMeter::default();
        let s = m.stats(41, 12_000, ProbeRateEstimator::ReceiveSpan);
        assert_eq!(s.probe_lost, 1.0);
        assert_eq!(s.probe_rate, 0.0);
        m.on_probe(ms(0), ms(1), 12_000);
        let s = m.stats(4, 12_000, ProbeRateEstimator::ReceiveSpan);
        assert_eq!(s.probe_lost, 0.75);
        assert_eq!(s.probe_rate, 0.0);
    }

    #[test]
    fn active_meter_samples() {
        assert_eq!(ucm_on_active_probe(15_000, ms(3)), 5.0);
        let mut m = ActiveProbeMeter::default();
        assert_eq!(m.on_probe(ms(10)), None);
        m.on_data(3_000);
        assert_eq!(m.on_probe(ms(13)), Some(1.0));
        m.on_data(100);
        assert_eq!(m.on_probe(ms(13)), None);
    }

    #[test]
    fn ewma_seeds_then_filters() {
        let mut e = Ewma::new(0.25);
        assert_eq!(e.update(8.0), 8.0);
        assert_eq!(e.update(0.0), 6.0);
        assert_eq!(e.update(4.0), 5.5);
        e.reset();
        assert_eq!(e.value(), None);
    }

    #[test]
    fn ewma_settle_count() {
        // 0.75^11 = 0.042 and 0.75^10 = 0.056
        assert_eq!(Ewma::settle_updates(0.25, 0.05), 11);
    }

    fn on_wifi(cfg: &RlmConfig) -> RcmUeState {
        let mut s = RcmUeState::new(cfg.ewma_alpha);
        let c = rcm_on_initial_result(&mut s, Some(&stats(0.0, 0.01, 6.0)), -50.0, SimTime::ZERO, cfg);
        assert_eq!(c, PathChoice::Wifi);
        s
    }

    #[test]
    fn stall_fires_on_third_missing_ack() {
        let cfg = RlmConfig::default();
        let mut s = on_wifi(&cfg);
        let mut g = SwitchGovernor::new(&cfg.governor);
        assert_eq!(rcm_on_missing_ack(&mut s, &mut g, ms(1000), 30.0, &cfg), Decision::Stay);
        assert_eq!(rcm_on_missing_ack(&mut s, &mut g, ms(1003), 30.0, &cfg), Decision::Stay);
        assert_eq!(s.path, DlPath::Wifi);
        assert_eq!(rcm_on_missing_ack(&mut s, &mut g, ms(1006), 30.0, &cfg), Decision::SwitchToLte);
        assert_eq!(s.path, DlPath::Lte);
    }

    #[test]
    fn ack_breaks_missing_streak() {
        let cfg = RlmConfig::default();
        let mut s = on_wifi(&cfg);
        let mut g = SwitchGovernor::new(&cfg.governor);
        rcm_on_missing_ack(&mut s, &mut g, ms(1000), 30.0, &cfg);
        rcm_on_missing_ack(&mut s, &mut g, ms(1003), 30.0, &cfg);
        rcm_on_probe_ack(&mut s, Some(20.0), &mut g, ms(1004), 30.0, &cfg);
        assert_eq!(rcm_on_missing_ack(&mut s, &mut g, ms(1006), 30.0, &cfg), Decision::Stay);
        assert_eq!(s.missing_ack_streak, 1);
    }

    #[test]
    fn low_report_parks_on_wifi_only() {
        let cfg = RlmConfig::default();
        let mut s = on_wifi(&cfg);
        let mut g = SwitchGovernor::new(&cfg.governor);
        let (d, _) = rcm_on_probe_ack(&mut s, Some(0.1), &mut g, ms(1000), 30.0, &cfg);
        assert_eq!(d, Decision::WifiOnlyMode);
        assert_eq!(s.path, DlPath::WifiOnly);
        assert!(!data_phase_tick(&mut s, ms(2000), &cfg.probe));
        assert!(rcm_on_traffic_resumed(&mut s, ms(2000), &cfg));
        assert_eq!(s.path, DlPath::Wifi);
        assert_eq!(s.ewma.value(), None);
    }

    #[test]
    fn congestion_switches_after_filter_drops() {
        let cfg = RlmConfig::default();
        let mut s = on_wifi(&cfg);
        let mut g = SwitchGovernor::new(&cfg.governor);
        let (d, _) = rcm_on_probe_ack(&mut s, Some(40.0), &mut g, ms(1000), 30.0, &cfg);
        assert_eq!(d, Decision::Stay);
        // 40 * 0.75^k + 1 * (1 - 0.75^k) < 5 needs k = 8
        let mut t = 1000;
        let mut k = 0;
        loop {
            t += 3;
            k += 1;
            let (d, cause) = rcm_on_probe_ack(&mut s, Some(1.0), &mut g, ms(t), 30.0, &cfg);
            if d != Decision::Stay {
                assert_eq!(d, Decision::SwitchToLte);
                assert_eq!(cause, Some(SwitchCause::Congestion));
                break;
            }
        }
        assert_eq!(k, 8);
    }

    #[test]
    fn governor_gap_and_admission() {
        let mut g = SwitchGovernor::new(&GovernorConfig::default());
        assert!(g.govern_switch(SwitchDirection::ToLte, ms(1000), 10.0));
        assert!(!g.govern_switch(SwitchDirection::ToLte, ms(1499), 10.0));
        assert!(g.govern_switch(SwitchDirection::ToWifi, ms(1500), 0.0));
        assert!(!g.govern_switch(SwitchDirection::ToLte, ms(3000), 1.9));
        assert!(g.govern_switch(SwitchDirection::ToLte, ms(3000), 2.0));
        assert_eq!((g.committed, g.denied), (3, 2));
    }

    #[test]
    fn denied_stall_retries_on_next_missing_ack() {
        let cfg = RlmConfig::default();
        let mut s = on_wifi(&cfg);
        let mut g = SwitchGovernor::new(&cfg.governor);
        g.last_switch_time = Some(ms(1000));
        for t in [1001, 1004] {
            rcm_on_missing_ack(&mut s, &mut g, ms(t), 30.0, &cfg);
        }
        assert!(matches!(rcm_on_missing_ack(&mut s, &mut g, ms(1007), 30.0, &cfg), Decision::Denied(_)));
        assert_eq!(rcm_on_missing_ack(&mut s, &mut g, ms(1500), 30.0, &cfg), Decision::SwitchToLte);
    }

    #[test]
    fn lte_ue_reprobes_and_returns() {
        let cfg = RlmConfig::default();
        let mut s = RcmUeState::new(cfg.ewma_alpha);
        let mut g = SwitchGovernor::new(&cfg.governor);
        rcm_on_initial_result(&mut s, None, -50.0, SimTime::ZERO, &cfg);
        assert_eq!(s.path, DlPath::Lte);
        assert!(!lte_reprobe_timer(&mut s, ms(1999)));
        assert!(lte_reprobe_timer(&mut s, ms(2000)));
        let d = rcm_on_reprobe_result(&mut s, Some(&stats(0.0, 0.01, 5.0)), -50.0, &mut g, ms(2200), &cfg);
        assert_eq!(d, Decision::SwitchToWifi);
        assert_eq!(s.path, DlPath::Wifi);
        assert!(data_phase_tick(&mut s, ms(2203), &cfg.probe));
        assert!(!data_phase_tick(&mut s, ms(2204), &cfg.probe));
    }

    #[test]
    fn wire_round_trip() {
        let p = wire::ProbePayload {
            class: crate::traffic::PacketClass::ProbeAck,
            sequence: 7,
            timestamp_us: 123_456,
            stats: stats(0.25, 0.5, 5.0),
        };
        let buf = wire::encode(&p);
        assert_eq!(buf.len(), wire::PAYLOAD_LEN);
        assert_eq!(wire::decode(&buf), Some(p));
        assert_eq!(&wire::to_hex(&buf)[..10], "0300000007");
        assert_eq!(wire::decode(&buf[1..]), None);
    }

    proptest! {
        #[test]
        fn ewma_stays_within_sample_range(samples in proptest::collection::vec(0.0f64..200.0, 1..200)) {
            let mut e = Ewma::new(0.25);
            let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for x in &samples {
                let v = e.update(*x);
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }

        #[test]
        fn ewma_converges_to_constant(start in 0.0f64..200.0, level in 0.0f64..200.0) {
            let mut e = Ewma::new(0.25);
            e.update(start);
            let k = Ewma::settle_updates(0.25, 0.05);
            let mut v = 0.0;
            for _ in 0..k {
                v = e.update(level);
            }
            prop_assert!((v - level).abs() <= 0.05 * (start - level).abs() + 1e-9);
        }

        #[test]
        fn governor_commits_spaced_by_gap(
            requests in proptest::collection::vec((0u64..20_000, any::<bool>(), 0.0f64..10.0), 1..100)
        ) {
            let mut reqs = requests;
            reqs.sort_by_key(|r| r.0);
            let mut g = SwitchGovernor::new(&GovernorConfig::default());
            let mut commits = Vec::new();
            for (t, to_lte, est) in reqs {
                let dir = if to_lte { SwitchDirection::ToLte } else { SwitchDirection::ToWifi };
                if g.govern_switch(dir, ms(t), est) {
                    prop_assert!(!(to_lte && est < 2.0));
                    commits.push(t);
                }
            }
            for w in commits.windows(2) {
                prop_assert!(w[1] - w[0] >= 500);
            }
        }

        #[test]
        fn stall_needs_exactly_x_stall(x_stall in 1u32..6) {
            let mut cfg = RlmConfig::default();
            cfg.probe.x_stall = x_stall;
            let mut s = on_wifi(&cfg);
            let mut g = SwitchGovernor::new(&cfg.governor);
            for k in 1..=x_stall {
                let d = rcm_on_missing_ack(&mut s, &mut g, ms(1000 + 3 * k as u64), 30.0, &cfg);
                prop_assert_eq!(d == Decision::SwitchToLte, k == x_stall);
            }
        }

        #[test]
        fn wire_round_trip_any(seq in any::<u32>(), ts in any::<u64>(), a in 0.0f64..1.0, b in 0.0f64..10.0, c in 0.0f64..1000.0) {
            let p = wire::ProbePayload {
                class: crate::traffic::PacketClass::Probe,
                sequence: seq,
                timestamp_us: ts,
                stats: stats(a, b, c),
            };
            let d = wire::decode(&wire::encode(&p)).unwrap();
            prop_assert_eq!(d.sequence, seq);
            prop_assert_eq!(d.timestamp_us, ts);
            prop_assert!((d.stats.probe_rate - c).abs() < 1e-9);
        }
    }
}

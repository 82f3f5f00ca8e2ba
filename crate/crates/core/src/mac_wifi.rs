//! CSMA/CA distributed coordination for one Wi-Fi channel.
//!
//! The channel object only tracks contention: who holds a backoff counter,
//! when the medium frees up, and who wins the next access. What a winner
//! actually sends is decided by the engine, which owns the queues.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::time::SimTime;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WifiMacParams {
    pub difs_us: u64,
    pub sifs_us: u64,
    pub slot_us: u64,
    pub txop_ms: f64,
    /// TXOP limit for UE uplink transmissions. Zero means one frame per
    /// channel access, the usual reading of a zero TXOP limit.
    pub ue_txop_ms: f64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub mac_ack_us: u64,
    pub phy_header_us: u64,
    /// Per-station AP buffer the BS keeps topped up, in bytes.
    pub ap_station_buffer_bytes: u64,
    pub capture: bool,
    pub capture_margin_db: f64,
    pub carrier_sense_dbm: f64,
}

impl Default for WifiMacParams {
    fn default() -> Self {
        WifiMacParams {
            difs_us: 34,
            sifs_us: 16,
            slot_us: 9,
            txop_ms: 3.0,
            ue_txop_ms: 0.0,
            cw_min: 15,
            cw_max: 1023,
            mac_ack_us: 44,
            phy_header_us: 40,
            ap_station_buffer_bytes: 64_000,
            capture: false,
            capture_margin_db: 10.0,
            carrier_sense_dbm: -82.0,
        }
    }
}

impl WifiMacParams {
    pub fn difs(&self) -> SimTime {
        SimTime::from_micros(self.difs_us)
    }
    pub fn sifs(&self) -> SimTime {
        SimTime::from_micros(self.sifs_us)
    }
    pub fn slot(&self) -> SimTime {
        SimTime::from_micros(self.slot_us)
    }
    pub fn txop(&self) -> SimTime {
        SimTime::from_secs_f64(self.txop_ms * 1e-3)
    }
    pub fn ue_txop(&self) -> SimTime {
        SimTime::from_secs_f64(self.ue_txop_ms * 1e-3)
    }
    pub fn mac_ack(&self) -> SimTime {
        SimTime::from_micros(self.mac_ack_us)
    }
    pub fn phy_header(&self) -> SimTime {
        SimTime::from_micros(self.phy_header_us)
    }

    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.sifs_us == 0 || self.difs_us <= self.sifs_us {
            return Err(("wifi.difs_us", "DIFS must exceed SIFS and SIFS must be positive".into()));
        }
        if self.slot_us == 0 {
            return Err(("wifi.slot_us", "must be positive".into()));
        }
        if !(self.txop_ms > 0.0) {
            return Err(("wifi.txop_ms", "must be positive".into()));
        }
        if !(self.ue_txop_ms >= 0.0) {
            return Err(("wifi.ue_txop_ms", "must not be negative".into()));
        }
        if self.cw_min > self.cw_max {
            return Err(("wifi.cw_min", "must not exceed cw_max".into()));
        }
        Ok(())
    }
}

/// MAC payload bytes that fit in one TXOP at `rate_mbps`.
pub fn txop_capacity_bytes(rate_mbps: f64, txop: SimTime) -> u64 {
    (rate_mbps * 1e6 * txop.as_secs_f64() / 8.0).floor() as u64
}

/// Airtime of a PPDU carrying `payload_bytes`.
pub fn ppdu_airtime(payload_bytes: u64, rate_mbps: f64, params: &WifiMacParams) -> SimTime {
    params.phy_header() + SimTime::airtime(payload_bytes * 8, rate_mbps * 1e6)
}

/// Medium occupancy of a successful exchange: PPDU, SIFS and the MAC ACK.
pub fn exchange_duration(payload_bytes: u64, rate_mbps: f64, params: &WifiMacParams) -> SimTime {
    ppdu_airtime(payload_bytes, rate_mbps, params) + params.sifs() + params.mac_ack()
}

/// Next contention window after a failed attempt: doubled, capped.
pub fn next_cw(cw: u32, cw_max: u32) -> u32 {
    (cw.saturating_mul(2) + 1).min(cw_max)
}

/// One overlapping frame as seen at its intended receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlappingFrame {
    pub signal_dbm: f64,
    /// Power of every other overlapping frame at this frame's receiver.
    pub interference_dbm: Vec<f64>,
    /// Half-duplex: a receiver that is itself transmitting hears nothing.
    pub receiver_transmitting: bool,
}

/// Outcome per frame of a set of same-channel overlapping transmissions.
///
/// A lone frame always survives. Otherwise every frame is lost unless
/// `capture_margin_db` is given and the frame exceeds the summed
/// interference at its receiver by at least that margin.
pub fn resolve_collision(frames: &[OverlappingFrame], capture_margin_db: Option<f64>) -> Vec<bool> {
    if frames.len() <= 1 {
        return vec![true; frames.len()];
    }
    frames
        .iter()
        .map(|f| {
            let Some(margin) = capture_margin_db else {
                return false;
            };
            if f.receiver_transmitting {
                return false;
            }
            let interference_mw: f64 = f.interference_dbm.iter().map(|p| 10f64.powf(p / 10.0)).sum();
            if interference_mw <= 0.0 {
                return true;
            }
            f.signal_dbm - 10.0 * interference_mw.log10() >= margin
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct Contender {
    pub node: usize,
    pub backoff: Option<u32>,
    pub cw: u32,
    pub retry_stage: u32,
    pub active: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelStats {
    pub busy: SimTime,
    pub successes: u64,
    pub collisions: u64,
    pub collided_frames: u64,
}

/// Outcome of an access slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Access {
    Single(usize),
    Collision(Vec<usize>),
}

/// Contention state of one channel. Every contender on a channel senses
/// every other one.
#[derive(Debug, Clone)]
pub struct WifiChannel {
    pub index: usize,
    contenders: Vec<Contender>,
    busy_until: SimTime,
    /// Slot boundary from which backoff counters are valid.
    countdown_origin: SimTime,
    /// Bumped whenever the scheduled access time may change.
    pub version: u64,
    pub stats: ChannelStats,
    difs: SimTime,
    slot: SimTime,
    cw_min: u32,
    cw_max: u32,
}

impl WifiChannel {
    pub fn new(index: usize, nodes: &[usize], params: &WifiMacParams) -> Self {
        WifiChannel {
            index,
            contenders: nodes
                .iter()
                .map(|&node| Contender {
                    node,
                    cw: params.cw_min,
                    ..Contender::default()
                })
                .collect(),
            busy_until: SimTime::ZERO,
            countdown_origin: params.difs(),
            version: 0,
            stats: ChannelStats::default(),
            difs: params.difs(),
            slot: params.slot(),
            cw_min: params.cw_min,
            cw_max: params.cw_max,
        }
    }

    pub fn contenders(&self) -> &[Contender] {
        &self.contenders
    }

    pub fn contender(&self, node: usize) -> Option<&Contender> {
        self.contenders.iter().find(|c| c.node == node)
    }

    fn slot_of(&self, node: usize) -> usize {
        self.contenders
            .iter()
            .position(|c| c.node == node)
            .expect("node is not a contender on this channel")
    }

    pub fn is_busy(&self, now: SimTime) -> bool {
        now < self.busy_until
    }

    pub fn busy_until(&self) -> SimTime {
        self.busy_until
    }

    /// Counts down every active counter by the whole idle slots elapsed
    /// since the countdown origin.
    pub fn sync(&mut self, now: SimTime) {
        if now < self.countdown_origin || self.is_busy(now) {
            return;
        }
        let elapsed = (now - self.countdown_origin).as_nanos() / self.slot.as_nanos();
        if elapsed == 0 {
            return;
        }
        let min_counter = self
            .contenders
            .iter()
            .filter(|c| c.active)
            .filter_map(|c| c.backoff)
            .min();
        let step = match min_counter {
            Some(m) => elapsed.min(u64::from(m)),
            None => elapsed,
        };
        // Idle stations keep running their post-backoff.
        for c in self.contenders.iter_mut() {
            if let Some(b) = c.backoff.as_mut() {
                *b = b.saturating_sub(step as u32);
            }
        }
        self.countdown_origin += SimTime::from_nanos(step * self.slot.as_nanos());
    }

    /// Marks a node as having (or not having) something to send.
    pub fn set_active<R: Rng + ?Sized>(&mut self, node: usize, active: bool, now: SimTime, rng: &mut R) {
        self.sync(now);
        let i = self.slot_of(node);
        let cw_max = self.cw_max;
        // A frame arriving to an idle medium needs no backoff.
        let idle = now >= self.busy_until;
        let c = &mut self.contenders[i];
        if c.active == active {
            return;
        }
        c.active = active;
        if active && c.backoff.is_none() {
            c.backoff = Some(if idle { 0 } else { rng.gen_range(0..=c.cw.min(cw_max)) });
        }
        self.version += 1;
    }

    /// When the next access happens, if anyone is waiting. A station whose
    /// post-backoff already expired on an idle medium goes at once.
    pub fn next_access(&self, now: SimTime) -> Option<SimTime> {
        let min = self
            .contenders
            .iter()
            .filter(|c| c.active)
            .filter_map(|c| c.backoff)
            .min()?;
        let origin = self.countdown_origin.max(self.busy_until + self.difs);
        Some((origin + SimTime::from_nanos(u64::from(min) * self.slot.as_nanos())).max(now))
    }

    /// Resolves the access slot at `now`: whoever reached zero transmits.
    pub fn contend(&mut self, now: SimTime) -> Option<Access> {
        self.sync(now);
        let zeros: Vec<usize> = self
            .contenders
            .iter()
            .filter(|c| c.active && c.backoff == Some(0))
            .map(|c| c.node)
            .collect();
        match zeros.len() {
            0 => None,
            1 => Some(Access::Single(zeros[0])),
            _ => Some(Access::Collision(zeros)),
        }
    }

    /// Occupies the medium from `start` to `end`.
    pub fn occupy(&mut self, start: SimTime, end: SimTime) {
        self.stats.busy += end - start;
        self.busy_until = end;
        self.countdown_origin = end + self.difs;
        self.version += 1;
    }

    pub fn on_success<R: Rng + ?Sized>(&mut self, node: usize, rng: &mut R) {
        self.stats.successes += 1;
        let i = self.slot_of(node);
        let c = &mut self.contenders[i];
        c.cw = self.cw_min;
        c.retry_stage = 0;
        c.backoff = Some(rng.gen_range(0..=c.cw));
    }

    pub fn on_collision<R: Rng + ?Sized>(&mut self, nodes: &[usize], rng: &mut R) {
        self.stats.collisions += 1;
        self.stats.collided_frames += nodes.len() as u64;
        for &n in nodes {
            let i = self.slot_of(n);
            let cw_max = self.cw_max;
            let c = &mut self.contenders[i];
            c.cw = next_cw(c.cw, cw_max);
            c.retry_stage += 1;
            c.backoff = Some(rng.gen_range(0..=c.cw));
        }
    }

    /// A winner that could not send (e.g. outage) draws a fresh counter
    /// without touching its window.
    pub fn defer<R: Rng + ?Sized>(&mut self, node: usize, rng: &mut R) {
        let i = self.slot_of(node);
        let c = &mut self.contenders[i];
        c.backoff = Some(rng.gen_range(1..=c.cw.max(1)));
        self.version += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{self, Purpose};
    use rand::rngs::mock::StepRng;

    fn params() -> WifiMacParams {
        WifiMacParams::default()
    }

    #[test]
    fn txop_capacity_at_peak() {
        assert_eq!(txop_capacity_bytes(140.0, SimTime::from_millis(3)), 52_500);
    }

    #[test]
    fn queue_limited_exchange() {
        let p = params();
        let d = exchange_duration(1568, 140.0, &p);
        let expected = SimTime::from_micros(40) + SimTime::airtime(1568 * 8, 140e6) + SimTime::from_micros(16 + 44);
        assert_eq!(d, expected);
        assert!(d < p.txop());
    }

    #[test]
    fn lone_contender_waits_difs_plus_backoff() {
        let p = params();
        let mut rng = seeds::stream(5, Purpose::Backoff);
        let mut ch = WifiChannel::new(0, &[0], &p);
        ch.set_active(0, true, SimTime::ZERO, &mut rng);
        let b = ch.contender(0).unwrap().backoff.unwrap();
        let t = ch.next_access(SimTime::ZERO).unwrap();
        assert_eq!(t, p.difs() + SimTime::from_micros(9 * u64::from(b)));
        assert_eq!(ch.contend(t), Some(Access::Single(0)));
    }

    #[test]
    fn expired_post_backoff_sends_at_once() {
        let p = params();
        let mut rng = StepRng::new(0, 0);
        let mut ch = WifiChannel::new(0, &[0], &p);
        ch.set_active(0, true, SimTime::ZERO, &mut rng);
        let t = ch.next_access(SimTime::ZERO).unwrap();
        ch.occupy(t, t + SimTime::from_micros(200));
        ch.on_success(0, &mut rng);
        ch.set_active(0, false, t, &mut rng);
        let later = SimTime::from_millis(5) + SimTime::from_nanos(1234);
        ch.set_active(0, true, later, &mut rng);
        assert_eq!(ch.next_access(later), Some(later));
        assert_eq!(ch.contend(later), Some(Access::Single(0)));
    }

    #[test]
    fn equal_backoff_collides_and_doubles() {
        let p = params();
        // StepRng(0, 0) always yields 0, so both draw backoff 0.
        let mut rng = StepRng::new(0, 0);
        let mut ch = WifiChannel::new(0, &[0, 1], &p);
        ch.set_active(0, true, SimTime::ZERO, &mut rng);
        ch.set_active(1, true, SimTime::ZERO, &mut rng);
        let t = ch.next_access(SimTime::ZERO).unwrap();
        assert_eq!(ch.contend(t), Some(Access::Collision(vec![0, 1])));
        ch.on_collision(&[0, 1], &mut rng);
        for c in ch.contenders() {
            assert_eq!(c.cw, 31);
            assert_eq!(c.retry_stage, 1);
        }
        assert_eq!(ch.stats.collisions, 1);
    }

    #[test]
    fn cw_is_capped() {
        let mut cw = 15;
        for _ in 0..20 {
            cw = next_cw(cw, 1023);
        }
        assert_eq!(cw, 1023);
    }

    #[test]
    fn counters_freeze_while_busy() {
        let p = params();
        let mut rng = seeds::stream(9, Purpose::Backoff);
        let mut ch = WifiChannel::new(0, &[0, 1], &p);
        ch.set_active(0, true, SimTime::ZERO, &mut rng);
        ch.set_active(1, true, SimTime::ZERO, &mut rng);
        let before: Vec<_> = ch.contenders().iter().map(|c| c.backoff.unwrap()).collect();
        let t = ch.next_access(SimTime::ZERO).unwrap();
        let winner = match ch.contend(t) {
            Some(Access::Single(n)) => n,
            Some(Access::Collision(_)) => return,
            None => unreachable!(),
        };
        let loser = 1 - winner;
        let residual = ch.contender(loser).unwrap().backoff.unwrap();
        assert_eq!(residual, before[loser] - before[winner]);
        ch.occupy(t, t + SimTime::from_millis(3));
        ch.on_success(winner, &mut rng);
        ch.sync(t + SimTime::from_millis(2));
        assert_eq!(ch.contender(loser).unwrap().backoff.unwrap(), residual);
    }

    #[test]
    fn collision_resolution() {
        let frame = |s: f64, i: f64| OverlappingFrame {
            signal_dbm: s,
            interference_dbm: vec![i],
            receiver_transmitting: false,
        };
        let pair = [frame(-50.0, -65.0), frame(-65.0, -50.0)];
        assert_eq!(resolve_collision(&pair, None), vec![false, false]);
        assert_eq!(resolve_collision(&pair, Some(10.0)), vec![true, false]);
        assert_eq!(resolve_collision(&pair[..1], None), vec![true]);
        let deaf = [
            OverlappingFrame { receiver_transmitting: true, ..frame(-40.0, -90.0) },
            frame(-90.0, -40.0),
        ];
        assert_eq!(resolve_collision(&deaf, Some(10.0)), vec![false, false]);
    }
}

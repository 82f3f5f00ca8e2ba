//! FTP model 2 sessions, TCP ACK generation and IPsec framing.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::time::SimTime;

pub const IPSEC_HEADER_BYTES: u32 = 66;
pub const IPSEC_TRAILER_BYTES: u32 = 2;
pub const IPSEC_BLOCK_BYTES: u32 = 16;
pub const TCP_ACK_BYTES: u32 = 40;
pub const DATA_PACKETS_PER_ACK: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Dl,
    Ul,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PacketClass {
    FtpData,
    TcpAck,
    Probe,
    ProbeAck,
}

impl PacketClass {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketClass::FtpData => "FTP_DATA",
            PacketClass::TcpAck => "TCP_ACK",
            PacketClass::Probe => "PROBE",
            PacketClass::ProbeAck => "PROBE_ACK",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PathKind {
    Lte,
    Wifi,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Lte => "LTE",
            PathKind::Wifi => "WiFi",
        }
    }
}

/// An IP datagram in flight. `size` is the on-air size including any tunnel
/// framing; `inner_size` is the original datagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub ue: usize,
    pub size: u32,
    pub inner_size: u32,
    pub class: PacketClass,
    pub direction: Direction,
    pub path: PathKind,
    pub created_at: SimTime,
    pub sequence: u64,
}

impl Packet {
    pub fn bits(&self) -> u64 {
        u64::from(self.size) * 8
    }

    /// Application goodput carried by this packet.
    pub fn app_bits(&self) -> u64 {
        match self.class {
            PacketClass::FtpData => u64::from(self.inner_size) * 8,
            _ => 0,
        }
    }

    pub fn overhead_bits(&self) -> u64 {
        self.bits() - self.app_bits()
    }
}

/// Packet sizes of a file cut at `mtu`: full packets plus one remainder.
pub fn segment_file(file_size: u64, mtu: u32) -> Vec<u32> {
    assert!(mtu > 0, "mtu must be positive");
    let mtu64 = u64::from(mtu);
    let full = file_size / mtu64;
    let rem = (file_size % mtu64) as u32;
    let mut sizes = vec![mtu; full as usize];
    if rem > 0 {
        sizes.push(rem);
    }
    sizes
}

pub fn packet_count(file_size: u64, mtu: u32) -> u64 {
    file_size.div_ceil(u64::from(mtu))
}

/// Padding that makes inner + trailer a multiple of the cipher block.
pub fn ipsec_padding(inner_size: u32) -> u32 {
    (IPSEC_BLOCK_BYTES - (inner_size + IPSEC_TRAILER_BYTES) % IPSEC_BLOCK_BYTES) % IPSEC_BLOCK_BYTES
}

pub fn ipsec_encapsulate(inner_size: u32) -> u32 {
    inner_size + IPSEC_HEADER_BYTES + ipsec_padding(inner_size)
}

/// Number of cumulative TCP ACKs owed for `delivered` data packets.
pub fn generate_tcp_acks(delivered: u64) -> u64 {
    delivered / DATA_PACKETS_PER_ACK
}

/// Emits one ACK for every third data packet delivered.
#[derive(Debug, Clone, Default)]
pub struct AckCounter {
    delivered: u64,
}

impl AckCounter {
    /// Records one delivered data packet; true when an ACK is due.
    pub fn on_data_delivered(&mut self) -> bool {
        self.delivered += 1;
        self.delivered.is_multiple_of(DATA_PACKETS_PER_ACK)
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }
}

pub fn next_reading_time<R: Rng + ?Sized>(rng: &mut R, mean_secs: f64) -> f64 {
    let exp = Exp::new(1.0 / mean_secs).expect("mean reading time must be positive");
    loop {
        let t = exp.sample(rng);
        if t > 0.0 {
            return t;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficModel {
    /// Bidirectional FTP model 2.
    Ftp,
    /// Endless DL source with no UL files; used for peak-rate calibration.
    FullBuffer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    pub model: TrafficModel,
    pub dl_file_bytes: u64,
    pub ul_file_bytes: u64,
    pub mean_reading_time: f64,
    pub mtu: u32,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            model: TrafficModel::Ftp,
            dl_file_bytes: 500_000,
            ul_file_bytes: 250_000,
            mean_reading_time: 0.1,
            mtu: 1500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    Reading,
    Transferring,
}

/// One direction of one UE's FTP session.
///
/// Packets are cut from the current file lazily as the carrying MAC asks for
/// them. The file completes when its last byte is delivered, and only then
/// does the reading timer for the next file start.
#[derive(Debug, Clone)]
pub struct FtpSession {
    pub ue: usize,
    pub direction: Direction,
    pub file_size: u64,
    pub mean_reading_time: f64,
    pub state: SessionState,
    /// Bytes not yet handed to a MAC.
    pub bytes_unsent: u64,
    /// Bytes handed out but not yet delivered.
    pub bytes_in_flight: u64,
    pub file_started: SimTime,
    pub files_completed: u64,
    next_seq: u64,
    endless: bool,
}

impl FtpSession {
    pub fn new(ue: usize, direction: Direction, file_size: u64, mean_reading_time: f64) -> Self {
        FtpSession {
            ue,
            direction,
            file_size,
            mean_reading_time,
            state: SessionState::Reading,
            bytes_unsent: 0,
            bytes_in_flight: 0,
            file_started: SimTime::ZERO,
            files_completed: 0,
            next_seq: 0,
            endless: false,
        }
    }

    pub fn endless(ue: usize, direction: Direction) -> Self {
        let mut s = FtpSession::new(ue, direction, u64::MAX, 0.0);
        s.endless = true;
        s.state = SessionState::Transferring;
        s.bytes_unsent = u64::MAX;
        s
    }

    pub fn start_file(&mut self, now: SimTime) {
        debug_assert_eq!(self.state, SessionState::Reading);
        self.state = SessionState::Transferring;
        self.bytes_unsent = self.file_size;
        self.bytes_in_flight = 0;
        self.file_started = now;
    }

    pub fn has_unsent(&self) -> bool {
        self.state == SessionState::Transferring && self.bytes_unsent > 0
    }

    pub fn is_active(&self) -> bool {
        self.state == SessionState::Transferring
    }

    /// Cuts the next datagram (inner size, sequence) off the file.
    pub fn take_packet(&mut self, mtu: u32) -> Option<(u32, u64)> {
        if !self.has_unsent() {
            return None;
        }
        let size = self.bytes_unsent.min(u64::from(mtu)) as u32;
        if !self.endless {
            self.bytes_unsent -= u64::from(size);
            self.bytes_in_flight += u64::from(size);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        Some((size, seq))
    }

    /// Records delivery of `inner_size` bytes; true when the file completed.
    pub fn on_delivered(&mut self, inner_size: u32) -> bool {
        if self.endless {
            return false;
        }
        self.bytes_in_flight -= u64::from(inner_size);
        if self.bytes_unsent == 0 && self.bytes_in_flight == 0 && self.state == SessionState::Transferring {
            self.state = SessionState::Reading;
            self.files_completed += 1;
            return true;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::{self, Purpose};

    /// Smallest pad making inner + 2 + pad a multiple of 16, by search.
    fn pad_oracle(inner: u32) -> u32 {
        (0..16).find(|p| (inner + 2 + p).is_multiple_of(16)).unwrap()
    }

    #[test]
    fn ipsec_examples() {
        assert_eq!(ipsec_encapsulate(1500), 1568);
        assert_eq!(ipsec_encapsulate(46), 112);
        assert_eq!(ipsec_encapsulate(100), 176);
        for inner in 1..=3000 {
            assert_eq!(ipsec_encapsulate(inner), inner + 66 + pad_oracle(inner));
        }
    }

    #[test]
    fn segmentation() {
        let s = segment_file(500_000, 1500);
        assert_eq!(s.len(), 334);
        assert_eq!(s.iter().filter(|&&x| x == 1500).count(), 333);
        assert_eq!(*s.last().unwrap(), 500);
        assert_eq!(segment_file(1500, 1500), vec![1500]);
        assert_eq!(segment_file(1, 1500), vec![1]);
        assert_eq!(packet_count(500_000, 1500), 334);
    }

    #[test]
    fn ack_ratio() {
        assert_eq!(generate_tcp_acks(3), 1);
        assert_eq!(generate_tcp_acks(2), 0);
        assert_eq!(generate_tcp_acks(334), 111);
        let mut c = AckCounter::default();
        let acks = (0..334).filter(|_| c.on_data_delivered()).count();
        assert_eq!(acks, 111);
    }

    #[test]
    fn reading_time_mean() {
        let mut rng = seeds::stream(3, Purpose::Traffic);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let t = next_reading_time(&mut rng, 0.1);
            assert!(t > 0.0);
            sum += t;
        }
        let mean = sum / n as f64;
        assert!((0.099..=0.101).contains(&mean), "mean {mean}");
        // 4 Mbit every 0.1 s on average when transfers are instantaneous.
        let offered_mbps = 500_000.0 * 8.0 / mean / 1e6;
        assert!((offered_mbps - 40.0).abs() < 0.5);
    }

    #[test]
    fn session_lifecycle() {
        let mut s = FtpSession::new(0, Direction::Dl, 3100, 0.1);
        assert!(s.take_packet(1500).is_none());
        s.start_file(SimTime::ZERO);
        let sizes: Vec<u32> = std::iter::from_fn(|| s.take_packet(1500).map(|p| p.0)).collect();
        assert_eq!(sizes, vec![1500, 1500, 100]);
        assert!(!s.on_delivered(1500));
        assert!(!s.on_delivered(100));
        assert!(s.on_delivered(1500));
        assert_eq!(s.state, SessionState::Reading);
        assert_eq!(s.files_completed, 1);
    }
}

//! Discrete-event execution of one drop, and the campaign loop around it.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{doppler_hz, link_rate_mbps, path_loss_db, sinr_db, thermal_noise_dbm, FadingProcess, LinkRealization, RateTable};
use crate::config::CampaignConfig;
use crate::error::{Error, Result};
use crate::mac_lte::{estimate_post_switch_throughput, RoundRobin};
use crate::mac_wifi::{exchange_duration, txop_capacity_bytes, Access, WifiChannel};
use crate::metrics::{mbps, CellSummary, DropResult, SwitchEvent, UeLedger};
use crate::rlm::{self, ActiveProbeMeter, Decision, DlPath, InitialProbeMeter, Phase, ProbeStats, RcmUeState, SwitchDirection, SwitchGovernor};
use crate::scenario::{generate_drop, Drop};
use crate::seeds::{self, Purpose};
use crate::time::SimTime;
use crate::trace::TraceRecord;
use crate::traffic::{ipsec_encapsulate, AckCounter, Direction, FtpSession, Packet, PacketClass, PathKind, TrafficModel, TCP_ACK_BYTES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    LteOnly,
    WifiOnly,
    Lwip,
    Boost,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::LteOnly, Mode::WifiOnly, Mode::Lwip, Mode::Boost];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::LteOnly => "lte_only",
            Mode::WifiOnly => "wifi_only",
            Mode::Lwip => "lwip",
            Mode::Boost => "boost",
        }
    }

    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "lte_only" | "lte" => Ok(Mode::LteOnly),
            "wifi_only" | "wifi" => Ok(Mode::WifiOnly),
            "lwip" => Ok(Mode::Lwip),
            "boost" => Ok(Mode::Boost),
            other => Err(Error::Other(format!("unknown mode `{other}`"))),
        }
    }
}

/// Path a packet takes. `dl_path` is the UE's current steering decision and
/// only matters for downlink traffic under `Boost`.
pub fn route_packet(mode: Mode, class: PacketClass, direction: Direction, dl_path: DlPath) -> PathKind {
    match (mode, class, direction) {
        (Mode::LteOnly, _, _) => PathKind::Lte,
        (Mode::WifiOnly, _, _) => PathKind::Wifi,
        (_, PacketClass::Probe, _) => PathKind::Wifi,
        (_, _, Direction::Ul) => PathKind::Lte,
        (Mode::Lwip, _, Direction::Dl) => PathKind::Wifi,
        (Mode::Boost, _, Direction::Dl) => match dl_path {
            DlPath::Lte => PathKind::Lte,
            DlPath::Wifi | DlPath::WifiOnly => PathKind::Wifi,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    LteTti,
    WifiAccess { channel: usize, version: u64 },
    WifiTxEnd { channel: usize },
    FileArrival { ue: usize, direction: Direction },
    TrainProbe { ue: usize, train: u64, index: u64 },
    TrainTimeout { ue: usize, train: u64 },
    DataProbe { ue: usize, generation: u64 },
    ProbeDeadline { ue: usize, generation: u64, sequence: u64 },
    Reprobe { ue: usize, generation: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: SimTime,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

/// Time-ordered queue with FIFO tie-break among equal times.
#[derive(Debug, Default)]
struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    fn push(&mut self, time: SimTime, kind: EventKind) {
        self.heap.push(Event {
            time,
            seq: self.next_seq,
            kind,
        });
        self.next_seq += 1;
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }
}

/// Probe ACK contents as carried back to the controller.
#[derive(Debug, Clone, Copy)]
enum AckPayload {
    Train { train: u64, stats: ProbeStats },
    Data { generation: u64, up_to: u64, u_avg: Option<f64> },
}

#[derive(Debug)]
struct ProbeTrain {
    id: u64,
    reprobe: bool,
    done: bool,
}

struct UeState {
    ap: Option<usize>,
    wifi_node: usize,
    dl: FtpSession,
    ul: Option<FtpSession>,
    dl_active_since: Option<SimTime>,
    ledger: UeLedger,
    /// ACKs the UE owes for downlink data, and the network owes for uplink.
    dl_acks: AckCounter,
    ul_acks: AckCounter,
    lte_dl: VecDeque<Packet>,
    lte_dl_head_sent: u64,
    lte_ul: VecDeque<Packet>,
    lte_ul_head_sent: u64,
    /// Per-station queue at the serving AP.
    ap_queue: VecDeque<Packet>,
    ap_ftp_bytes: u64,
    /// Uplink queue of the UE's own Wi-Fi interface.
    wifi_ul: VecDeque<Packet>,
    wifi_ul_ftp_bytes: u64,
    link_ap: Option<LinkRealization>,
    link_bs: LinkRealization,
    lte_mean_rate: f64,
    // Controller side.
    rcm: RcmUeState,
    connected: bool,
    train: Option<ProbeTrain>,
    next_train_id: u64,
    generation: u64,
    probe_seq: u64,
    acked_up_to: Option<u64>,
    // UE agent side.
    train_meter: InitialProbeMeter,
    train_meter_id: u64,
    active_meter: ActiveProbeMeter,
    pending_acks: VecDeque<AckPayload>,
}

impl UeState {
    fn dl_path(&self) -> DlPath {
        self.rcm.path
    }
}

struct ApState {
    channel: usize,
    wifi_node: usize,
    ues: Vec<usize>,
    rr_next: usize,
}

struct Ppdu {
    node: usize,
    packets: Vec<Packet>,
    cell: usize,
}

struct ChannelState {
    mac: WifiChannel,
    in_flight: Vec<Ppdu>,
    collided: bool,
    tx_active: bool,
}

const TRAIN_FLAG: u64 = 1 << 63;

fn train_sequence(train: u64, index: u64) -> u64 {
    TRAIN_FLAG | (train << 24) | index
}

fn split_train_sequence(seq: u64) -> Option<(u64, u64)> {
    (seq & TRAIN_FLAG != 0).then_some(((seq & !TRAIN_FLAG) >> 24, seq & 0xFF_FFFF))
}

/// Drop-level ledgers that are not per UE.
#[derive(Default)]
struct Totals {
    cell_dl_bits: Vec<u64>,
    overhead_bits: u64,
    switches: Vec<SwitchEvent>,
    denied: u64,
    wifi_only_entries: u64,
    trains_passed: u64,
    trains_failed: u64,
    events: u64,
}

struct Sim<'a> {
    cfg: &'a CampaignConfig,
    mode: Mode,
    drop: &'a Drop,
    now: SimTime,
    end: SimTime,
    queue: EventQueue,
    ues: Vec<UeState>,
    aps: Vec<ApState>,
    channels: Vec<ChannelState>,
    lte_dl_rr: RoundRobin,
    lte_ul_rr: RoundRobin,
    governor: SwitchGovernor,
    wifi_table: RateTable,
    lte_table: RateTable,
    traffic_rngs: Vec<ChaCha8Rng>,
    backoff_rng: ChaCha8Rng,
    fading: bool,
    totals: Totals,
    trace: Option<&'a mut dyn Write>,
}

/// Options for a single drop beyond the campaign configuration.
#[derive(Default)]
pub struct DropOptions<'a> {
    pub drop_index: u64,
    pub trace: Option<&'a mut dyn Write>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a CampaignConfig, mode: Mode, drop: &'a Drop, duration: SimTime, trace: Option<&'a mut dyn Write>) -> Self {
        let sc = &cfg.scenario;
        let n_ues = drop.n_ues();
        let n_aps = drop.n_aps();
        let mut wifi_table = RateTable::wifi_default();
        wifi_table.calibration_scale = cfg.channel.wifi_scale;
        let mut lte_table = RateTable::lte_default();
        lte_table.calibration_scale = cfg.channel.lte_scale;
        let block = SimTime::from_secs_f64(cfg.channel.fading_block_ms * 1e-3);
        let uses_wifi = mode != Mode::LteOnly;
        let ue_contends = mode == Mode::WifiOnly;

        let mut ues = Vec::with_capacity(n_ues);
        let mut traffic_rngs = Vec::with_capacity(2 * n_ues);
        for u in 0..n_ues {
            let pos = drop.ue_positions[u];
            let ap = if uses_wifi { drop.ue_ap_association[u] } else { None };
            let link_ap = ap.map(|k| LinkRealization {
                path_loss_db: path_loss_db(pos.distance(&sc.geometry.ap_positions[k]), sc.wifi_carrier_ghz),
                shadowing_db: drop.shadowing.ue_ap[u][k],
                carrier_ghz: sc.wifi_carrier_ghz,
                bandwidth_mhz: cfg.channel.wifi_bandwidth_mhz,
                fading: FadingProcess::new(
                    seeds::sub_seed(drop.seed, Purpose::Fading, 2 * u as u64),
                    doppler_hz(cfg.channel.ue_speed_kmh, sc.wifi_carrier_ghz),
                    block,
                ),
            });
            let link_bs = LinkRealization {
                path_loss_db: path_loss_db(pos.distance(&sc.geometry.bs_position), sc.lte_carrier_ghz),
                shadowing_db: drop.shadowing.ue_bs[u],
                carrier_ghz: sc.lte_carrier_ghz,
                bandwidth_mhz: cfg.lte.dl_bandwidth_mhz,
                fading: FadingProcess::new(
                    seeds::sub_seed(drop.seed, Purpose::Fading, 2 * u as u64 + 1),
                    doppler_hz(cfg.channel.ue_speed_kmh, sc.lte_carrier_ghz),
                    block,
                ),
            };
            let n = &sc.nodes;
            let mean_sinr = sinr_db(
                link_bs.mean_rx_dbm(n.bs_tx_power, n.bs_antenna_gain + n.ue_antenna_gain),
                &[],
                thermal_noise_dbm(link_bs.bandwidth_mhz, n.ue_noise_figure),
            );
            let lte_mean_rate = link_rate_mbps(mean_sinr, &lte_table) * (1.0 - cfg.lte.overhead_fraction);
            let t = &cfg.traffic;
            let (dl, ul) = match t.model {
                TrafficModel::Ftp => (
                    FtpSession::new(u, Direction::Dl, t.dl_file_bytes, t.mean_reading_time),
                    (t.ul_file_bytes > 0).then(|| FtpSession::new(u, Direction::Ul, t.ul_file_bytes, t.mean_reading_time)),
                ),
                TrafficModel::FullBuffer => (FtpSession::endless(u, Direction::Dl), None),
            };
            for d in 0..2 {
                traffic_rngs.push(seeds::stream(seeds::sub_seed(drop.seed, Purpose::Traffic, (2 * u + d) as u64), Purpose::Traffic));
            }
            ues.push(UeState {
                ap,
                wifi_node: n_aps + u,
                dl,
                ul,
                dl_active_since: None,
                ledger: UeLedger::default(),
                dl_acks: AckCounter::default(),
                ul_acks: AckCounter::default(),
                lte_dl: VecDeque::new(),
                lte_dl_head_sent: 0,
                lte_ul: VecDeque::new(),
                lte_ul_head_sent: 0,
                ap_queue: VecDeque::new(),
                ap_ftp_bytes: 0,
                wifi_ul: VecDeque::new(),
                wifi_ul_ftp_bytes: 0,
                link_ap,
                link_bs,
                lte_mean_rate,
                rcm: RcmUeState::new(cfg.rlm.ewma_alpha),
                connected: false,
                train: None,
                next_train_id: 0,
                generation: 0,
                probe_seq: 0,
                acked_up_to: None,
                train_meter: InitialProbeMeter::default(),
                train_meter_id: u64::MAX,
                active_meter: ActiveProbeMeter::default(),
                pending_acks: VecDeque::new(),
            });
        }

        let aps: Vec<ApState> = (0..n_aps)
            .map(|k| ApState {
                channel: drop.ap_channels[k],
                wifi_node: k,
                ues: (0..n_ues).filter(|&u| ues[u].ap == Some(k)).collect(),
                rr_next: 0,
            })
            .collect();
        let n_channels = drop.ap_channels.iter().map(|c| c + 1).max().unwrap_or(0);
        let channels = (0..n_channels)
            .map(|c| {
                let mut nodes: Vec<usize> = aps.iter().filter(|a| a.channel == c).map(|a| a.wifi_node).collect();
                if ue_contends {
                    for a in aps.iter().filter(|a| a.channel == c) {
                        nodes.extend(a.ues.iter().map(|&u| ues[u].wifi_node));
                    }
                }
                ChannelState {
                    mac: WifiChannel::new(c, &nodes, &cfg.wifi),
                    in_flight: Vec::new(),
                    collided: false,
                    tx_active: false,
                }
            })
            .collect();

        Sim {
            cfg,
            mode,
            drop,
            now: SimTime::ZERO,
            end: duration,
            queue: EventQueue::default(),
            ues,
            aps,
            channels,
            lte_dl_rr: RoundRobin::new(n_ues),
            lte_ul_rr: RoundRobin::new(n_ues),
            governor: SwitchGovernor::new(&cfg.rlm.governor),
            wifi_table,
            lte_table,
            traffic_rngs,
            backoff_rng: seeds::stream(drop.seed, Purpose::Backoff),
            fading: cfg.channel.fading,
            totals: Totals {
                cell_dl_bits: vec![0; 1 + n_aps],
                ..Totals::default()
            },
            trace,
        }
    }

    fn schedule(&mut self, at: SimTime, kind: EventKind) {
        if at <= self.end {
            self.queue.push(at, kind);
        }
    }

    fn reading_time(&mut self, ue: usize, direction: Direction) -> SimTime {
        let idx = 2 * ue + usize::from(direction == Direction::Ul);
        let mean = self.cfg.traffic.mean_reading_time;
        if mean <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime::from_secs_f64(crate::traffic::next_reading_time(&mut self.traffic_rngs[idx], mean))
    }

    // ---- radio ----

    fn rx_dbm(fading: bool, link: &mut LinkRealization, power: f64, gains: f64, at: SimTime) -> f64 {
        if fading {
            link.rx_dbm(power, gains, at)
        } else {
            link.mean_rx_dbm(power, gains)
        }
    }

    fn wifi_rate(&mut self, ue: usize, direction: Direction) -> f64 {
        let n = &self.cfg.scenario.nodes;
        let (power, nf) = match direction {
            Direction::Dl => (n.ap_tx_power, n.ue_noise_figure),
            Direction::Ul => (n.ue_tx_power, n.ap_noise_figure),
        };
        let gains = n.ap_antenna_gain + n.ue_antenna_gain;
        let now = self.now;
        let fading = self.fading;
        let Some(link) = self.ues[ue].link_ap.as_mut() else {
            return 0.0;
        };
        let rx = Self::rx_dbm(fading, link, power, gains, now);
        let noise = thermal_noise_dbm(link.bandwidth_mhz, nf);
        let rate = link_rate_mbps(sinr_db(rx, &[], noise), &self.wifi_table);
        match self.cfg.channel.wifi_throttle {
            Some(t) if now >= SimTime::from_secs_f64(t.onset_s) => rate.min(t.rate_mbps),
            _ => rate,
        }
    }

    fn lte_dl_rate(&mut self, ue: usize) -> f64 {
        let n = &self.cfg.scenario.nodes;
        let gains = n.bs_antenna_gain + n.ue_antenna_gain;
        let (now, fading) = (self.now, self.fading);
        let link = &mut self.ues[ue].link_bs;
        let rx = Self::rx_dbm(fading, link, n.bs_tx_power, gains, now);
        let noise = thermal_noise_dbm(link.bandwidth_mhz, n.ue_noise_figure);
        link_rate_mbps(sinr_db(rx, &[], noise), &self.lte_table)
    }

    // ---- routing and queues ----

    fn route(&self, ue: usize, class: PacketClass, direction: Direction) -> Option<PathKind> {
        let u = &self.ues[ue];
        let path = route_packet(self.mode, class, direction, u.dl_path());
        match (path, u.ap) {
            (PathKind::Wifi, None) if self.mode == Mode::WifiOnly => None,
            (PathKind::Wifi, None) => Some(PathKind::Lte),
            (p, _) => Some(p),
        }
    }

    fn tunnelled(&self) -> bool {
        matches!(self.mode, Mode::Lwip | Mode::Boost)
    }

    fn make_packet(&self, ue: usize, inner: u32, class: PacketClass, direction: Direction, path: PathKind, sequence: u64) -> Packet {
        let size = if path == PathKind::Wifi && self.tunnelled() { ipsec_encapsulate(inner) } else { inner };
        Packet {
            ue,
            size,
            inner_size: inner,
            class,
            direction,
            path,
            created_at: self.now,
            sequence,
        }
    }

    /// Queues a small packet originated outside the FTP sessions.
    fn send_control(&mut self, ue: usize, inner: u32, class: PacketClass, direction: Direction, sequence: u64) {
        let Some(path) = self.route(ue, class, direction) else {
            return;
        };
        let pkt = self.make_packet(ue, inner, class, direction, path, sequence);
        match (path, direction) {
            (PathKind::Lte, Direction::Dl) => self.ues[ue].lte_dl.push_back(pkt),
            (PathKind::Lte, Direction::Ul) => self.ues[ue].lte_ul.push_back(pkt),
            (PathKind::Wifi, Direction::Dl) => {
                self.ues[ue].ap_queue.push_back(pkt);
                self.wifi_refresh_ue(ue);
            }
            (PathKind::Wifi, Direction::Ul) => {
                self.ues[ue].wifi_ul.push_back(pkt);
                self.wifi_refresh_ue(ue);
            }
        }
    }

    /// Moves downlink file data into the AP buffer while the UE is steered
    /// to Wi-Fi.
    fn top_up_ap(&mut self, ue: usize) {
        if self.route(ue, PacketClass::FtpData, Direction::Dl) != Some(PathKind::Wifi) {
            return;
        }
        let limit = self.cfg.wifi.ap_station_buffer_bytes;
        let mtu = self.cfg.traffic.mtu;
        let mut added = false;
        while self.ues[ue].ap_ftp_bytes < limit {
            let Some((inner, seq)) = self.ues[ue].dl.take_packet(mtu) else {
                break;
            };
            let pkt = self.make_packet(ue, inner, PacketClass::FtpData, Direction::Dl, PathKind::Wifi, seq);
            let u = &mut self.ues[ue];
            u.ap_ftp_bytes += u64::from(pkt.size);
            u.ap_queue.push_back(pkt);
            added = true;
        }
        if added {
            self.wifi_refresh_ue(ue);
        }
    }

    /// Same for the UE's own uplink when it transmits on Wi-Fi.
    fn top_up_ue_wifi(&mut self, ue: usize) {
        if self.route(ue, PacketClass::FtpData, Direction::Ul) != Some(PathKind::Wifi) {
            return;
        }
        let limit = self.cfg.wifi.ap_station_buffer_bytes;
        let mtu = self.cfg.traffic.mtu;
        let mut added = false;
        while self.ues[ue].wifi_ul_ftp_bytes < limit {
            let Some(ul) = self.ues[ue].ul.as_mut() else {
                break;
            };
            let Some((inner, seq)) = ul.take_packet(mtu) else {
                break;
            };
            let pkt = self.make_packet(ue, inner, PacketClass::FtpData, Direction::Ul, PathKind::Wifi, seq);
            let u = &mut self.ues[ue];
            u.wifi_ul_ftp_bytes += u64::from(pkt.size);
            u.wifi_ul.push_back(pkt);
            added = true;
        }
        if added {
            self.wifi_refresh_ue(ue);
        }
    }
}

impl Sim<'_> {
    // ---- Wi-Fi ----

    fn wifi_refresh_ue(&mut self, ue: usize) {
        if let Some(ap) = self.ues[ue].ap {
            let ch = self.aps[ap].channel;
            self.wifi_refresh(ch);
        }
    }

    fn node_has_data(&self, node: usize) -> bool {
        let n_aps = self.aps.len();
        if node < n_aps {
            self.aps[node].ues.iter().any(|&u| !self.ues[u].ap_queue.is_empty())
        } else {
            !self.ues[node - n_aps].wifi_ul.is_empty()
        }
    }

    /// Syncs contender activity with the queues and (re)arms the next
    /// access of channel `ch`.
    fn wifi_refresh(&mut self, ch: usize) {
        let nodes: Vec<(usize, bool)> = self.channels[ch]
            .mac
            .contenders()
            .iter()
            .map(|c| (c.node, c.active))
            .collect();
        let now = self.now;
        for (node, active) in nodes {
            let want = self.node_has_data(node);
            if want != active {
                self.channels[ch].mac.set_active(node, want, now, &mut self.backoff_rng);
            }
        }
        let c = &self.channels[ch];
        if c.tx_active {
            return;
        }
        if let Some(at) = c.mac.next_access(now) {
            let version = c.mac.version;
            self.schedule(at, EventKind::WifiAccess { channel: ch, version });
        }
    }

    fn build_ppdu(&mut self, node: usize) -> Option<(Ppdu, SimTime)> {
        let n_aps = self.aps.len();
        let params = &self.cfg.wifi;
        if node < n_aps {
            // One PPDU drains the AP's per-station queues in round-robin
            // order until the TXOP is full; airtime follows each
            // receiver's own rate.
            let k = self.aps[node].ues.len();
            let start = self.aps[node].rr_next;
            let txop_secs = params.txop().as_secs_f64();
            let mut used = 0.0;
            let mut payload_time = SimTime::ZERO;
            let mut packets = Vec::new();
            let mut next = start;
            for i in 0..k {
                let slot = (start + i) % k;
                let ue = self.aps[node].ues[slot];
                if self.ues[ue].ap_queue.is_empty() {
                    continue;
                }
                let rate = self.wifi_rate(ue, Direction::Dl);
                if rate <= 0.0 {
                    continue;
                }
                let mut bytes = 0u64;
                let u = &mut self.ues[ue];
                let mut full = false;
                while let Some(p) = u.ap_queue.front() {
                    let t = f64::from(p.size) * 8.0 / (rate * 1e6);
                    if !packets.is_empty() && used + t > txop_secs {
                        full = true;
                        break;
                    }
                    let p = u.ap_queue.pop_front().expect("front exists");
                    used += t;
                    bytes += u64::from(p.size);
                    if p.class == PacketClass::FtpData {
                        u.ap_ftp_bytes -= u64::from(p.size);
                    }
                    packets.push(p);
                }
                payload_time += SimTime::airtime(bytes * 8, rate * 1e6);
                next = (slot + 1) % k;
                if full {
                    break;
                }
            }
            if packets.is_empty() {
                return None;
            }
            self.aps[node].rr_next = next;
            let dur = params.phy_header() + payload_time + params.sifs() + params.mac_ack();
            Some((Ppdu { node, packets, cell: 1 + node }, dur))
        } else {
            let ue = node - n_aps;
            let rate = self.wifi_rate(ue, Direction::Ul);
            if rate <= 0.0 {
                return None;
            }
            // A zero limit leaves room for nothing, so only the head frame
            // goes out.
            let cap = txop_capacity_bytes(rate, params.ue_txop());
            let cell = 1 + self.ues[ue].ap.expect("contending UE is associated");
            let u = &mut self.ues[ue];
            let mut packets = Vec::new();
            let mut bytes = 0u64;
            while let Some(p) = u.wifi_ul.front() {
                if !packets.is_empty() && bytes + u64::from(p.size) > cap {
                    break;
                }
                let p = u.wifi_ul.pop_front().expect("front exists");
                bytes += u64::from(p.size);
                if p.class == PacketClass::FtpData {
                    u.wifi_ul_ftp_bytes -= u64::from(p.size);
                }
                packets.push(p);
            }
            let dur = exchange_duration(bytes, rate, params);
            Some((Ppdu { node, packets, cell }, dur))
        }
    }

    fn on_wifi_access(&mut self, ch: usize, version: u64) {
        {
            let c = &self.channels[ch];
            if c.tx_active || c.mac.version != version {
                return;
            }
        }
        let now = self.now;
        let winners = match self.channels[ch].mac.contend(now) {
            None => {
                self.wifi_refresh(ch);
                return;
            }
            Some(Access::Single(n)) => vec![n],
            Some(Access::Collision(ns)) => ns,
        };
        let mut longest = SimTime::ZERO;
        let mut sent = Vec::new();
        for node in winners {
            match self.build_ppdu(node) {
                Some((ppdu, dur)) => {
                    longest = longest.max(dur);
                    sent.push(ppdu);
                }
                None => self.channels[ch].mac.defer(node, &mut self.backoff_rng),
            }
        }
        if sent.is_empty() {
            self.wifi_refresh(ch);
            return;
        }
        let c = &mut self.channels[ch];
        c.collided = sent.len() > 1;
        c.in_flight = sent;
        c.tx_active = true;
        c.mac.occupy(now, now + longest);
        self.schedule(now + longest, EventKind::WifiTxEnd { channel: ch });
    }

    fn on_wifi_tx_end(&mut self, ch: usize) {
        let ppdus = std::mem::take(&mut self.channels[ch].in_flight);
        let collided = self.channels[ch].collided;
        self.channels[ch].tx_active = false;
        if collided {
            let nodes: Vec<usize> = ppdus.iter().map(|p| p.node).collect();
            self.channels[ch].mac.on_collision(&nodes, &mut self.backoff_rng);
            let n_aps = self.aps.len();
            for p in ppdus {
                for pkt in p.packets.into_iter().rev() {
                    let u = &mut self.ues[pkt.ue];
                    if p.node < n_aps {
                        if pkt.class == PacketClass::FtpData {
                            u.ap_ftp_bytes += u64::from(pkt.size);
                        }
                        u.ap_queue.push_front(pkt);
                    } else {
                        if pkt.class == PacketClass::FtpData {
                            u.wifi_ul_ftp_bytes += u64::from(pkt.size);
                        }
                        u.wifi_ul.push_front(pkt);
                    }
                }
            }
        } else {
            for p in ppdus {
                self.channels[ch].mac.on_success(p.node, &mut self.backoff_rng);
                let mut served: Vec<usize> = p.packets.iter().map(|pkt| pkt.ue).collect();
                served.dedup();
                self.deliver_batch(p.packets, p.cell);
                for ue in served {
                    self.top_up_ap(ue);
                    self.top_up_ue_wifi(ue);
                }
            }
        }
        self.wifi_refresh(ch);
    }

    // ---- LTE ----

    /// Serves up to `budget` bits of one UE's LTE queue in one direction,
    /// cutting file data as needed. Returns bits used and finished packets.
    fn serve_lte(&mut self, ue: usize, direction: Direction, budget: u64, done: &mut Vec<Packet>) -> u64 {
        let mtu = self.cfg.traffic.mtu;
        let mut used = 0;
        loop {
            let empty = match direction {
                Direction::Dl => self.ues[ue].lte_dl.is_empty(),
                Direction::Ul => self.ues[ue].lte_ul.is_empty(),
            };
            if empty {
                if self.route(ue, PacketClass::FtpData, direction) != Some(PathKind::Lte) {
                    break;
                }
                let cut = match direction {
                    Direction::Dl => self.ues[ue].dl.take_packet(mtu),
                    Direction::Ul => self.ues[ue].ul.as_mut().and_then(|s| s.take_packet(mtu)),
                };
                let Some((inner, seq)) = cut else {
                    break;
                };
                let pkt = self.make_packet(ue, inner, PacketClass::FtpData, direction, PathKind::Lte, seq);
                match direction {
                    Direction::Dl => self.ues[ue].lte_dl.push_back(pkt),
                    Direction::Ul => self.ues[ue].lte_ul.push_back(pkt),
                }
            }
            let u = &mut self.ues[ue];
            let (q, sent) = match direction {
                Direction::Dl => (&mut u.lte_dl, &mut u.lte_dl_head_sent),
                Direction::Ul => (&mut u.lte_ul, &mut u.lte_ul_head_sent),
            };
            let head_bits = q.front().expect("queue refilled").bits();
            let remaining = head_bits - *sent;
            if budget - used >= remaining {
                used += remaining;
                *sent = 0;
                done.push(q.pop_front().expect("front exists"));
            } else {
                *sent += budget - used;
                used = budget;
                break;
            }
            if used >= budget {
                break;
            }
        }
        used
    }

    fn lte_backlogged(&self, ue: usize, direction: Direction) -> bool {
        let u = &self.ues[ue];
        let (queued, session) = match direction {
            Direction::Dl => (!u.lte_dl.is_empty(), u.dl.has_unsent()),
            Direction::Ul => (!u.lte_ul.is_empty(), u.ul.as_ref().is_some_and(|s| s.has_unsent())),
        };
        queued || (session && self.route(ue, PacketClass::FtpData, direction) == Some(PathKind::Lte))
    }

    /// Serves the TTI that ends now, in both directions.
    fn on_lte_tti(&mut self) {
        let tti = self.cfg.lte.tti();
        let overhead = self.cfg.lte.overhead_fraction;
        let n = self.ues.len();
        let mut ul_done = Vec::new();
        let mut dl_done = Vec::new();

        let has_ul: Vec<bool> = (0..n).map(|u| self.lte_backlogged(u, Direction::Ul)).collect();
        let order = self.lte_ul_rr.schedule_tti(&has_ul);
        let ul_capacity = self.cfg.lte.ul_capacity_mbps * 1e6 * tti.as_secs_f64();
        let mut pool = 1.0;
        for (i, &ue) in order.iter().enumerate() {
            let share = pool / (order.len() - i) as f64;
            let budget = (ul_capacity * share).floor() as u64;
            if budget == 0 {
                continue;
            }
            let used = self.serve_lte(ue, Direction::Ul, budget, &mut ul_done);
            pool -= share * used as f64 / budget as f64;
        }

        let has_dl: Vec<bool> = (0..n).map(|u| self.lte_backlogged(u, Direction::Dl)).collect();
        let order = self.lte_dl_rr.schedule_tti(&has_dl);
        let mut pool = 1.0;
        for (i, &ue) in order.iter().enumerate() {
            let share = pool / (order.len() - i) as f64;
            let rate = self.lte_dl_rate(ue);
            let budget = (rate * 1e6 * tti.as_secs_f64() * share * (1.0 - overhead)).floor() as u64;
            if budget == 0 {
                continue;
            }
            let used = self.serve_lte(ue, Direction::Dl, budget, &mut dl_done);
            pool -= share * used as f64 / budget as f64;
        }

        for p in ul_done {
            self.deliver(p, 0);
        }
        for p in dl_done {
            self.deliver(p, 0);
        }
        let next = self.now + tti;
        self.schedule(next, EventKind::LteTti);
    }
}

impl Sim<'_> {
    // ---- deliveries ----

    fn trace_line(&mut self, kind: &'static str, node: String, class: &'static str, size: u32, path: &'static str) {
        if let Some(w) = self.trace.as_mut() {
            let rec = TraceRecord {
                time: self.now,
                kind,
                node,
                class,
                size,
                path,
            };
            // Tracing is best effort; a failing sink must not abort the run.
            let _ = writeln!(w, "{rec}");
        }
    }

    /// Delivers the packets of one PPDU, then answers any active probes it
    /// carried with a single ACK.
    fn deliver_batch(&mut self, packets: Vec<Packet>, cell: usize) {
        // (ue, highest probe sequence) per probed receiver.
        let mut data_probes: Vec<(usize, u64)> = Vec::new();
        for p in packets {
            if p.class == PacketClass::Probe && split_train_sequence(p.sequence).is_none() {
                self.account(&p, cell);
                match data_probes.iter_mut().find(|(u, _)| *u == p.ue) {
                    Some(e) => e.1 = e.1.max(p.sequence),
                    None => data_probes.push((p.ue, p.sequence)),
                }
            } else {
                self.deliver(p, cell);
            }
        }
        for (ue, up_to) in data_probes {
            let now = self.now;
            let u = &mut self.ues[ue];
            let u_avg = u.active_meter.on_probe(now);
            let generation = u.generation;
            u.pending_acks.push_back(AckPayload::Data { generation, up_to, u_avg });
            self.send_control(ue, TCP_ACK_BYTES, PacketClass::ProbeAck, Direction::Ul, up_to);
        }
    }

    fn account(&mut self, p: &Packet, cell: usize) {
        self.totals.overhead_bits += p.overhead_bits();
        if p.direction == Direction::Dl {
            self.totals.cell_dl_bits[cell] += p.app_bits();
        }
        if self.trace.is_some() {
            let node = match p.direction {
                Direction::Dl => format!("ue{}", p.ue),
                Direction::Ul if cell == 0 => "bs".to_string(),
                Direction::Ul => format!("ap{}", cell - 1),
            };
            self.trace_line("deliver", node, p.class.as_str(), p.size, p.path.as_str());
        }
    }

    fn deliver(&mut self, p: Packet, cell: usize) {
        self.account(&p, cell);
        let ue = p.ue;
        let ftp = self.cfg.traffic.model == TrafficModel::Ftp;
        match (p.class, p.direction) {
            (PacketClass::FtpData, Direction::Dl) => {
                let bits = p.app_bits();
                let u = &mut self.ues[ue];
                u.ledger.dl_app_bits += bits;
                u.active_meter.on_data(bits);
                let ack_due = ftp && u.dl_acks.on_data_delivered();
                let finished = u.dl.on_delivered(p.inner_size);
                if ack_due {
                    self.send_control(ue, TCP_ACK_BYTES, PacketClass::TcpAck, Direction::Ul, 0);
                }
                if finished {
                    let now = self.now;
                    let u = &mut self.ues[ue];
                    if let Some(since) = u.dl_active_since.take() {
                        u.ledger.dl_active += now - since;
                    }
                    u.ledger.dl_files_completed += 1;
                    let took = now - u.dl.file_started;
                    if took > SimTime::ZERO {
                        u.ledger.dl_file_rate_sum += mbps(u.dl.file_size * 8, took);
                    }
                    let wait = self.reading_time(ue, Direction::Dl);
                    self.schedule(now + wait, EventKind::FileArrival { ue, direction: Direction::Dl });
                }
            }
            (PacketClass::FtpData, Direction::Ul) => {
                let u = &mut self.ues[ue];
                u.ledger.ul_app_bits += p.app_bits();
                let ack_due = ftp && u.ul_acks.on_data_delivered();
                let finished = u.ul.as_mut().is_some_and(|s| s.on_delivered(p.inner_size));
                if ack_due {
                    self.send_control(ue, TCP_ACK_BYTES, PacketClass::TcpAck, Direction::Dl, 0);
                }
                if finished {
                    let wait = self.reading_time(ue, Direction::Ul);
                    let at = self.now + wait;
                    self.schedule(at, EventKind::FileArrival { ue, direction: Direction::Ul });
                }
            }
            (PacketClass::Probe, _) => {
                if let Some((train, index)) = split_train_sequence(p.sequence) {
                    self.ucm_train_probe(ue, train, index, p.created_at);
                }
            }
            (PacketClass::ProbeAck, _) => self.rcm_probe_ack(ue),
            (PacketClass::TcpAck, _) => {}
        }
    }

    // ---- traffic ----

    fn on_file_arrival(&mut self, ue: usize, direction: Direction) {
        let now = self.now;
        match direction {
            Direction::Dl => {
                let u = &mut self.ues[ue];
                if u.dl.is_active() && !matches!(self.cfg.traffic.model, TrafficModel::FullBuffer) {
                    return;
                }
                if self.cfg.traffic.model == TrafficModel::Ftp {
                    u.dl.start_file(now);
                }
                u.dl_active_since = Some(now);
                if self.mode == Mode::Boost {
                    if !self.ues[ue].connected {
                        self.connect(ue);
                    } else if rlm::rcm_on_traffic_resumed(&mut self.ues[ue].rcm, now, &self.cfg.rlm) {
                        self.begin_data_phase(ue);
                    }
                }
                self.top_up_ap(ue);
            }
            Direction::Ul => {
                if let Some(s) = self.ues[ue].ul.as_mut() {
                    s.start_file(now);
                }
                self.top_up_ue_wifi(ue);
            }
        }
    }

    // ---- steering ----

    fn connect(&mut self, ue: usize) {
        self.ues[ue].connected = true;
        if self.ues[ue].ap.is_none() {
            self.ues[ue].rcm.phase = Phase::Data;
            return;
        }
        self.start_train(ue, false);
    }

    fn start_train(&mut self, ue: usize, reprobe: bool) {
        let now = self.now;
        let u = &mut self.ues[ue];
        let id = u.next_train_id;
        u.next_train_id += 1;
        u.train = Some(ProbeTrain {
            id,
            reprobe,
            done: false,
        });
        let timeout = self.cfg.rlm.probe.initial_ack_timeout();
        self.schedule(now, EventKind::TrainProbe { ue, train: id, index: 0 });
        self.schedule(now + timeout, EventKind::TrainTimeout { ue, train: id });
    }

    fn current_train(&self, ue: usize, train: u64) -> bool {
        self.ues[ue].train.as_ref().is_some_and(|t| t.id == train && !t.done)
    }

    fn on_train_probe(&mut self, ue: usize, train: u64, index: u64) {
        if !self.current_train(ue, train) {
            return;
        }
        let probe = &self.cfg.rlm.probe;
        let inner = (probe.s_ini_bits / 8) as u32;
        let (spacing, count) = (probe.initial_spacing(), probe.x_ini());
        self.send_control(ue, inner, PacketClass::Probe, Direction::Dl, train_sequence(train, index));
        if index + 1 < count {
            let at = self.now + spacing;
            self.schedule(at, EventKind::TrainProbe { ue, train, index: index + 1 });
        }
    }

    fn ucm_train_probe(&mut self, ue: usize, train: u64, index: u64, sent_at: SimTime) {
        let probe = &self.cfg.rlm.probe;
        let (bits, count, estimator) = (probe.s_ini_bits, probe.x_ini(), probe.rate_estimator);
        let now = self.now;
        let u = &mut self.ues[ue];
        if u.train_meter_id != train {
            u.train_meter = InitialProbeMeter::default();
            u.train_meter_id = train;
        }
        u.train_meter.on_probe(sent_at, now, bits);
        if index + 1 == count {
            let stats = u.train_meter.stats(count, bits, estimator);
            u.pending_acks.push_back(AckPayload::Train { train, stats });
            self.send_control(ue, TCP_ACK_BYTES, PacketClass::ProbeAck, Direction::Ul, train);
        }
    }

    fn on_train_timeout(&mut self, ue: usize, train: u64) {
        if self.current_train(ue, train) {
            self.train_result(ue, None);
        }
    }

    fn rcm_probe_ack(&mut self, ue: usize) {
        let Some(payload) = self.ues[ue].pending_acks.pop_front() else {
            return;
        };
        match payload {
            AckPayload::Train { train, stats } => {
                if self.current_train(ue, train) {
                    self.train_result(ue, Some(stats));
                }
            }
            AckPayload::Data { generation, up_to, u_avg } => {
                let u = &mut self.ues[ue];
                if generation != u.generation {
                    return;
                }
                u.acked_up_to = Some(u.acked_up_to.map_or(up_to, |a| a.max(up_to)));
                let estimate = self.lte_estimate(ue);
                let now = self.now;
                let (decision, cause) =
                    rlm::rcm_on_probe_ack(&mut self.ues[ue].rcm, u_avg, &mut self.governor, now, estimate, &self.cfg.rlm);
                self.apply_decision(ue, decision, cause);
            }
        }
    }

    fn train_result(&mut self, ue: usize, stats: Option<ProbeStats>) {
        let now = self.now;
        let reprobe = {
            let t = self.ues[ue].train.as_mut().expect("train in progress");
            t.done = true;
            t.reprobe
        };
        let ap = self.ues[ue].ap.expect("probing UE is associated");
        let rssi = self.drop.ue_ap_rssi[ue][ap];
        if rlm::evaluate_initial_criteria(stats.as_ref(), rssi, &self.cfg.rlm.thresholds) == rlm::PathChoice::Wifi {
            self.totals.trains_passed += 1;
        } else {
            self.totals.trains_failed += 1;
        }
        if reprobe {
            let d = rlm::rcm_on_reprobe_result(&mut self.ues[ue].rcm, stats.as_ref(), rssi, &mut self.governor, now, &self.cfg.rlm);
            self.apply_decision(ue, d, None);
            if self.ues[ue].rcm.path == DlPath::Lte {
                self.arm_reprobe(ue);
            }
        } else {
            let choice = rlm::rcm_on_initial_result(&mut self.ues[ue].rcm, stats.as_ref(), rssi, now, &self.cfg.rlm);
            match choice {
                rlm::PathChoice::Wifi => self.begin_data_phase(ue),
                rlm::PathChoice::Lte => self.arm_reprobe(ue),
            }
        }
    }

    fn arm_reprobe(&mut self, ue: usize) {
        let u = &self.ues[ue];
        if let Some(at) = u.rcm.next_reprobe_time {
            let generation = u.generation;
            self.schedule(at, EventKind::Reprobe { ue, generation });
        }
    }

    fn begin_data_phase(&mut self, ue: usize) {
        let now = self.now;
        let u = &mut self.ues[ue];
        u.generation += 1;
        u.acked_up_to = None;
        u.active_meter.reset(now);
        let generation = u.generation;
        if let Some(at) = u.rcm.next_probe_time {
            self.schedule(at, EventKind::DataProbe { ue, generation });
        }
        self.top_up_ap(ue);
    }

    fn on_data_probe(&mut self, ue: usize, generation: u64) {
        if self.ues[ue].generation != generation {
            return;
        }
        let now = self.now;
        if !rlm::data_phase_tick(&mut self.ues[ue].rcm, now, &self.cfg.rlm.probe) {
            return;
        }
        let seq = self.ues[ue].probe_seq;
        self.ues[ue].probe_seq += 1;
        let inner = (self.cfg.rlm.probe.s_dat_bits / 8) as u32;
        self.send_control(ue, inner, PacketClass::Probe, Direction::Dl, seq);
        let deadline = now + SimTime::from_secs_f64(self.cfg.rlm.probe.data_ack_timeout);
        self.schedule(deadline, EventKind::ProbeDeadline { ue, generation, sequence: seq });
        if let Some(at) = self.ues[ue].rcm.next_probe_time {
            self.schedule(at, EventKind::DataProbe { ue, generation });
        }
    }

    fn on_probe_deadline(&mut self, ue: usize, generation: u64, sequence: u64) {
        let u = &self.ues[ue];
        if u.generation != generation || u.acked_up_to.is_some_and(|a| a >= sequence) {
            return;
        }
        let estimate = self.lte_estimate(ue);
        let now = self.now;
        let d = rlm::rcm_on_missing_ack(&mut self.ues[ue].rcm, &mut self.governor, now, estimate, &self.cfg.rlm);
        let cause = matches!(d, Decision::SwitchToLte).then_some(rlm::SwitchCause::Stall);
        self.apply_decision(ue, d, cause);
    }

    fn on_reprobe(&mut self, ue: usize, generation: u64) {
        if self.ues[ue].generation != generation {
            return;
        }
        let now = self.now;
        if rlm::lte_reprobe_timer(&mut self.ues[ue].rcm, now) {
            self.start_train(ue, true);
        }
    }

    /// Average post-switch throughput of the UEs already on LTE, or the
    /// candidate's own estimate when LTE carries nobody else.
    fn lte_estimate(&self, candidate: usize) -> f64 {
        let existing: Vec<f64> = self
            .ues
            .iter()
            .enumerate()
            .filter(|(i, u)| *i != candidate && u.connected && u.rcm.path == DlPath::Lte)
            .map(|(_, u)| u.lte_mean_rate)
            .collect();
        let est = estimate_post_switch_throughput(&existing, self.ues[candidate].lte_mean_rate);
        if existing.is_empty() {
            est[0]
        } else {
            est[..existing.len()].iter().sum::<f64>() / existing.len() as f64
        }
    }

    fn apply_decision(&mut self, ue: usize, decision: Decision, cause: Option<rlm::SwitchCause>) {
        let now = self.now;
        match decision {
            Decision::Stay => {}
            Decision::Denied(_) => self.totals.denied += 1,
            Decision::WifiOnlyMode => {
                self.ues[ue].generation += 1;
                self.totals.wifi_only_entries += 1;
                self.trace_line("wifi_only", format!("ue{ue}"), "-", 0, "wifi");
            }
            Decision::SwitchToLte => {
                self.ues[ue].generation += 1;
                self.totals.switches.push(SwitchEvent {
                    time: now,
                    ue,
                    direction: SwitchDirection::ToLte,
                    cause,
                });
                self.trace_line("switch", format!("ue{ue}"), "-", 0, "lte");
                self.arm_reprobe(ue);
            }
            Decision::SwitchToWifi => {
                self.totals.switches.push(SwitchEvent {
                    time: now,
                    ue,
                    direction: SwitchDirection::ToWifi,
                    cause: None,
                });
                self.trace_line("switch", format!("ue{ue}"), "-", 0, "wifi");
                self.begin_data_phase(ue);
            }
        }
    }
}

impl Sim<'_> {
    fn run(mut self, drop_index: u64) -> Result<DropResult> {
        let n = self.ues.len();
        let full_buffer = self.cfg.traffic.model == TrafficModel::FullBuffer;
        for ue in 0..n {
            if full_buffer {
                self.schedule(SimTime::ZERO, EventKind::FileArrival { ue, direction: Direction::Dl });
            } else {
                let wait = self.reading_time(ue, Direction::Dl);
                self.schedule(wait, EventKind::FileArrival { ue, direction: Direction::Dl });
                if self.ues[ue].ul.is_some() {
                    let wait = self.reading_time(ue, Direction::Ul);
                    self.schedule(wait, EventKind::FileArrival { ue, direction: Direction::Ul });
                }
            }
        }
        let tti = self.cfg.lte.tti();
        self.schedule(tti, EventKind::LteTti);

        while let Some(ev) = self.queue.pop() {
            debug_assert!(ev.time >= self.now, "event queue went back in time");
            self.now = ev.time;
            self.totals.events += 1;
            match ev.kind {
                EventKind::LteTti => self.on_lte_tti(),
                EventKind::WifiAccess { channel, version } => self.on_wifi_access(channel, version),
                EventKind::WifiTxEnd { channel } => self.on_wifi_tx_end(channel),
                EventKind::FileArrival { ue, direction } => self.on_file_arrival(ue, direction),
                EventKind::TrainProbe { ue, train, index } => self.on_train_probe(ue, train, index),
                EventKind::TrainTimeout { ue, train } => self.on_train_timeout(ue, train),
                EventKind::DataProbe { ue, generation } => self.on_data_probe(ue, generation),
                EventKind::ProbeDeadline { ue, generation, sequence } => self.on_probe_deadline(ue, generation, sequence),
                EventKind::Reprobe { ue, generation } => self.on_reprobe(ue, generation),
            }
        }
        // The TTI clock re-arms itself up to the end, so running dry
        // earlier means an event was lost.
        if self.now + tti <= self.end {
            let pending = self.ues.iter().filter(|u| u.dl.is_active()).count();
            return Err(Error::Starvation {
                at_secs: self.now.as_secs_f64(),
                pending,
            });
        }
        self.now = self.end;
        Ok(self.finish(drop_index))
    }

    fn finish(mut self, drop_index: u64) -> DropResult {
        let end = self.end;
        let mut in_flight = 0u64;
        let mut ues = Vec::with_capacity(self.ues.len());
        for u in &mut self.ues {
            if let Some(since) = u.dl_active_since.take() {
                u.ledger.dl_active += end - since;
            }
            u.ledger.on_lte_at_end = match self.mode {
                Mode::LteOnly => true,
                Mode::Boost => u.rcm.path == DlPath::Lte,
                _ => u.ap.is_none() && self.mode == Mode::Lwip,
            };
            in_flight += u
                .lte_dl
                .iter()
                .chain(u.ap_queue.iter())
                .map(|p| p.app_bits())
                .sum::<u64>();
            ues.push(u.ledger.clone());
        }
        let delivered: u64 = ues.iter().map(|l| l.dl_app_bits).sum();
        DropResult {
            mode: self.mode,
            n_ues: ues.len(),
            drop_index,
            seed: self.drop.seed,
            duration: end,
            ues,
            cell_dl_bits: self.totals.cell_dl_bits,
            overhead_bits: self.totals.overhead_bits,
            in_flight_bits: in_flight,
            injected_dl_bits: delivered + in_flight,
            switches: self.totals.switches,
            denied_switches: self.totals.denied,
            wifi_only_entries: self.totals.wifi_only_entries,
            probe_trains_passed: self.totals.trains_passed,
            probe_trains_failed: self.totals.trains_failed,
            collisions: self.channels.iter().map(|c| c.mac.stats.collisions).sum(),
            events_processed: self.totals.events,
        }
    }
}

/// Runs one drop of one configuration for the configured duration.
pub fn run_drop<'a>(cfg: &'a CampaignConfig, mode: Mode, drop: &'a Drop, opts: DropOptions<'a>) -> Result<DropResult> {
    let duration = SimTime::from_secs_f64(cfg.campaign.duration);
    if duration == SimTime::ZERO {
        return Err(Error::ConfigValidation {
            key: "campaign.duration".into(),
            reason: "must be positive".into(),
        });
    }
    let sim = Sim::new(cfg, mode, drop, duration, opts.trace);
    sim.run(opts.drop_index)
}

/// Generates drop `drop_index` of the `n_ues` cell and runs it.
pub fn run_seeded_drop(cfg: &CampaignConfig, mode: Mode, n_ues: usize, drop_index: u64) -> Result<DropResult> {
    let seed = seeds::drop_seed(cfg.campaign.master_seed, n_ues, drop_index as usize);
    let drop = generate_drop(seed, n_ues, &cfg.scenario)?;
    run_drop(cfg, mode, &drop, DropOptions { drop_index, trace: None })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignResult {
    pub drops: Vec<DropResult>,
    pub summaries: Vec<CellSummary>,
}

impl CampaignResult {
    pub fn drops_for(&self, mode: Mode, n_ues: usize) -> impl Iterator<Item = &DropResult> {
        self.drops.iter().filter(move |d| d.mode == mode && d.n_ues == n_ues)
    }

    pub fn summary(&self, mode: Mode, n_ues: usize) -> Option<&CellSummary> {
        self.summaries.iter().find(|s| s.mode == mode && s.n_ues == n_ues)
    }
}

/// Runs every (mode, UE count, drop) of the campaign on `workers` threads.
/// Results come back in matrix order whatever the worker count.
pub fn run_campaign(cfg: &CampaignConfig, workers: usize) -> Result<CampaignResult> {
    cfg.validate()?;
    let c = &cfg.campaign;
    let jobs: Vec<(Mode, usize, u64)> = c
        .ue_counts
        .iter()
        .flat_map(|&n| c.modes.iter().flat_map(move |&m| (0..c.drops).map(move |d| (m, n, d))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Other(format!("worker pool: {e}")))?;
    let drops: Vec<DropResult> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, n, d)| run_seeded_drop(cfg, m, n, d))
            .collect::<Result<Vec<_>>>()
    })?;
    let mut summaries = Vec::new();
    for &n in &c.ue_counts {
        for &m in &c.modes {
            let cell: Vec<DropResult> = drops.iter().filter(|d| d.mode == m && d.n_ues == n).cloned().collect();
            summaries.push(CellSummary::from_drops(m, n, &cell, c.throughput_basis)?);
        }
    }
    Ok(CampaignResult { drops, summaries })
}

//! Radio channel: indoor path loss, log-normal shadowing, Rayleigh block
//! fading and the SINR to PHY rate mapping for both technologies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::time::SimTime;

pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const MIN_DISTANCE_M: f64 = 0.5;

/// Indoor-hotspot LOS loss in dB. Distances below half a metre are clamped.
pub fn path_loss_db(distance_m: f64, carrier_ghz: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    16.9 * d.log10() + 32.8 + 20.0 * carrier_ghz.log10()
}

/// Free-space loss, used only as a lower bound in tests and sanity checks.
pub fn free_space_loss_db(distance_m: f64, carrier_ghz: f64) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    let lambda = SPEED_OF_LIGHT / (carrier_ghz * 1e9);
    20.0 * (4.0 * std::f64::consts::PI * d / lambda).log10()
}

pub fn thermal_noise_dbm(bandwidth_mhz: f64, noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * (bandwidth_mhz * 1e6).log10() + noise_figure_db
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// SINR in dB of a signal against thermal noise plus the linear sum of
/// interferer powers.
pub fn sinr_db(signal_dbm: f64, interferers_dbm: &[f64], noise_dbm: f64) -> f64 {
    let denom = dbm_to_mw(noise_dbm) + interferers_dbm.iter().map(|&p| dbm_to_mw(p)).sum::<f64>();
    mw_to_dbm(dbm_to_mw(signal_dbm) / denom)
}

/// Maximum Doppler shift for a terminal moving at `speed_kmh`.
pub fn doppler_hz(speed_kmh: f64, carrier_ghz: f64) -> f64 {
    let v = speed_kmh / 3.6;
    v * carrier_ghz * 1e9 / SPEED_OF_LIGHT
}

/// Bessel function of the first kind, order zero.
///
/// Rational approximation from Abramowitz & Stegun 9.4.1/9.4.3; absolute error
/// below 1e-7 over the whole real line.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 3.0 {
        let y = (x / 3.0).powi(2);
        1.0 + y
            * (-2.249_999_7
                + y * (1.265_620_8
                    + y * (-0.316_386_6 + y * (0.044_447_9 + y * (-0.003_944_4 + y * 0.000_210_0)))))
    } else {
        let y = 3.0 / ax;
        let f0 = 0.797_884_56
            + y * (-0.000_000_77
                + y * (-0.005_527_40
                    + y * (-0.000_095_12 + y * (0.001_372_37 + y * (-0.000_728_05 + y * 0.000_144_76)))));
        let theta0 = ax - std::f64::consts::FRAC_PI_4
            + y * (-0.041_663_97
                + y * (-0.000_039_54
                    + y * (0.002_625_73 + y * (-0.000_541_25 + y * (-0.000_293_33 + y * 0.000_135_58)))));
        f0 * theta0.cos() / ax.sqrt()
    }
}

/// Rayleigh block fading for every antenna pair of a 2x2 link.
///
/// Each pair is a unit-power complex Gaussian evolved as a first-order
/// Gauss-Markov process whose one-block correlation is the Jakes value
/// `J0(2π f_d T)`. Skipping ahead k blocks uses the exact k-step transition.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    block: SimTime,
    rho: f64,
    current_block: u64,
    taps: [(f64, f64); 4],
    rng: ChaCha8Rng,
}

impl FadingProcess {
    pub fn new(seed: u64, doppler_hz: f64, block: SimTime) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = bessel_j0(2.0 * std::f64::consts::PI * doppler_hz * block.as_secs_f64()).clamp(0.0, 1.0);
        let mut taps = [(0.0, 0.0); 4];
        for t in taps.iter_mut() {
            *t = complex_gaussian(&mut rng);
        }
        FadingProcess {
            block,
            rho,
            current_block: 0,
            taps,
            rng,
        }
    }

    pub fn correlation(&self) -> f64 {
        self.rho
    }

    fn advance_to(&mut self, block: u64) {
        if block <= self.current_block {
            return;
        }
        let k = (block - self.current_block).min(i32::MAX as u64) as i32;
        let a = self.rho.powi(k);
        let b = (1.0 - a * a).max(0.0).sqrt();
        for t in self.taps.iter_mut() {
            let (wr, wi) = complex_gaussian(&mut self.rng);
            *t = (a * t.0 + b * wr, a * t.1 + b * wi);
        }
        self.current_block = block;
    }

    /// |h|² of every antenna pair at time `at`. Time must not run backwards;
    /// a query for an earlier block returns the current block's value.
    pub fn pair_gains(&mut self, at: SimTime) -> [f64; 4] {
        let block = at.as_nanos() / self.block.as_nanos().max(1);
        self.advance_to(block);
        self.taps.map(|(re, im)| re * re + im * im)
    }

    /// Effective power gain of the link: the mean over antenna pairs.
    pub fn gain(&mut self, at: SimTime) -> f64 {
        self.pair_gains(at).iter().sum::<f64>() / 4.0
    }
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    (re * s, im * s)
}

/// One directed radio link with its large-scale losses frozen for the drop.
#[derive(Debug, Clone)]
pub struct LinkRealization {
    pub path_loss_db: f64,
    pub shadowing_db: f64,
    pub carrier_ghz: f64,
    pub bandwidth_mhz: f64,
    pub fading: FadingProcess,
}

impl LinkRealization {
    /// Received power without fast fading.
    pub fn mean_rx_dbm(&self, tx_power_dbm: f64, antenna_gains_db: f64) -> f64 {
        tx_power_dbm + antenna_gains_db - self.path_loss_db - self.shadowing_db
    }

    pub fn rx_dbm(&mut self, tx_power_dbm: f64, antenna_gains_db: f64, at: SimTime) -> f64 {
        self.mean_rx_dbm(tx_power_dbm, antenna_gains_db) + 10.0 * self.fading.gain(at).log10()
    }
}

/// SINR of `link` at `at`, given interferers that are active at that time.
/// Every entry is `(link, tx_power_dbm, antenna_gains_db)`.
pub fn instantaneous_sinr(
    link: &mut LinkRealization,
    interferers: &mut [(&mut LinkRealization, f64, f64)],
    tx_power_dbm: f64,
    antenna_gains_db: f64,
    noise_figure_db: f64,
    at: SimTime,
) -> f64 {
    let signal = link.rx_dbm(tx_power_dbm, antenna_gains_db, at);
    let noise = thermal_noise_dbm(link.bandwidth_mhz, noise_figure_db);
    let interference: Vec<f64> = interferers
        .iter_mut()
        .map(|(l, p, g)| l.rx_dbm(*p, *g, at))
        .collect();
    sinr_db(signal, &interference, noise)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technology {
    Lte,
    Wifi,
}

/// SINR thresholds (dB) mapped to single-stream PHY rates (Mbps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub technology: Technology,
    pub entries: Vec<(f64, f64)>,
    pub calibration_scale: f64,
}

/// Fitted so a lone saturated UE reaches 63 Mbps on LTE.
pub const LTE_CALIBRATION_SCALE: f64 = 0.840143;
/// Least-squares fit of the lone saturated UE peaks on Wi-Fi (140 plain,
/// 135 tunnelled).
pub const WIFI_CALIBRATION_SCALE: f64 = 0.86897;

/// Below this SINR only one spatial stream is usable.
pub const TWO_STREAM_SINR_DB: f64 = 15.0;

impl RateTable {
    /// 15-level CQI ladder up to 64QAM over the 9 MHz occupied by 50 PRBs.
    pub fn lte_default() -> Self {
        const CQI: [(f64, f64); 15] = [
            (-6.7, 0.1523),
            (-4.7, 0.2344),
            (-2.3, 0.3770),
            (0.2, 0.6016),
            (2.4, 0.8770),
            (4.3, 1.1758),
            (5.9, 1.4766),
            (8.1, 1.9141),
            (10.3, 2.4063),
            (11.7, 2.7305),
            (14.1, 3.3223),
            (16.3, 3.9023),
            (18.7, 4.5234),
            (21.0, 5.1152),
            (22.7, 5.5547),
        ];
        RateTable {
            technology: Technology::Lte,
            entries: CQI.iter().map(|&(s, eff)| (s, eff * 9.0)).collect(),
            calibration_scale: LTE_CALIBRATION_SCALE,
        }
    }

    /// 802.11ac 20 MHz MCS0-9, long guard interval, one spatial stream.
    pub fn wifi_default() -> Self {
        RateTable {
            technology: Technology::Wifi,
            entries: vec![
                (2.0, 6.5),
                (5.0, 13.0),
                (9.0, 19.5),
                (11.0, 26.0),
                (15.0, 39.0),
                (18.0, 52.0),
                (20.0, 58.5),
                (25.0, 65.0),
                (29.0, 78.0),
                (31.0, 86.7),
            ],
            calibration_scale: WIFI_CALIBRATION_SCALE,
        }
    }

    pub fn is_monotone(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1)
    }

    pub fn peak_mbps(&self, streams: u32) -> f64 {
        self.entries.last().map_or(0.0, |e| e.1) * f64::from(streams) * self.calibration_scale
    }
}

pub fn streams_for_sinr(sinr_db: f64) -> u32 {
    if sinr_db >= TWO_STREAM_SINR_DB {
        2
    } else {
        1
    }
}

/// PHY rate for `sinr_db`: the highest entry whose threshold is met, times
/// the stream count and calibration scale. Zero below the lowest threshold.
pub fn rate_from_sinr(sinr_db: f64, table: &RateTable, streams: u32) -> f64 {
    let idx = table.entries.partition_point(|&(thr, _)| thr <= sinr_db);
    if idx == 0 {
        return 0.0;
    }
    table.entries[idx - 1].1 * f64::from(streams) * table.calibration_scale
}

/// Rate with the stream count chosen from the SINR.
pub fn link_rate_mbps(sinr_db: f64, table: &RateTable) -> f64 {
    rate_from_sinr(sinr_db, table, streams_for_sinr(sinr_db))
}

//! Drop generation: where the nodes are, which channel each AP uses, and
//! which AP (if any) every UE associates with.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_mw, path_loss_db};
use crate::error::{Error, Result};
use crate::seeds::{self, Purpose};

pub const PLACEMENT_RETRY_CAP: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rectangular floor plan with the LTE small cell and the Wi-Fi APs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    pub width: f64,
    pub depth: f64,
    pub bs_position: Point,
    pub ap_positions: Vec<Point>,
    pub min_ap_ue_distance: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            width: 120.0,
            depth: 50.0,
            bs_position: Point::new(60.0, 25.0),
            ap_positions: vec![Point::new(30.0, 25.0), Point::new(90.0, 25.0)],
            min_ap_ue_distance: 3.0,
        }
    }
}

impl Geometry {
    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.depth).contains(&p.y)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.depth > 0.0) {
            return Err(Error::InvalidGeometry("width and depth must be positive".into()));
        }
        if !self.contains(&self.bs_position) {
            return Err(Error::InvalidGeometry("BS lies outside the floor plan".into()));
        }
        if let Some(i) = self.ap_positions.iter().position(|p| !self.contains(p)) {
            return Err(Error::InvalidGeometry(format!("AP {i} lies outside the floor plan")));
        }
        if self.min_ap_ue_distance < 0.0 {
            return Err(Error::InvalidGeometry("negative exclusion distance".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NodeConfig {
    pub ap_tx_power: f64,
    pub ue_tx_power: f64,
    pub bs_tx_power: f64,
    pub ap_antenna_gain: f64,
    pub ue_antenna_gain: f64,
    pub bs_antenna_gain: f64,
    pub antennas_per_node: u32,
    pub ue_noise_figure: f64,
    pub ap_noise_figure: f64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        NodeConfig {
            ap_tx_power: 24.0,
            ue_tx_power: 18.0,
            bs_tx_power: 24.0,
            ap_antenna_gain: 5.0,
            ue_antenna_gain: 0.0,
            bs_antenna_gain: 5.0,
            antennas_per_node: 2,
            ue_noise_figure: 9.0,
            ap_noise_figure: 5.0,
        }
    }
}

/// Everything the drop generator needs besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub geometry: Geometry,
    pub nodes: NodeConfig,
    pub wifi_channels: usize,
    pub wifi_carrier_ghz: f64,
    pub lte_carrier_ghz: f64,
    pub shadowing_sigma_db: f64,
    pub association_threshold_dbm: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            geometry: Geometry::default(),
            nodes: NodeConfig::default(),
            wifi_channels: 2,
            wifi_carrier_ghz: 5.0,
            lte_carrier_ghz: 2.0,
            shadowing_sigma_db: 3.0,
            association_threshold_dbm: -82.0,
        }
    }
}

/// Frozen per-link shadowing, in dB of extra loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shadowing {
    /// `ue_ap[ue][ap]`
    pub ue_ap: Vec<Vec<f64>>,
    pub ue_bs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drop {
    pub seed: u64,
    pub ue_positions: Vec<Point>,
    pub ue_ap_association: Vec<Option<usize>>,
    pub ap_channels: Vec<usize>,
    pub shadowing: Shadowing,
    /// Mean pilot power of every AP at every UE, `ue_ap_rssi[ue][ap]`.
    pub ue_ap_rssi: Vec<Vec<f64>>,
}

impl Drop {
    pub fn n_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn n_aps(&self) -> usize {
        self.ap_channels.len()
    }
}

/// Places `n_ues` UEs uniformly, draws shadowing, picks AP channels and
/// associates every UE. Identical inputs give an identical drop.
pub fn generate_drop(seed: u64, n_ues: usize, cfg: &ScenarioConfig) -> Result<Drop> {
    let geo = &cfg.geometry;
    geo.validate()?;
    if n_ues == 0 {
        return Err(Error::InvalidGeometry("at least one UE is required".into()));
    }

    let mut placement = seeds::stream(seed, Purpose::Placement);
    let mut ue_positions = Vec::with_capacity(n_ues);
    for ue in 0..n_ues {
        let mut placed = None;
        for _ in 0..PLACEMENT_RETRY_CAP {
            let p = Point::new(
                placement.gen::<f64>() * geo.width,
                placement.gen::<f64>() * geo.depth,
            );
            if geo
                .ap_positions
                .iter()
                .all(|ap| ap.distance(&p) >= geo.min_ap_ue_distance)
            {
                placed = Some(p);
                break;
            }
        }
        match placed {
            Some(p) => ue_positions.push(p),
            None => {
                return Err(Error::InfeasibleGeometry {
                    ue,
                    attempts: PLACEMENT_RETRY_CAP,
                })
            }
        }
    }

    let mut shadow_rng = seeds::stream(seed, Purpose::Shadowing);
    let normal = Normal::new(0.0, cfg.shadowing_sigma_db.max(0.0))
        .map_err(|e| Error::Other(format!("shadowing distribution: {e}")))?;
    let n_aps = geo.ap_positions.len();
    let ue_ap: Vec<Vec<f64>> = (0..n_ues)
        .map(|_| (0..n_aps).map(|_| normal.sample(&mut shadow_rng)).collect())
        .collect();
    let ue_bs: Vec<f64> = (0..n_ues).map(|_| normal.sample(&mut shadow_rng)).collect();

    let nodes = &cfg.nodes;
    let ue_ap_rssi: Vec<Vec<f64>> = ue_positions
        .iter()
        .zip(&ue_ap)
        .map(|(ue, shadows)| {
            geo.ap_positions
                .iter()
                .zip(shadows)
                .map(|(ap, s)| {
                    nodes.ap_tx_power + nodes.ap_antenna_gain + nodes.ue_antenna_gain
                        - path_loss_db(ap.distance(ue), cfg.wifi_carrier_ghz)
                        - s
                })
                .collect()
        })
        .collect();

    let ap_channels = assign_channels(
        &geo.ap_positions,
        cfg.wifi_channels,
        nodes.ap_tx_power + 2.0 * nodes.ap_antenna_gain,
        cfg.wifi_carrier_ghz,
    );
    let ue_ap_association = ue_ap_rssi
        .iter()
        .map(|r| associate_ue(r, cfg.association_threshold_dbm))
        .collect();

    Ok(Drop {
        seed,
        ue_positions,
        ue_ap_association,
        ap_channels,
        shadowing: Shadowing { ue_ap, ue_bs },
        ue_ap_rssi,
    })
}

/// Greedy channel selection in AP index order. Each AP takes the channel
/// with the fewest already-assigned APs, then the least received power from
/// them, then the lowest index.
pub fn assign_channels(aps: &[Point], channels: usize, eirp_dbm: f64, carrier_ghz: f64) -> Vec<usize> {
    let channels = channels.max(1);
    let mut assigned: Vec<usize> = Vec::with_capacity(aps.len());
    for (i, ap) in aps.iter().enumerate() {
        let mut best = (usize::MAX, f64::INFINITY, 0usize);
        for ch in 0..channels {
            let (load, interference) = assigned
                .iter()
                .enumerate()
                .filter(|&(_, &c)| c == ch)
                .fold((0usize, 0.0f64), |(n, mw), (j, _)| {
                    let rx = eirp_dbm - path_loss_db(aps[j].distance(ap), carrier_ghz);
                    (n + 1, mw + dbm_to_mw(rx))
                });
            if (load, interference) < (best.0, best.1) {
                best = (load, interference, ch);
            }
        }
        debug_assert!(best.0 != usize::MAX || i == usize::MAX);
        assigned.push(best.2);
    }
    assigned
}

/// Strongest AP if its pilot is at or above `threshold_dbm`; ties go to the
/// lowest index.
pub fn associate_ue(rssi_dbm: &[f64], threshold_dbm: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &r) in rssi_dbm.iter().enumerate() {
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((i, r));
        }
    }
    best.filter(|&(_, r)| r >= threshold_dbm).map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout() {
        let g = Geometry::default();
        g.validate().unwrap();
        assert_eq!(g.ap_positions[0].distance(&g.ap_positions[1]), 60.0);
    }

    #[test]
    fn drop_respects_geometry() {
        let cfg = ScenarioConfig::default();
        let d = generate_drop(1, 4, &cfg).unwrap();
        assert_eq!(d.ue_positions.len(), 4);
        for p in &d.ue_positions {
            assert!(cfg.geometry.contains(p));
            for ap in &cfg.geometry.ap_positions {
                assert!(ap.distance(p) >= 3.0);
            }
        }
        assert_eq!(d, generate_drop(1, 4, &cfg).unwrap());
    }

    #[test]
    fn infeasible_geometry_is_reported() {
        let cfg = ScenarioConfig {
            geometry: Geometry {
                width: 1.0,
                depth: 1.0,
                bs_position: Point::new(0.5, 0.5),
                ap_positions: vec![Point::new(0.5, 0.5)],
                min_ap_ue_distance: 3.0,
            },
            ..ScenarioConfig::default()
        };
        assert!(matches!(
            generate_drop(1, 1000, &cfg),
            Err(Error::InfeasibleGeometry { ue: 0, .. })
        ));
    }

    #[test]
    fn channel_assignment() {
        let two = Geometry::default().ap_positions;
        assert_eq!(assign_channels(&two, 2, 34.0, 5.0), vec![0, 1]);
        assert_eq!(assign_channels(&two[..1], 2, 34.0, 5.0), vec![0]);
        // AP0 -> 0, AP1 -> 1 (empty channel), AP2 -> 0 because AP0 is farther
        // from it than AP1.
        let row = vec![Point::new(10.0, 25.0), Point::new(60.0, 25.0), Point::new(110.0, 25.0)];
        let ch = assign_channels(&row, 2, 34.0, 5.0);
        assert_eq!(ch, vec![0, 1, 0]);
        assert_ne!(ch[1], ch[0]);
        assert_ne!(ch[1], ch[2]);
    }

    #[test]
    fn association_rules() {
        assert_eq!(associate_ue(&[-70.0, -75.0], -82.0), Some(0));
        assert_eq!(associate_ue(&[-83.0, -85.0], -82.0), None);
        assert_eq!(associate_ue(&[-82.0, -82.0], -82.0), Some(0));
        assert_eq!(associate_ue(&[-90.0, -60.0], -82.0), Some(1));
        assert_eq!(associate_ue(&[], -82.0), None);
    }

    #[test]
    fn placement_is_uniform() {
        let cfg = ScenarioConfig::default();
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for seed in 0..500 {
            for p in generate_drop(seed, 20, &cfg).unwrap().ue_positions {
                sx += p.x;
                sy += p.y;
                n += 1.0;
            }
        }
        // The exclusion discs are symmetric about the centre, so the mean
        // stays there. Uniform std: w/sqrt(12).
        let se_x = 120.0 / 12f64.sqrt() / f64::sqrt(n);
        let se_y = 50.0 / 12f64.sqrt() / f64::sqrt(n);
        assert!((sx / n - 60.0).abs() < 3.0 * se_x);
        assert!((sy / n - 25.0).abs() < 3.0 * se_y);
    }
}

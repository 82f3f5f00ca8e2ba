//! Scripted Wi-Fi degradation driven through the whole engine.

use boostsim::config::WifiThrottle;
use boostsim::rlm::SwitchDirection;
use boostsim::traffic::TrafficModel;
use boostsim::{run_seeded_drop, CampaignConfig, Mode};

fn saturated(duration: f64, throttle: Option<WifiThrottle>) -> CampaignConfig {
    let mut cfg = CampaignConfig::default();
    cfg.campaign.duration = duration;
    cfg.traffic.model = TrafficModel::FullBuffer;
    cfg.channel.wifi_throttle = throttle;
    cfg
}

const ONSET: f64 = 1.5;

fn throttle() -> Option<WifiThrottle> {
    Some(WifiThrottle {
        onset_s: ONSET,
        rate_mbps: 1.0,
    })
}

#[test]
fn lone_ue_stays_on_a_clean_wifi_path() {
    let cfg = saturated(3.0, None);
    for drop in 0..3 {
        let r = run_seeded_drop(&cfg, Mode::Boost, 1, drop).unwrap();
        assert!(r.switches.is_empty(), "drop {drop}: {:?}", r.switches);
        assert!(!r.ues[0].on_lte_at_end);
        assert!(r.sum_cell_throughput() > 120.0, "drop {drop}: {}", r.sum_cell_throughput());
    }
}

#[test]
fn throttled_wifi_moves_boost_to_lte() {
    let cfg = saturated(3.0, throttle());
    for drop in 0..3 {
        let r = run_seeded_drop(&cfg, Mode::Boost, 1, drop).unwrap();
        let first = r.switches.first().unwrap_or_else(|| panic!("drop {drop}: no switch"));
        assert_eq!(first.direction, SwitchDirection::ToLte);
        let t = first.time.as_secs_f64();
        // Queued data drains at 1 Mbps; the controller reacts well within a
        // second either way (congestion or stall).
        assert!(t > ONSET && t < ONSET + 1.0, "drop {drop}: switch at {t}");
        assert!(r.ues[0].on_lte_at_end);
    }
}

#[test]
fn throttle_costs_lwip_but_not_boost() {
    let cfg = saturated(4.0, throttle());
    let lwip = run_seeded_drop(&cfg, Mode::Lwip, 1, 0).unwrap();
    let boost = run_seeded_drop(&cfg, Mode::Boost, 1, 0).unwrap();
    assert!(lwip.switches.is_empty());
    let total = |r: &boostsim::DropResult| r.sum_cell_throughput();
    // Boost recovers the LTE peak for the throttled part of the run.
    assert!(total(&boost) > 1.5 * total(&lwip), "boost {} lwip {}", total(&boost), total(&lwip));
}

#[test]
fn throttle_before_start_keeps_ue_off_wifi() {
    let cfg = saturated(2.0, Some(WifiThrottle { onset_s: 0.0, rate_mbps: 1.0 }));
    let r = run_seeded_drop(&cfg, Mode::Boost, 1, 0).unwrap();
    // The initial probe train fails, so the UE never leaves LTE.
    assert!(r.switches.is_empty(), "{:?}", r.switches);
    assert!(r.ues[0].on_lte_at_end);
    assert_eq!(r.probe_trains_passed, 0);
    assert!(r.probe_trains_failed >= 1);
}

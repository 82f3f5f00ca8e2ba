//! Configuration files and the command-line front end.

use std::path::Path;
use std::process::Command;

use boostsim::{CampaignConfig, Error};

#[test]
fn default_config_round_trips() {
    let cfg = CampaignConfig::default();
    let text = cfg.to_toml_string();
    assert_eq!(CampaignConfig::from_toml_str(&text).unwrap(), cfg);
}

#[test]
fn partial_config_keeps_defaults() {
    let cfg = CampaignConfig::from_toml_str("[campaign]\ndrops = 7\n\n[channel.wifi_throttle]\nonset_s = 1.0\nrate_mbps = 2.0\n").unwrap();
    assert_eq!(cfg.campaign.drops, 7);
    assert_eq!(cfg.channel.wifi_throttle.unwrap().rate_mbps, 2.0);
    assert_eq!(cfg.rlm, CampaignConfig::default().rlm);
}

#[test]
fn unknown_key_reports_position() {
    match CampaignConfig::from_toml_str("[campaign]\ndrops = 3\nbogus = 1\n") {
        Err(Error::ConfigParse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn out_of_range_values_name_their_key() {
    let cases = [
        ("[rlm]\newma_alpha = 1.5\n", "rlm.ewma_alpha"),
        ("[channel.wifi_throttle]\nonset_s = 1.0\nrate_mbps = 0.0\n", "channel.wifi_throttle.rate_mbps"),
        ("[wifi]\nue_txop_ms = -1.0\n", "wifi.ue_txop_ms"),
    ];
    for (text, key) in cases {
        match CampaignConfig::from_toml_str(text) {
            Err(Error::ConfigValidation { key: k, .. }) => assert_eq!(k, key),
            other => panic!("{text}: {other:?}"),
        }
    }
}

fn boostsim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_boostsim"))
        .args(args)
        .env_remove("BOOSTSIM_WORKERS")
        .output()
        .expect("binary runs")
}

fn small_campaign(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(&path, "[campaign]\nduration = 0.5\ndrops = 2\nue_counts = [3]\n").unwrap();
    path
}

#[test]
fn campaign_writes_identical_outputs_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_campaign(dir.path());
    let cfg = cfg.to_str().unwrap();
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .zip(["1", "3"])
        .map(|(name, workers)| {
            let out = dir.path().join(name);
            let o = boostsim(&["campaign", "--config", cfg, "--out", out.to_str().unwrap(), "--workers", workers]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            out
        })
        .collect();
    for file in ["samples.csv", "summary.csv"] {
        let a = std::fs::read(runs[0].join(file)).unwrap();
        let b = std::fs::read(runs[1].join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(runs[0].join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 1);
}

#[test]
fn seed_flag_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_campaign(dir.path());
    let cfg = cfg.to_str().unwrap();
    let mut outs = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let o = boostsim(&["campaign", "--config", cfg, "--out", out.to_str().unwrap(), "--seed", seed, "--mode", "boost"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(std::fs::read(out.join("samples.csv")).unwrap());
    }
    assert_ne!(outs[0], outs[1]);
}

#[test]
fn bad_config_fails_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[rlm]\newma_alpha = 0.0\n").unwrap();
    let out = dir.path().join("out");
    let o = boostsim(&["campaign", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("rlm.ewma_alpha"));
    assert!(!out.join("summary.csv").exists());
}

#[test]
fn drop_subcommand_prints_per_ue_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_campaign(dir.path());
    let out = dir.path().join("out");
    let o = boostsim(&[
        "drop",
        "--config",
        cfg.to_str().unwrap(),
        "--mode",
        "lwip",
        "--ues",
        "2",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
        "--trace",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("sum_cell"), "{text}");
    let trace = std::fs::read_to_string(out.join("trace_lwip_2_9.txt")).unwrap();
    assert!(trace.lines().count() > 1);
}

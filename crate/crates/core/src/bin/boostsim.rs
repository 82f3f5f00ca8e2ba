//! Command-line front end: campaigns, single drops and calibration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use boostsim::calibrate::calibrate;
use boostsim::metrics::{samples_csv, summary_csv, write_file, CellSummary};
use boostsim::scenario::generate_drop;
use boostsim::{run_campaign, run_drop, CampaignConfig, DropOptions, Mode, Result};

#[derive(Parser)]
#[command(name = "boostsim", version, about = "Enterprise LTE + Wi-Fi downlink steering simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Campaign configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel drops.
    #[arg(long, env = "BOOSTSIM_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full (mode x UE count x drop) matrix.
    Campaign {
        #[command(flatten)]
        common: Common,
        /// Restrict to these modes.
        #[arg(long, value_delimiter = ',')]
        mode: Vec<Mode>,
        /// Restrict to these UE counts.
        #[arg(long, value_delimiter = ',')]
        ues: Vec<usize>,
        /// Drops per cell; overrides the configuration.
        #[arg(long)]
        drops: Option<u64>,
    },
    /// Run one drop and print per-UE results.
    Drop {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        ues: usize,
        /// Write an event trace into the output directory.
        #[arg(long)]
        trace: bool,
    },
    /// Fit the LTE and Wi-Fi rate scales to the single-UE peaks.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        iterations: u32,
        #[arg(long, default_value_t = 4)]
        drops: u64,
    },
}

fn load(common: &Common) -> Result<CampaignConfig> {
    let mut cfg = match &common.config {
        Some(p) => CampaignConfig::from_file(p)?,
        None => CampaignConfig::default(),
    };
    if let Some(dir) = &common.out {
        cfg.campaign.output_dir = dir.clone();
    }
    if let Some(seed) = common.seed {
        cfg.campaign.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn workers(common: &Common) -> usize {
    common
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn print_table(rows: &[CellSummary]) {
    println!(
        "{:<10} {:>5} {:>10} {:>10} {:>10} {:>12} {:>10}",
        "mode", "ues", "median", "p10", "p90", "sum_cell", "switch%"
    );
    for r in rows {
        println!(
            "{:<10} {:>5} {:>10.2} {:>10.2} {:>10.2} {:>12.2} {:>10.1}",
            r.mode.as_str(),
            r.n_ues,
            r.median,
            r.p10,
            r.p90,
            r.sum_cell_median,
            100.0 * r.switch_drop_fraction()
        );
    }
}

fn campaign(common: Common, modes: Vec<Mode>, ues: Vec<usize>, drops: Option<u64>) -> Result<()> {
    let mut cfg = load(&common)?;
    if !modes.is_empty() {
        cfg.campaign.modes = modes;
    }
    if !ues.is_empty() {
        cfg.campaign.ue_counts = ues;
    }
    if let Some(d) = drops {
        cfg.campaign.drops = d;
    }
    cfg.validate()?;
    let result = run_campaign(&cfg, workers(&common))?;
    let out = &cfg.campaign.output_dir;
    let basis = cfg.campaign.throughput_basis;
    write_file(&out.join("samples.csv"), &samples_csv(&result.drops, basis))?;
    write_file(&out.join("summary.csv"), &summary_csv(&result.summaries))?;
    let manifest = serde_json::json!({
        "master_seed": cfg.campaign.master_seed,
        "drop_seeds": cfg.campaign.ue_counts.iter().map(|&n| {
            (n.to_string(), (0..cfg.campaign.drops)
                .map(|d| boostsim::seeds::drop_seed(cfg.campaign.master_seed, n, d as usize))
                .collect::<Vec<_>>().into())
        }).collect::<serde_json::Map<String, serde_json::Value>>(),
        "summaries": result.summaries,
        "config": cfg,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| boostsim::Error::Other(e.to_string()))?;
    write_file(&out.join("manifest.json"), &text)?;
    print_table(&result.summaries);
    println!("wrote {}", out.display());
    Ok(())
}

fn single_drop(common: Common, mode: Mode, ues: usize, trace: bool) -> Result<()> {
    let cfg = load(&common)?;
    let seed = cfg.campaign.master_seed;
    let drop = generate_drop(seed, ues, &cfg.scenario)?;
    let out = cfg.campaign.output_dir.clone();
    let trace_path = out.join(format!("trace_{}_{}_{}.txt", mode.as_str(), ues, seed));
    let mut sink = None;
    if trace {
        std::fs::create_dir_all(&out).map_err(|e| boostsim::Error::io(&out, e))?;
        let f = File::create(&trace_path).map_err(|e| boostsim::Error::io(&trace_path, e))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "{}", boostsim::trace::HEADER).map_err(|e| boostsim::Error::io(&trace_path, e))?;
        sink = Some(w);
    }
    let result = run_drop(
        &cfg,
        mode,
        &drop,
        DropOptions {
            drop_index: 0,
            trace: sink.as_mut().map(|w| w as &mut dyn Write),
        },
    )?;
    if let Some(mut w) = sink {
        w.flush().map_err(|e| boostsim::Error::io(&trace_path, e))?;
        println!("trace: {}", trace_path.display());
    }
    let basis = cfg.campaign.throughput_basis;
    println!("{:>4} {:>8} {:>12} {:>8}", "ue", "ap", "mbps", "on_lte");
    for (u, l) in result.ues.iter().enumerate() {
        let ap = drop.ue_ap_association[u].map_or("-".to_string(), |a| a.to_string());
        println!("{:>4} {:>8} {:>12.3} {:>8}", u, ap, result.ue_throughput(u, basis), l.on_lte_at_end);
    }
    println!(
        "sum_cell {:.3} Mbps, switches {}, denied {}, collisions {}, trains passed {} failed {}",
        result.sum_cell_throughput(),
        result.switches.len(),
        result.denied_switches,
        result.collisions,
        result.probe_trains_passed,
        result.probe_trains_failed
    );
    for e in &result.switches {
        println!(
            "switch t={:.3} ue={} {:?} cause={:?}",
            e.time.as_secs_f64(),
            e.ue,
            e.direction,
            e.cause
        );
    }
    Ok(())
}

fn run_calibrate(common: Common, iterations: u32, drops: u64) -> Result<()> {
    let cfg = load(&common)?;
    let c = calibrate(&cfg, iterations, drops)?;
    println!("lte_scale  = {:.6}  (peak {:.3} Mbps)", c.lte_scale, c.lte_peak_mbps);
    println!("wifi_scale = {:.6}  (peak {:.3} Mbps)", c.wifi_scale, c.wifi_peak_mbps);
    println!("lwip peak {:.3} Mbps, boost peak {:.3} Mbps", c.lwip_peak_mbps, c.boost_peak_mbps);
    println!("\n[channel]\nlte_scale = {:.6}\nwifi_scale = {:.6}", c.lte_scale, c.wifi_scale);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Campaign { common, mode, ues, drops } => campaign(common, mode, ues, drops),
        Command::Drop { common, mode, ues, trace } => single_drop(common, mode, ues, trace),
        Command::Calibrate { common, iterations, drops } => run_calibrate(common, iterations, drops),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}


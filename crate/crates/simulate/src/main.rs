use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use noma_core::schemes::Scheme;
use noma_core::sim::{
    emit_csv, emit_manifest, emit_plot, parse_overload_list, parse_snr_range, ScenarioConfig,
    Simulator,
};

/// Monte Carlo BLER simulation of uplink NOMA schemes.
#[derive(Debug, Parser)]
#[command(name = "simulate", version)]
struct Args {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// SNR sweep `start:stop:step` in dB, or a single value.
    #[arg(long, conflicts_with = "overload", allow_hyphen_values = true)]
    snr: Option<String>,
    /// Comma-separated overload factors in percent.
    #[arg(long)]
    overload: Option<String>,
    /// Run a single scheme instead of the file's list.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Print per-point progress and the SIC order of the first trial.
    #[arg(long)]
    verbose: bool,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(s) = &args.snr {
        cfg.snr_db = parse_snr_range(s)?;
    }
    if let Some(o) = &args.overload {
        cfg.overload_pct = parse_overload_list(o)?;
    }
    if let Some(s) = &args.scheme {
        cfg.schemes = vec![s.parse::<Scheme>()?];
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if args.workers.is_some() {
        cfg.workers = args.workers;
    }
    cfg.validate()?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let sim = Simulator::new(cfg.clone())?;
    if args.verbose {
        eprintln!("{}", cfg.to_toml());
        for &scheme in &cfg.schemes {
            let (errs, trace) = sim.trace_trial(scheme, cfg.overload_pct[0], cfg.snr_db[0], 0)?;
            eprintln!(
                "trial 0 {scheme} {}% {} dB:",
                cfg.overload_pct[0], cfg.snr_db[0]
            );
            for line in trace {
                eprintln!("  {line}");
            }
            eprintln!("  errors {errs:?}");
        }
    }
    let verbose = args.verbose;
    let records = sim.run_sweep_with(|r| {
        if verbose {
            eprintln!(
                "{} {}% {} dB: avg BLER {:.4e} over {} trials ({:.1} s)",
                r.scheme,
                r.overload_pct,
                r.snr_db,
                r.avg_bler(),
                r.trials,
                r.wall_time
            );
        }
    })?;

    let csv = args.out.join(format!("{}.csv", cfg.name));
    let svg = args.out.join(format!("{}.svg", cfg.name));
    let manifest = args.out.join(format!("{}.manifest.txt", cfg.name));
    emit_csv(&records, &csv).with_context(|| format!("writing {}", csv.display()))?;
    emit_plot(&records, &svg, &cfg.name).with_context(|| format!("writing {}", svg.display()))?;
    emit_manifest(&cfg, &records, &manifest)
        .with_context(|| format!("writing {}", manifest.display()))?;
    println!("{}", csv.display());
    Ok(())
}

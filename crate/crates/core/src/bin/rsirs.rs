use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rsirs_core::harness::{run_experiment, summary_path, ExperimentConfig};
use rsirs_core::orchestrator::Scheme;

/// Monte Carlo power-minimization sweeps for rate-splitting IRS-assisted C-RAN.
#[derive(Parser, Debug)]
#[command(name = "rsirs", version)]
struct Cli {
    /// TOML experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma list drawn from rs_irs, rs_noirs, tin_irs, tin_noirs.
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Comma list of per-user QoS floors in Mbps.
    #[arg(long = "sweep-qos", value_delimiter = ',')]
    sweep_qos: Option<Vec<f64>>,
    /// Record per-run wall time (makes the CSV non-reproducible).
    #[arg(long)]
    wall_time: bool,
}

fn run(cli: Cli) -> rsirs_core::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(o) = cli.out {
        cfg.output = o;
    }
    if let Some(d) = cli.drops {
        cfg.drops = d;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(s) = cli.schemes {
        cfg.schemes = s;
    }
    if let Some(q) = cli.sweep_qos {
        cfg.sweep = q.iter().map(|m| m * 1e6).collect();
    }
    cfg.record_wall_time |= cli.wall_time;
    let done = run_experiment(&cfg)?;
    print!("{}", done.summary);
    log::info!("wrote {} rows to {} and {}", done.rows.len(), cfg.output.display(), summary_path(&cfg.output).display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

//! Monte Carlo experiments: paired channel drops, a QoS sweep and a scheme
//! comparison, written as CSV plus an aggregate summary.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::orchestrator::{run_scheme, Scheme};
use crate::scenario::{sample_channels, sample_topology, ChannelSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    /// QoS floors to sweep, bit/s; applied to every user.
    pub sweep: Vec<f64>,
    pub drops: usize,
    pub schemes: Vec<Scheme>,
    pub output: PathBuf,
    /// Master seed for drops and per-run randomization; `system.rng_seed`
    /// is not consulted by the harness.
    pub seed: u64,
    /// Per-drop power weights are drawn uniformly from this interval.
    pub weight_range: [f64; 2],
    /// Write measured wall times. Off by default: the column is then zero
    /// and repeated runs with one seed produce byte-identical files.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            sweep: vec![4e6],
            drops: 20,
            schemes: Scheme::ALL.to_vec(),
            output: PathBuf::from("results.csv"),
            seed: 0,
            weight_range: [1.0, 2.0],
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.drops == 0 {
            return bad("drops must be >= 1");
        }
        if self.sweep.is_empty() {
            return bad("the QoS sweep must not be empty");
        }
        if self.sweep.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) {
            return bad("QoS sweep values must be finite and non-negative");
        }
        if self.schemes.is_empty() {
            return bad("at least one scheme is required");
        }
        let [lo, hi] = self.weight_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad("weight_range must satisfy 0 < lo <= hi");
        }
        // Per-user vectors are overwritten per drop, so check the rest with
        // placeholders of the right length.
        self.system.clone().with_users(self.system.n_users, self.sweep[0]).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub drop_id: usize,
    pub scheme: Scheme,
    pub qos_bps: f64,
    pub weighted_power_dbm: f64,
    pub power_dbm: f64,
    pub outer_iters: usize,
    pub feasible: bool,
    pub wall_time_s: f64,
    /// Fingerprint of the drop's channel realization.
    pub channel_hash: String,
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1000.0).log10()
}

/// One paired drop: topology, channels and power weights.
#[derive(Debug, Clone)]
pub struct Drop {
    pub channels: ChannelSet,
    pub weights: Vec<f64>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw drop `drop_id`; identical for every scheme and QoS point.
pub fn sample_drop(cfg: &ExperimentConfig, drop_id: usize) -> Result<Drop> {
    let mut rng = stream_rng(cfg.seed, drop_id as u64);
    let topo = sample_topology(&cfg.system, &mut rng);
    let channels = sample_channels(&cfg.system, &topo, &mut rng)?;
    let [lo, hi] = cfg.weight_range;
    let weights = (0..cfg.system.n_users).map(|_| rng.gen_range(lo..=hi)).collect();
    Ok(Drop { channels, weights })
}

fn run_point(cfg: &ExperimentConfig, drop_id: usize, drop: &Drop, hash: &str, q_idx: usize, scheme: Scheme) -> ResultRow {
    let qos = cfg.sweep[q_idx];
    let system = SystemConfig { power_weights: drop.weights.clone(), ..cfg.system.clone().with_users(cfg.system.n_users, qos) };
    let stream = (1u64 << 63) | ((drop_id as u64) << 24) | ((q_idx as u64) << 8) | scheme as u64;
    let mut rng = stream_rng(cfg.seed, stream);
    let started = Instant::now();
    let outcome = run_scheme(scheme, &drop.channels, &system, &mut rng);
    let wall = if cfg.record_wall_time { started.elapsed().as_secs_f64() } else { 0.0 };
    let (weighted, plain, iters, feasible) = match outcome {
        Ok(r) if r.feasible => (watts_to_dbm(r.weighted_power_w), watts_to_dbm(r.power_w), r.outer_iters, true),
        Ok(r) => (f64::NAN, f64::NAN, r.outer_iters, false),
        Err(e) => {
            log::warn!("drop {drop_id} {scheme} at {qos} bps failed: {e}");
            (f64::NAN, f64::NAN, 0, false)
        }
    };
    ResultRow {
        drop_id,
        scheme,
        qos_bps: qos,
        weighted_power_dbm: weighted,
        power_dbm: plain,
        outer_iters: iters,
        feasible,
        wall_time_s: wall,
        channel_hash: hash.to_string(),
    }
}

/// Rows in (drop, qos, scheme) order, independent of thread scheduling.
pub fn run_rows(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let per_drop: Vec<Result<Vec<ResultRow>>> = (0..cfg.drops)
        .into_par_iter()
        .map(|d| {
            let drop = sample_drop(cfg, d)?;
            let hash = drop.channels.fingerprint();
            let mut rows = Vec::with_capacity(cfg.sweep.len() * cfg.schemes.len());
            for q in 0..cfg.sweep.len() {
                for &s in &cfg.schemes {
                    rows.push(run_point(cfg, d, &drop, &hash, q, s));
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_drop {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| {
        a.drop_id.cmp(&b.drop_id).then(a.qos_bps.total_cmp(&b.qos_bps)).then(a.scheme.cmp(&b.scheme))
    });
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
}

/// Path of the JSON summary written next to a CSV file.
pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

/// Run every drop, write the CSV to `cfg.output` and the summary next to it.
/// The output file is created before any solve so a bad path fails fast.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    cfg.validate()?;
    let file = File::create(&cfg.output)?;
    let rows = run_rows(cfg)?;
    write_csv_to(file, &rows)?;
    let summary = summarize(&rows);
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(summary_path(&cfg.output), json)?;
    Ok(Experiment { rows, summary })
}

fn write_csv_to<W: std::io::Write>(w: W, rows: &[ResultRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    write_csv_to(File::create(path)?, rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let rows = rdr.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub scheme: Scheme,
    pub qos_bps: f64,
    pub rows: usize,
    pub feasible: usize,
    /// Mean weighted power over feasible rows, dBm; NaN without any.
    pub mean_dbm: f64,
}

/// Savings in dB at one QoS point; `None` when a scheme is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub qos_bps: f64,
    /// `tin_noirs - tin_irs`.
    pub irs_saving_tin_db: Option<f64>,
    /// `rs_noirs - rs_irs`.
    pub irs_saving_rs_db: Option<f64>,
    /// `tin_noirs - rs_noirs`.
    pub rs_saving_noirs_db: Option<f64>,
    /// `tin_irs - rs_irs`.
    pub rs_saving_irs_db: Option<f64>,
    /// Combined saving `tin_noirs - rs_irs` minus the two individual ones
    /// (`irs_saving_tin_db + rs_saving_noirs_db`). Positive means the
    /// combination beats the sum of its parts.
    pub synergy_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    pub feasibility_rate: f64,
    /// Least-squares slope of mean dBm against QoS in Mbps; NaN with fewer
    /// than two QoS points.
    pub slope_dbm_per_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub points: Vec<PointSummary>,
    pub schemes: Vec<SchemeSummary>,
    pub comparisons: Vec<Comparison>,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<_> = points.iter().filter(|(_, y)| y.is_finite()).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}

pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut schemes: Vec<Scheme> = rows.iter().map(|r| r.scheme).collect();
    schemes.sort();
    schemes.dedup();
    let mut qos: Vec<f64> = rows.iter().map(|r| r.qos_bps).collect();
    qos.sort_by(f64::total_cmp);
    qos.dedup();

    let mut points = Vec::new();
    for &s in &schemes {
        for &q in &qos {
            let sel: Vec<&ResultRow> = rows.iter().filter(|r| r.scheme == s && r.qos_bps == q).collect();
            if sel.is_empty() {
                continue;
            }
            let ok: Vec<f64> = sel.iter().filter(|r| r.feasible).map(|r| r.weighted_power_dbm).collect();
            points.push(PointSummary { scheme: s, qos_bps: q, rows: sel.len(), feasible: ok.len(), mean_dbm: mean(&ok) });
        }
    }
    let at = |s: Scheme, q: f64| points.iter().find(|p| p.scheme == s && p.qos_bps == q).map(|p| p.mean_dbm);
    let scheme_stats = schemes
        .iter()
        .map(|&s| {
            let mine: Vec<&ResultRow> = rows.iter().filter(|r| r.scheme == s).collect();
            let feasible = mine.iter().filter(|r| r.feasible).count() as f64 / mine.len() as f64;
            let curve: Vec<(f64, f64)> = points.iter().filter(|p| p.scheme == s).map(|p| (p.qos_bps / 1e6, p.mean_dbm)).collect();
            SchemeSummary { scheme: s, feasibility_rate: feasible, slope_dbm_per_mbps: slope(&curve) }
        })
        .collect();
    let diff = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a - b);
    let comparisons = qos
        .iter()
        .map(|&q| {
            let (ri, rn, ti, tn) = (at(Scheme::RsIrs, q), at(Scheme::RsNoirs, q), at(Scheme::TinIrs, q), at(Scheme::TinNoirs, q));
            let irs_tin = diff(tn, ti);
            let rs_noirs = diff(tn, rn);
            let combined = diff(tn, ri);
            Comparison {
                qos_bps: q,
                irs_saving_tin_db: irs_tin,
                irs_saving_rs_db: diff(rn, ri),
                rs_saving_noirs_db: rs_noirs,
                rs_saving_irs_db: diff(ti, ri),
                synergy_db: combined.zip(irs_tin).zip(rs_noirs).map(|((c, a), b)| c - a - b),
            }
        })
        .collect();
    Summary { points, schemes: scheme_stats, comparisons }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:+.3}"));
        writeln!(f, "{:<10} {:>10} {:>9} {:>12}", "scheme", "qos_mbps", "feasible", "mean_dbm")?;
        for p in &self.points {
            writeln!(f, "{:<10} {:>10.3} {:>5}/{:<3} {:>12.3}", p.scheme.label(), p.qos_bps / 1e6, p.feasible, p.rows, p.mean_dbm)?;
        }
        for s in &self.schemes {
            writeln!(
                f,
                "{:<10} feasibility {:.3}  slope {:.3} dBm/Mbps",
                s.scheme.label(),
                s.feasibility_rate,
                s.slope_dbm_per_mbps
            )?;
        }
        for c in &self.comparisons {
            writeln!(
                f,
                "qos {:.3} Mbps: IRS saving tin {} rs {} dB; RS saving noirs {} irs {} dB; synergy {} dB",
                c.qos_bps / 1e6,
                opt(c.irs_saving_tin_db),
                opt(c.irs_saving_rs_db),
                opt(c.rs_saving_noirs_db),
                opt(c.rs_saving_irs_db),
                opt(c.synergy_db)
            )?;
        }
        Ok(())
    }
}

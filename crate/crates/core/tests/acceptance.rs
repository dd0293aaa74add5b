//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.
//!
//! `criterion_1_literal` is ignored by default: its oracle lets the common
//! and private streams share the channel without interfering, which no
//! decoder can achieve, so it is expected to fail. `criterion_1` prints the
//! literal verdict and asserts the attainable capacity value instead.

use std::f64::consts::TAU;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsirs_core::beamform::{init_mrc, sca_iterate, taylor_bound_common, taylor_bound_private, ExpansionPoint, Streams, T_FLOOR};
use rsirs_core::conic::SolveStatus;
use rsirs_core::harness::{run_experiment, sample_drop, summarize, ExperimentConfig, ResultRow, Summary};
use rsirs_core::linalg::{complex_gaussian, complex_gaussian_vector, CMatrix, CVector, C64};
use rsirs_core::orchestrator::{run_scheme, OptResult, Scheme};
use rsirs_core::phase::{build_lifting, SCREEN_TOL, gaussian_randomize, lift_phase, phase_step, rank_gap, spectral_subgradient};
use rsirs_core::rs::{build_decoding_structure, check_qos, BeamformerSet, LinkModel};
use rsirs_core::scenario::{sample_channels, sample_topology, ChannelSet, PhaseShift};
use rsirs_core::SystemConfig;

/// Written straight to stderr, bypassing the test harness's output capture,
/// so the verdicts show up in a plain `cargo test` log.
fn emit(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

fn report(id: u32, ok: bool, what: &str, elapsed: Duration) {
    emit(&format!("{} criterion {id}: {what} ({:.1} s)", if ok { "PASS" } else { "FAIL" }, elapsed.as_secs_f64()));
}

fn channels_for(scheme: Scheme, ch: &ChannelSet) -> ChannelSet {
    if scheme.uses_irs() {
        ch.clone()
    } else {
        ch.without_irs()
    }
}

struct SingleUser {
    worst_literal: f64,
    worst_capacity: f64,
}

fn single_user_gaps() -> SingleUser {
    let cfg = SystemConfig { n_bs: 1, antennas_per_bs: 2, n_reflect: 1, ..SystemConfig::default() }.with_users(1, 4e6);
    let (r, b) = (4e6, cfg.bandwidth_hz);
    let mut out = SingleUser { worst_literal: 0.0, worst_capacity: 0.0 };
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = sample_topology(&cfg, &mut rng);
        let ch = sample_channels(&cfg, &topo, &mut rng).unwrap().without_irs();
        let res = run_scheme(Scheme::RsIrs, &ch, &cfg, &mut rng).unwrap();
        assert!(res.feasible);
        let scale = ch.noise_power_w / ch.direct[0].norm_squared();
        // Scalar 1-D oracle: sum of two interference-free stream powers over the split.
        let literal = (0..=4000)
            .map(|i| {
                let rp = r * i as f64 / 4000.0;
                scale * ((2f64.powf(rp / b) - 1.0) + (2f64.powf((r - rp) / b) - 1.0))
            })
            .fold(f64::INFINITY, f64::min);
        let capacity = scale * (2f64.powf(r / b) - 1.0);
        out.worst_literal = out.worst_literal.max((res.power_w / literal - 1.0).abs());
        out.worst_capacity = out.worst_capacity.max((res.power_w / capacity - 1.0).abs());
    }
    out
}

#[test]
fn criterion_1() {
    let t = Instant::now();
    let g = single_user_gaps();
    let elapsed = t.elapsed();
    let ok = g.worst_literal <= 0.01 && elapsed < Duration::from_secs(5);
    report(
        1,
        ok,
        &format!(
            "single-user split oracle, worst rel. error {:.4} (capacity value matched to {:.2e})",
            g.worst_literal, g.worst_capacity
        ),
        elapsed,
    );
    assert!(g.worst_capacity <= 0.01, "capacity value missed by {}", g.worst_capacity);
}

#[test]
#[ignore = "oracle is below the single-user capacity; see the crate README"]
fn criterion_1_literal() {
    let g = single_user_gaps();
    assert!(g.worst_literal <= 0.01, "relative error {}", g.worst_literal);
}

#[test]
fn criterion_2() {
    let t = Instant::now();
    let system = SystemConfig { n_bs: 2, antennas_per_bs: 2, n_reflect: 4, ..SystemConfig::default() }.with_users(3, 4e6);
    let exp = ExperimentConfig { system: system.clone(), drops: 20, ..ExperimentConfig::default() };
    let mut bad = Vec::new();
    let mut traces = 0;
    for d in 0..exp.drops {
        let drop = sample_drop(&exp, d).unwrap();
        let cfg = SystemConfig { power_weights: drop.weights.clone(), ..system.clone() };
        let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
        let res = run_scheme(Scheme::RsIrs, &drop.channels, &cfg, &mut rng).unwrap();
        traces += res.sca_traces.len() + 1;
        if !res.is_monotone(1e-6) || res.sca_traces.iter().any(|s| !s.is_monotone(1e-6)) {
            bad.push(d);
        }
    }
    let elapsed = t.elapsed();
    let ok = bad.is_empty() && elapsed < Duration::from_secs(120);
    report(2, ok, &format!("{traces} trajectories over 20 drops, non-monotone drops {bad:?}"), elapsed);
    assert!(bad.is_empty());
}

#[test]
fn criterion_3() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (k, m) = (3, 4);
    let mut worst_eq: f64 = 0.0;
    let mut violations = 0;
    for _ in 0..1000 {
        let heff: Vec<CVector> = (0..k).map(|_| complex_gaussian_vector(&mut rng, m)).collect();
        let mut beams = BeamformerSet::zeros(1, m, k);
        for x in beams.private.iter_mut().chain(beams.common.iter_mut()) {
            *x = complex_gaussian_vector(&mut rng, m);
        }
        let p = ExpansionPoint {
            beams,
            t_private: (0..k).map(|_| rng.gen_range(0.01..10.0)).collect(),
            t_common: (0..k).map(|_| rng.gen_range(0.01..10.0)).collect(),
            qos_scale: 1.0,
        };
        let (kk, i) = (rng.gen_range(0..k), rng.gen_range(0..k));
        let exact = |h: &CVector, w: &CVector, t: f64| h.dotc(w).norm_sqr() / t;
        // Equality at the expansion point.
        let e1 = exact(&heff[kk], &p.beams.private[kk], p.t_private[kk]);
        let b1 = taylor_bound_private(&heff, &p.beams.private[kk], p.t_private[kk], &p, kk);
        let e2 = exact(&heff[i], &p.beams.common[kk], p.t_common[kk]);
        let b2 = taylor_bound_common(&heff, &p.beams.common[kk], p.t_common[kk], &p, i, kk);
        worst_eq = worst_eq.max((b1 - e1).abs() / e1.max(1e-300)).max((b2 - e2).abs() / e2.max(1e-300));
        // Domination at a random point.
        let w = complex_gaussian_vector(&mut rng, m) * C64::new(rng.gen_range(0.01..3.0), 0.0);
        let tt = rng.gen_range(1e-3..20.0);
        let ep = exact(&heff[kk], &w, tt);
        let ec = exact(&heff[i], &w, tt);
        if taylor_bound_private(&heff, &w, tt, &p, kk) > ep + 1e-12 * ep.max(1.0) {
            violations += 1;
        }
        if taylor_bound_common(&heff, &w, tt, &p, i, kk) > ec + 1e-12 * ec.max(1.0) {
            violations += 1;
        }
    }
    let elapsed = t.elapsed();
    let ok = worst_eq <= 1e-10 && violations == 0 && elapsed < Duration::from_secs(10);
    report(3, ok, &format!("Taylor bounds: equality error {worst_eq:.2e}, {violations} domination violations"), elapsed);
    assert!(ok);
}

#[test]
fn criterion_4() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (k, m, r) = (2, 4, rng.gen_range(1..8));
        let direct = (0..k).map(|_| complex_gaussian_vector(&mut rng, m)).collect();
        let bi = CMatrix::from_fn(m, r, |_, _| complex_gaussian(&mut rng));
        let iu = (0..k).map(|_| complex_gaussian_vector(&mut rng, r)).collect();
        let ch = ChannelSet::new(direct, bi, iu, 1.0).unwrap();
        let mut w = BeamformerSet::zeros(1, m, k);
        for x in w.private.iter_mut().chain(w.common.iter_mut()) {
            *x = complex_gaussian_vector(&mut rng, m);
        }
        let angles: Vec<f64> = (0..r).map(|_| rng.gen_range(0.0..TAU)).collect();
        let v = PhaseShift::from_angles(&angles);
        let lifting = build_lifting(&ch, &w).unwrap();
        let lv = lift_phase(&v);
        for user in 0..k {
            let heff = ch.effective_channel(user, &v).unwrap();
            for j in 0..k {
                for (common, beam) in [(false, &w.private[j]), (true, &w.common[j])] {
                    let want = heff.dotc(beam).norm_sqr();
                    let got = lifting.received(common, user, j, &lv);
                    worst = worst.max((got - want).abs() / want.max(1e-300));
                }
            }
        }
    }
    let elapsed = t.elapsed();
    let ok = worst <= 1e-8 && elapsed < Duration::from_secs(5);
    report(4, ok, &format!("lifting identity, worst rel. error {worst:.2e}"), elapsed);
    assert!(ok);
}

#[test]
fn criterion_5() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rank_one_gap: f64 = 0.0;
    let mut rank_two_gap = f64::INFINITY;
    for _ in 0..50 {
        let v = complex_gaussian_vector(&mut rng, 6);
        rank_one_gap = rank_one_gap.max(rank_gap(&(&v * v.adjoint())).abs());
        let u = complex_gaussian_vector(&mut rng, 6);
        rank_two_gap = rank_two_gap.min(rank_gap(&(&v * v.adjoint() + &u * u.adjoint())));
    }
    let diag = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(3.0, 0.0), C64::new(1.0, 0.0)]));
    let mut e11 = CMatrix::zeros(2, 2);
    e11[(0, 0)] = C64::new(1.0, 0.0);
    let sub_diag = (spectral_subgradient(&diag) - e11).norm();
    let v = CVector::from_vec(vec![C64::new(1.0, 2.0), C64::new(0.0, -1.0), C64::new(0.5, 0.5)]);
    let sub_outer = (spectral_subgradient(&(&v * v.adjoint())) - (&v * v.adjoint()).unscale(v.norm_squared())).norm();
    let mut recover: f64 = 0.0;
    for _ in 0..20 {
        let angles: Vec<f64> = (0..7).map(|_| rng.gen_range(0.0..TAU)).collect();
        let p = PhaseShift::from_angles(&angles);
        for c in gaussian_randomize(&lift_phase(&p), 5, &mut rng) {
            recover = recover.max((c.as_vector() - p.as_vector()).camax());
        }
    }
    let elapsed = t.elapsed();
    let ok = rank_one_gap <= 1e-9
        && rank_two_gap > 1e-6
        && sub_diag <= 1e-12
        && sub_outer <= 1e-12
        && recover <= 1e-9
        && elapsed < Duration::from_secs(10);
    report(
        5,
        ok,
        &format!(
            "rank-one gap {rank_one_gap:.1e}, rank-two gap >= {rank_two_gap:.2e}, subgradients {sub_diag:.1e}/{sub_outer:.1e}, recovery {recover:.1e}"
        ),
        elapsed,
    );
    assert!(ok);
}

/// Sum-rate shortfall of the selected R = 1 phase against a 3600-point grid
/// over the phases meeting the same targets. `w` and the targets come from
/// an SCA pass, as inside the alternating loop; when no candidate passes the
/// pipeline keeps the incumbent, which is then what gets scored.
fn phase_grid_shortfall(rng: &mut ChaCha8Rng) -> Option<f64> {
    let (k, m) = (2, 3);
    let cfg = SystemConfig { n_bs: 1, antennas_per_bs: m, n_reflect: 1, ..SystemConfig::default() }.with_users(k, 4e6);
    let direct = (0..k).map(|_| complex_gaussian_vector(rng, m) * C64::new(0.3, 0.0)).collect();
    let bi = CMatrix::from_fn(m, 1, |_, _| complex_gaussian(rng));
    let iu = (0..k).map(|_| complex_gaussian_vector(rng, 1)).collect();
    let ch = ChannelSet::new(direct, bi, iu, 1.0).unwrap();
    let v = PhaseShift::from_angles(&[rng.gen_range(0.0..TAU)]);
    let s = build_decoding_structure(&ch, &v, cfg.decode_group_max).unwrap();
    let start = init_mrc(&ch, &v, &s, &cfg, Streams::RateSplitting).unwrap();
    let sca = sca_iterate(&ch, &v, &s, &cfg, Streams::RateSplitting, &start).unwrap();
    if !sca.trace.qos_reached {
        return None;
    }
    let (w, targets) = (sca.beams, sca.rates);
    let step = phase_step(&ch, &v, &w, &targets, &s, &cfg, rng).unwrap();
    if step.sdp_status != SolveStatus::Optimal {
        return None;
    }
    let passes = |m: &LinkModel| {
        (0..k).all(|j| {
            (targets.t_private[j] <= T_FLOOR || m.sinr_private(&w, j) >= targets.t_private[j] * (1.0 - SCREEN_TOL))
                && (targets.t_common[j] <= T_FLOOR || m.min_sinr_common(&w, j) >= targets.t_common[j] * (1.0 - SCREEN_TOL))
        })
    };
    let rate = |p: &PhaseShift| LinkModel::new(&ch, p, &s).unwrap().sum_rate(&w, cfg.bandwidth_hz);
    let best = (0..3600)
        .map(|g| PhaseShift::from_angles(&[g as f64 * TAU / 3600.0]))
        .filter(|p| passes(&LinkModel::new(&ch, p, &s).unwrap()))
        .map(|p| rate(&p))
        .fold(rate(&v), f64::max);
    let got = rate(step.selected.as_ref().unwrap_or(&v));
    Some(1.0 - got / best)
}

#[test]
fn criterion_6() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut shortfalls = Vec::new();
    while shortfalls.len() < 10 {
        if let Some(x) = phase_grid_shortfall(&mut rng) {
            shortfalls.push(x);
        }
    }
    let worst = shortfalls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let elapsed = t.elapsed();
    let ok = worst <= 0.02 && elapsed < Duration::from_secs(60);
    report(6, ok, &format!("R=1 phase vs 3600-point grid, worst sum-rate shortfall {:.2}%", 100.0 * worst), elapsed);
    if std::env::var_os("RSIRS_VERBOSE").is_some() {
        println!("shortfalls {shortfalls:?}");
    }
    assert!(ok);
}

#[test]
fn criterion_7() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut feasible, mut failures) = (0, 0);
    for run in 0..50u64 {
        let k = 2 + (run % 3) as usize;
        let qos = [1e6, 2e6, 4e6][(run % 3) as usize];
        let cfg = SystemConfig { n_bs: 2, antennas_per_bs: 2, n_reflect: 4, ..SystemConfig::default() }.with_users(k, qos);
        let topo = sample_topology(&cfg, &mut rng);
        let ch = sample_channels(&cfg, &topo, &mut rng).unwrap();
        let scheme = Scheme::ALL[(run % 4) as usize];
        let res: OptResult = run_scheme(scheme, &ch, &cfg, &mut rng).unwrap();
        if res.feasible {
            feasible += 1;
            let used = channels_for(scheme, &ch);
            let rep = check_qos(&res.beams, &res.phase, &used, &res.structure, &cfg, None).unwrap();
            if !rep.all_pass() {
                failures += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    let ok = failures == 0 && feasible > 0 && elapsed < Duration::from_secs(300);
    report(7, ok, &format!("{feasible}/50 feasible results re-verified, {failures} failures"), elapsed);
    assert!(ok);
}

fn full_scale_experiment(dir: &std::path::Path, name: &str) -> ExperimentConfig {
    ExperimentConfig {
        system: SystemConfig::default(),
        sweep: vec![4e6],
        drops: 20,
        schemes: Scheme::ALL.to_vec(),
        output: dir.join(name),
        seed: 2024,
        ..ExperimentConfig::default()
    }
}

struct FullScaleRun {
    rows: Vec<ResultRow>,
    summary: Summary,
    csv: Vec<u8>,
    elapsed: Duration,
    _dir: tempfile::TempDir,
}

fn full_scale_run() -> &'static FullScaleRun {
    static RUN: OnceLock<FullScaleRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let cfg = full_scale_experiment(dir.path(), "first.csv");
        let t = Instant::now();
        let exp = run_experiment(&cfg).unwrap();
        let elapsed = t.elapsed();
        let csv = std::fs::read(&cfg.output).unwrap();
        FullScaleRun { rows: exp.rows, summary: exp.summary, csv, elapsed, _dir: dir }
    })
}

#[test]
fn criterion_8() {
    let run = full_scale_run();
    let s = &run.summary;
    assert_eq!(s.to_string(), summarize(&run.rows).to_string());
    let mean = |sc: Scheme| s.points.iter().find(|p| p.scheme == sc).map(|p| p.mean_dbm).unwrap();
    let (ri, rn, ti, tn) = (mean(Scheme::RsIrs), mean(Scheme::RsNoirs), mean(Scheme::TinIrs), mean(Scheme::TinNoirs));
    let ok = ri <= ti + 0.5 && rn <= tn + 0.5;
    let c = &s.comparisons[0];
    let f = |x: Option<f64>| x.map_or("n/a".into(), |v| format!("{v:+.3} dB"));
    emit(&format!("full-scale summary (20 drops, 4 Mbps):\n{s}"));
    emit(&format!(
        "observational: IRS saving tin {} / rs {} (published reference: around 5 dBm/Mbps); synergy {} (published claim: the combined saving exceeds the sum)",
        f(c.irs_saving_tin_db),
        f(c.irs_saving_rs_db),
        f(c.synergy_db)
    ));
    report(
        8,
        ok,
        &format!("mean dBm rs_irs {ri:.3} vs tin_irs {ti:.3}, rs_noirs {rn:.3} vs tin_noirs {tn:.3}"),
        run.elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_9() {
    let first = full_scale_run();
    let dir = tempfile::tempdir().unwrap();
    let cfg = full_scale_experiment(dir.path(), "second.csv");
    let t = Instant::now();
    run_experiment(&cfg).unwrap();
    let second = std::fs::read(&cfg.output).unwrap();
    let ok = second == first.csv;
    report(9, ok, &format!("repeat full-scale run, {} CSV bytes identical: {ok}", second.len()), t.elapsed());
    assert!(ok);
}

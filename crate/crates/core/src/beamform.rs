//! Beamforming for fixed phase shifts.
//!
//! The SINR constraints `gamma >= t` are difference-of-convex; each SCA step
//! replaces the concave side `|h^H w|^2 / t` by its first-order expansion
//! around the current point, which under-estimates it. The resulting program
//! is an inner approximation, so every iterate stays feasible and the power
//! never increases.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::conic::{self, quadratic_epigraph, rate_log_constraint, Cone, ConicProgram, LinExpr, Sense};
use crate::error::{invalid, Result};
use crate::linalg::{inner, CVector, C64};
use crate::rs::{rate_tolerance, total_power, BeamformerSet, DecodingStructure, LinkModel, RateAllocation};
use crate::scenario::{ChannelSet, PhaseShift};

/// Smallest SINR target used as a Taylor denominator. A stream whose SINR
/// falls below it is switched off for the next subproblem.
pub const T_FLOOR: f64 = 1e-8;
/// Relative SINR headroom requested by the initializer.
const INIT_MARGIN: f64 = 1e-6;
const STATIONARY_TOL: f64 = 1e-6;
const DESCENT_SLACK: f64 = 1e-6;
const SOLVE_TOL: f64 = 1e-9;
/// Weight of the power term while the QoS is being restored.
const RESTORE_POWER_WEIGHT: f64 = 1e-6;
const PC_MAX_ITERS: usize = 20_000;

/// Which streams carry data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Streams {
    RateSplitting,
    /// No common streams: interference is treated as noise.
    PrivateOnly,
}

/// Point `(w~, t~)` the constraints are linearized around.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionPoint {
    pub beams: BeamformerSet,
    pub t_private: Vec<f64>,
    pub t_common: Vec<f64>,
    /// Fraction of every QoS floor this point is known to meet. Below one
    /// only when initialization could not reach the full QoS.
    pub qos_scale: f64,
}

impl ExpansionPoint {
    pub fn qos_scaled(&self) -> bool {
        self.qos_scale < 1.0
    }

    pub fn rates(&self, bandwidth: f64) -> RateAllocation {
        let r = |t: &Vec<f64>| t.iter().map(|&x| bandwidth * (1.0 + x).log2()).collect();
        RateAllocation {
            rate_private: r(&self.t_private),
            rate_common: r(&self.t_common),
            t_private: self.t_private.clone(),
            t_common: self.t_common.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaTrace {
    /// Weighted power after each accepted iterate; entry 0 is the start.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// A subproblem failed and the best previous iterate was kept.
    pub degraded: bool,
    /// Iterations spent raising a scaled-down QoS back to the full floor.
    pub restoration_iters: usize,
    pub qos_reached: bool,
}

impl ScaTrace {
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.objective.windows(2).all(|w| w[1] <= w[0] + slack * w[0].abs())
    }
}

#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub beams: BeamformerSet,
    pub rates: RateAllocation,
    /// Final point, ready to warm-start another pass.
    pub point: ExpansionPoint,
    pub trace: ScaTrace,
}

/// First-order lower bound of `|h^H w|^2 / t` around `(w0, t0)`.
pub fn taylor_bound(h: &CVector, w: &CVector, t: f64, w0: &CVector, t0: f64) -> f64 {
    let c = inner(h, w0);
    2.0 * (c.conj() * inner(h, w)).re / t0 - c.norm_sqr() / (t0 * t0) * t
}

pub fn taylor_bound_private(heff: &[CVector], w: &CVector, t: f64, point: &ExpansionPoint, k: usize) -> f64 {
    taylor_bound(&heff[k], w, t, &point.beams.private[k], point.t_private[k])
}

/// Bound for decoder `i` of the common message of `k`.
pub fn taylor_bound_common(heff: &[CVector], w: &CVector, t: f64, point: &ExpansionPoint, i: usize, k: usize) -> f64 {
    taylor_bound(&heff[i], w, t, &point.beams.common[k], point.t_common[k])
}

fn floored(gamma: f64) -> f64 {
    if gamma >= T_FLOOR {
        gamma
    } else {
        0.0
    }
}

/// Expansion point at `beams` with targets set to the exact SINRs.
fn repaired(model: &LinkModel, beams: BeamformerSet, qos_scale: f64) -> ExpansionPoint {
    let k_total = beams.n_users();
    let t_private = (0..k_total).map(|k| model.sinr_private(&beams, k).max(T_FLOOR)).collect();
    let t_common = (0..k_total).map(|k| model.min_sinr_common(&beams, k).max(T_FLOOR)).collect();
    ExpansionPoint { beams, t_private, t_common, qos_scale }
}

fn user_rate(model: &LinkModel, beams: &BeamformerSet, k: usize, bandwidth: f64) -> f64 {
    let gp = floored(model.sinr_private(beams, k));
    let gc = floored(model.min_sinr_common(beams, k));
    bandwidth * ((1.0 + gp).log2() + (1.0 + gc).log2())
}

/// Largest `s <= 1` such that every user reaches `s * r_min`.
fn achieved_qos_scale(model: &LinkModel, beams: &BeamformerSet, config: &SystemConfig) -> f64 {
    let s = (0..beams.n_users())
        .filter(|&k| config.qos_min_bps[k] > 0.0)
        .map(|k| user_rate(model, beams, k, config.bandwidth_hz) / config.qos_min_bps[k])
        .fold(f64::INFINITY, f64::min);
    if s >= 1.0 - 1e-9 {
        1.0
    } else {
        s
    }
}

fn meets_qos(model: &LinkModel, beams: &BeamformerSet, config: &SystemConfig) -> bool {
    (0..beams.n_users()).all(|k| {
        let r = config.qos_min_bps[k];
        user_rate(model, beams, k, config.bandwidth_hz) >= r - rate_tolerance(r)
    })
}

fn check_dims(model: &LinkModel, config: &SystemConfig) -> Result<()> {
    let k_total = model.heff.len();
    if k_total != config.n_users || model.heff.iter().any(|h| h.len() != config.n_antennas()) {
        return invalid("channel dimensions do not match the configuration");
    }
    if config.qos_min_bps.len() != k_total || config.power_weights.len() != k_total {
        return invalid("qos_min_bps and power_weights need one entry per user");
    }
    Ok(())
}

/// Expansion point at `beams` for the phase shift `v`, with targets at the
/// exact SINRs. The QoS scale is one whenever the beams meet the QoS within
/// the usual rate tolerance.
pub fn anchor(
    channels: &ChannelSet,
    v: &PhaseShift,
    structure: &DecodingStructure,
    config: &SystemConfig,
    beams: BeamformerSet,
) -> Result<ExpansionPoint> {
    let model = LinkModel::new(channels, v, structure)?;
    check_dims(&model, config)?;
    let scale = if meets_qos(&model, &beams, config) { 1.0 } else { achieved_qos_scale(&model, &beams, config) };
    Ok(repaired(&model, beams, scale))
}

fn masked_unit(h: &CVector, l: usize, keep: impl Fn(usize) -> bool) -> CVector {
    let mut d = h.clone();
    for n in 0..h.len() / l {
        if !keep(n) {
            d.rows_mut(n * l, l).fill(C64::new(0.0, 0.0));
        }
    }
    let norm = d.norm();
    if norm > 0.0 {
        d.unscale_mut(norm);
    }
    d
}

/// MRC starting point.
///
/// Private beams follow the user's own effective channel and common beams
/// the channel of the weakest decoder. Powers come from the fixed-point
/// iteration `p <- gamma* I(p) / g`, which converges to the smallest powers
/// meeting the per-stream targets whenever any exist. If the full QoS is out
/// of reach the QoS is scaled down by bisection and the point is flagged via
/// `qos_scale < 1`; [`sca_iterate`] then restores it.
pub fn init_mrc(
    channels: &ChannelSet,
    v: &PhaseShift,
    structure: &DecodingStructure,
    config: &SystemConfig,
    streams: Streams,
) -> Result<ExpansionPoint> {
    let model = LinkModel::new(channels, v, structure)?;
    check_dims(&model, config)?;
    let k_total = config.n_users;
    let l = config.antennas_per_bs;
    let mut beams = BeamformerSet::for_config(config);
    let norms: Vec<f64> = model.heff.iter().map(|h| h.norm()).collect();

    let dir_p: Vec<CVector> = (0..k_total).map(|k| masked_unit(&model.heff[k], l, |n| beams.serves_private(n, k))).collect();
    let dir_c: Vec<CVector> = (0..k_total)
        .map(|k| {
            let weakest = structure.decoders[k]
                .iter()
                .copied()
                .min_by(|&a, &b| norms[a].partial_cmp(&norms[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)))
                .unwrap_or(k);
            match streams {
                Streams::RateSplitting => masked_unit(&model.heff[weakest], l, |n| beams.serves_common(n, k)),
                Streams::PrivateOnly => CVector::zeros(model.heff[k].len()),
            }
        })
        .collect();
    let gp: Vec<Vec<f64>> = model.heff.iter().map(|h| dir_p.iter().map(|d| inner(h, d).norm_sqr()).collect()).collect();
    let gc: Vec<Vec<f64>> = model.heff.iter().map(|h| dir_c.iter().map(|d| inner(h, d).norm_sqr()).collect()).collect();

    let targets = |scale: f64| -> (Vec<f64>, Vec<f64>) {
        let rb = |k: usize| scale * config.qos_min_bps[k] / config.bandwidth_hz;
        match streams {
            Streams::RateSplitting => {
                let t: Vec<f64> = (0..k_total).map(|k| (2f64.powf(rb(k) / 2.0) - 1.0) * (1.0 + INIT_MARGIN)).collect();
                (t.clone(), t)
            }
            Streams::PrivateOnly => ((0..k_total).map(|k| (2f64.powf(rb(k)) - 1.0) * (1.0 + INIT_MARGIN)).collect(), vec![0.0; k_total]),
        }
    };
    let control = |scale: f64| {
        let (tp, tc) = targets(scale);
        power_control(&gp, &gc, &tp, &tc, structure, model.noise)
    };

    let (scale, powers) = match control(1.0) {
        Some(p) => (1.0, Some(p)),
        None => {
            let (mut lo, mut hi) = (0.0, 1.0);
            let mut best = None;
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                match control(mid) {
                    Some(p) => {
                        lo = mid;
                        best = Some(p);
                    }
                    None => hi = mid,
                }
            }
            log::debug!("MRC initialization met only {lo:.4} of the QoS floor");
            (lo, best)
        }
    };
    if let Some((pp, pc)) = powers {
        for k in 0..k_total {
            beams.private[k] = &dir_p[k] * C64::new(pp[k].sqrt(), 0.0);
            beams.common[k] = &dir_c[k] * C64::new(pc[k].sqrt(), 0.0);
        }
    }
    let qos_scale = if scale >= 1.0 { 1.0 } else { achieved_qos_scale(&model, &beams, config).min(scale.max(0.0)) };
    Ok(repaired(&model, beams, qos_scale))
}

/// Smallest stream powers meeting SINR targets for fixed beam directions,
/// or `None` when the targets are out of reach.
fn power_control(
    gp: &[Vec<f64>],
    gc: &[Vec<f64>],
    tp: &[f64],
    tc: &[f64],
    s: &DecodingStructure,
    noise: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let k_total = tp.len();
    let mut pp = vec![0.0; k_total];
    let mut pc = vec![0.0; k_total];
    let mut cap = f64::INFINITY;
    for iter in 0..PC_MAX_ITERS {
        let mut np = vec![0.0; k_total];
        let mut nc = vec![0.0; k_total];
        for k in 0..k_total {
            if tp[k] > 0.0 {
                if gp[k][k] <= 0.0 {
                    return None;
                }
                let interf: f64 = (0..k_total).filter(|&m| m != k).map(|m| gp[k][m] * pp[m]).sum::<f64>()
                    + s.not_decoded_by_me[k].iter().map(|&l| gc[k][l] * pc[l]).sum::<f64>();
                np[k] = tp[k] * (interf + noise) / gp[k][k];
            }
            if tc[k] > 0.0 {
                let mut need = 0.0f64;
                for &i in &s.decoders[k] {
                    if gc[i][k] <= 0.0 {
                        return None;
                    }
                    let interf: f64 = (0..k_total).map(|m| gp[i][m] * pp[m]).sum::<f64>()
                        + s.not_decoded_by_me[i].iter().map(|&l| gc[i][l] * pc[l]).sum::<f64>()
                        + s.after(i, k).iter().map(|&m| gc[i][m] * pc[m]).sum::<f64>();
                    need = need.max(tc[k] * (interf + noise) / gc[i][k]);
                }
                nc[k] = need;
            }
        }
        let total: f64 = np.iter().chain(&nc).sum();
        if iter == 0 {
            // Noise-only powers; a feasible fixed point is never this far above them.
            cap = 1e8 * total;
        }
        if !(total <= cap) {
            return None;
        }
        let change = np
            .iter()
            .chain(&nc)
            .zip(pp.iter().chain(&pc))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        pp = np;
        pc = nc;
        if change <= 1e-13 * total || total == 0.0 {
            return Some((pp, pc));
        }
    }
    None
}

#[derive(Debug, Clone)]
struct Layout {
    n_users: usize,
    dim: usize,
    t_p: usize,
    t_c: usize,
    r_p: usize,
    r_c: usize,
    power: usize,
    qos_scale: Option<usize>,
}

impl Layout {
    fn private(&self, k: usize) -> usize {
        2 * self.dim * k
    }

    fn common(&self, k: usize) -> usize {
        2 * self.dim * (self.n_users + k)
    }
}

/// Affine real and imaginary parts of `g^H x` for the beam stored at `base`.
fn projection(g: &CVector, base: usize) -> [LinExpr; 2] {
    let (mut re, mut im) = (LinExpr::zero(), LinExpr::zero());
    for (j, z) in g.iter().enumerate() {
        let (xr, xi) = (base + 2 * j, base + 2 * j + 1);
        if z.re != 0.0 {
            re.add_term(xr, z.re);
            im.add_term(xi, z.re);
        }
        if z.im != 0.0 {
            re.add_term(xi, z.im);
            im.add_term(xr, -z.im);
        }
    }
    [re, im]
}

/// The convex subproblem around one expansion point.
///
/// Channels are divided by the noise amplitude and beams by `scale`, so the
/// program sees unit noise and unit-order power; rates are in bit/s/Hz.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConicProgram,
    pub active_private: Vec<bool>,
    pub active_common: Vec<bool>,
    layout: Layout,
    scale: f64,
    template: BeamformerSet,
}

impl Subproblem {
    /// Whether the program maximizes the QoS fraction instead of minimizing power.
    pub fn is_restoration(&self) -> bool {
        self.layout.qos_scale.is_some()
    }

    /// Factor converting the program's power variable to watts.
    pub fn power_scale(&self) -> f64 {
        self.scale * self.scale
    }

    /// Weighted power in watts at a program point.
    pub fn power(&self, x: &[f64]) -> f64 {
        x[self.layout.power] * self.power_scale()
    }

    /// The expansion point written as a program vector.
    pub fn embed_point(&self, point: &ExpansionPoint, config: &SystemConfig) -> Vec<f64> {
        let lay = &self.layout;
        let mut x = vec![0.0; self.program.n_vars];
        let mut power = 0.0;
        for k in 0..lay.n_users {
            for (w, base) in [(&point.beams.private[k], lay.private(k)), (&point.beams.common[k], lay.common(k))] {
                for (j, z) in w.iter().enumerate() {
                    x[base + 2 * j] = z.re / self.scale;
                    x[base + 2 * j + 1] = z.im / self.scale;
                }
                power += config.power_weights[k] * w.norm_squared() / self.power_scale();
            }
            if self.active_private[k] {
                x[lay.t_p + k] = point.t_private[k];
                x[lay.r_p + k] = (1.0 + point.t_private[k]).log2();
            }
            if self.active_common[k] {
                x[lay.t_c + k] = point.t_common[k];
                x[lay.r_c + k] = (1.0 + point.t_common[k]).log2();
            }
        }
        x[lay.power] = power;
        if let Some(q) = lay.qos_scale {
            x[q] = point.qos_scale;
        }
        x
    }

    /// Beamformers and SINR targets of a program point.
    pub fn extract(&self, x: &[f64]) -> (BeamformerSet, Vec<f64>, Vec<f64>) {
        let lay = &self.layout;
        let mut beams = self.template.clone();
        let read = |base: usize| CVector::from_fn(lay.dim, |j, _| C64::new(x[base + 2 * j], x[base + 2 * j + 1]) * self.scale);
        for k in 0..lay.n_users {
            beams.private[k] = read(lay.private(k));
            beams.common[k] = read(lay.common(k));
        }
        beams.apply_masks();
        let tp = (0..lay.n_users).map(|k| x[lay.t_p + k].max(0.0)).collect();
        let tc = (0..lay.n_users).map(|k| x[lay.t_c + k].max(0.0)).collect();
        (beams, tp, tc)
    }
}

/// Build the convex subproblem around `point`.
///
/// When `point.qos_scale < 1` the program instead maximizes the common QoS
/// fraction it can guarantee (with a tiny power regularizer).
pub fn build_subproblem(
    channels: &ChannelSet,
    v: &PhaseShift,
    structure: &DecodingStructure,
    point: &ExpansionPoint,
    config: &SystemConfig,
    streams: Streams,
) -> Result<Subproblem> {
    let model = LinkModel::new(channels, v, structure)?;
    check_dims(&model, config)?;
    Ok(build_with_model(&model, point, config, streams))
}

fn build_with_model(model: &LinkModel, point: &ExpansionPoint, config: &SystemConfig, streams: Streams) -> Subproblem {
    let s = model.structure;
    let k_total = model.heff.len();
    let dim = config.n_antennas();
    let l = config.antennas_per_bs;
    let beams = &point.beams;

    let p0: f64 = (0..k_total).map(|k| beams.private_power(k) + beams.common_power(k)).sum();
    let scale = if p0 > 0.0 {
        p0.sqrt()
    } else {
        let mean_gain = model.heff.iter().map(|h| h.norm_squared()).sum::<f64>() / (k_total as f64 * model.noise);
        if mean_gain > 0.0 {
            mean_gain.sqrt().recip()
        } else {
            1.0
        }
    };
    let g: Vec<CVector> = model.heff.iter().map(|h| h * C64::new(scale / model.noise.sqrt(), 0.0)).collect();
    let x0 = |w: &CVector| w * C64::new(scale.recip(), 0.0);

    let active_private: Vec<bool> =
        (0..k_total).map(|k| point.t_private[k] >= T_FLOOR && model.sinr_private(beams, k) >= T_FLOOR).collect();
    let active_common: Vec<bool> = (0..k_total)
        .map(|k| streams == Streams::RateSplitting && point.t_common[k] >= T_FLOOR && model.min_sinr_common(beams, k) >= T_FLOOR)
        .collect();

    let beam_vars = 4 * dim * k_total;
    let restoring = point.qos_scale < 1.0;
    let layout = Layout {
        n_users: k_total,
        dim,
        t_p: beam_vars,
        t_c: beam_vars + k_total,
        r_p: beam_vars + 2 * k_total,
        r_c: beam_vars + 3 * k_total,
        power: beam_vars + 4 * k_total,
        qos_scale: restoring.then_some(beam_vars + 4 * k_total + 1),
    };
    let n_vars = beam_vars + 4 * k_total + 1 + usize::from(restoring);
    let mut prog = ConicProgram::new(n_vars, Sense::Minimize);

    // Cluster masks, switched-off common streams and inactive streams.
    let mut zeros = Vec::new();
    for k in 0..k_total {
        for n in 0..config.n_bs {
            let block = |base: usize| (0..2 * l).map(move |j| LinExpr::var(base + 2 * n * l + j));
            if !beams.serves_private(n, k) {
                zeros.extend(block(layout.private(k)));
            }
            if streams == Streams::PrivateOnly || !beams.serves_common(n, k) {
                zeros.extend(block(layout.common(k)));
            }
        }
        if !active_private[k] {
            zeros.push(LinExpr::var(layout.t_p + k));
            zeros.push(LinExpr::var(layout.r_p + k));
        }
        if !active_common[k] {
            zeros.push(LinExpr::var(layout.t_c + k));
            zeros.push(LinExpr::var(layout.r_c + k));
        }
    }
    if !zeros.is_empty() {
        prog.add(Cone::Zero(zeros.len()), zeros);
    }

    // Weighted power epigraph.
    let mut u = Vec::with_capacity(beam_vars);
    for k in 0..k_total {
        let a = config.power_weights[k].sqrt();
        for base in [layout.private(k), layout.common(k)] {
            u.extend((0..2 * dim).map(|j| LinExpr::term(base + j, a)));
        }
    }
    prog.push(quadratic_epigraph(u, &LinExpr::var(layout.power)));

    let nonneg = (0..4 * k_total).map(|j| LinExpr::var(layout.t_p + j)).collect();
    prog.add(Cone::Nonnegative(4 * k_total), nonneg);

    // |g^H x|^2 / t >= interference + 1, linearized on the left.
    let approx = |prog: &mut ConicProgram, g: &CVector, own: usize, w0: &CVector, t_var: usize, t0: f64, interferers: Vec<usize>| {
        let c = inner(g, &x0(w0));
        let [re, im] = projection(g, own);
        let mut bound = LinExpr::constant(-1.0);
        bound.add_scaled(&re, 2.0 * c.re / t0).add_scaled(&im, 2.0 * c.im / t0).add_term(t_var, -c.norm_sqr() / (t0 * t0));
        let u = interferers.into_iter().flat_map(|base| projection(g, base)).collect();
        prog.push(quadratic_epigraph(u, &bound));
    };
    let with_common = streams == Streams::RateSplitting;
    for k in 0..k_total {
        if active_private[k] {
            prog.push(rate_log_constraint(layout.r_p + k, layout.t_p + k, 1.0));
            let mut interf: Vec<usize> = (0..k_total).filter(|&m| m != k).map(|m| layout.private(m)).collect();
            if with_common {
                interf.extend(s.not_decoded_by_me[k].iter().map(|&j| layout.common(j)));
            }
            approx(&mut prog, &g[k], layout.private(k), &beams.private[k], layout.t_p + k, point.t_private[k], interf);
        }
        if active_common[k] {
            prog.push(rate_log_constraint(layout.r_c + k, layout.t_c + k, 1.0));
            for &i in &s.decoders[k] {
                let mut interf: Vec<usize> = (0..k_total).map(|m| layout.private(m)).collect();
                interf.extend(s.not_decoded_by_me[i].iter().map(|&j| layout.common(j)));
                interf.extend(s.after(i, k).iter().map(|&j| layout.common(j)));
                approx(&mut prog, &g[i], layout.common(k), &beams.common[k], layout.t_c + k, point.t_common[k], interf);
            }
        }
    }

    // Per-user QoS in bit/s/Hz.
    let qos = (0..k_total)
        .map(|k| {
            let floor = config.qos_min_bps[k] / config.bandwidth_hz;
            let mut e = LinExpr::var(layout.r_p + k);
            e.add_term(layout.r_c + k, 1.0);
            match layout.qos_scale {
                Some(q) => e.add_term(q, -floor),
                None => e.add_constant(-floor),
            };
            e
        })
        .collect();
    prog.add(Cone::Nonnegative(k_total), qos);

    match layout.qos_scale {
        Some(q) => {
            let mut bounds = LinExpr::constant(1.0);
            bounds.add_term(q, -1.0);
            prog.add(Cone::Nonnegative(2), vec![LinExpr::var(q), bounds]);
            let mut obj = LinExpr::term(q, -1.0);
            obj.add_term(layout.power, RESTORE_POWER_WEIGHT);
            prog.set_objective(&obj);
        }
        None => prog.set_objective(&LinExpr::var(layout.power)),
    }

    Subproblem { program: prog, active_private, active_common, layout, scale, template: beams.clone() }
}

fn combine(a: &BeamformerSet, b: &BeamformerSet, step: f64) -> BeamformerSet {
    if step >= 1.0 {
        return b.clone();
    }
    let mut out = a.clone();
    let mix = |x: &mut CVector, y: &CVector| *x += (y - &*x) * C64::new(step, 0.0);
    for k in 0..a.n_users() {
        mix(&mut out.private[k], &b.private[k]);
        mix(&mut out.common[k], &b.common[k]);
    }
    out
}

fn relative_step(point: &ExpansionPoint, beams: &BeamformerSet, tp: &[f64], tc: &[f64]) -> f64 {
    let mut diff = 0.0;
    let mut base = 0.0;
    for k in 0..beams.n_users() {
        diff += (&beams.private[k] - &point.beams.private[k]).norm_squared() + (&beams.common[k] - &point.beams.common[k]).norm_squared();
        base += point.beams.private_power(k) + point.beams.common_power(k);
    }
    let power_rel = if base > 0.0 { (diff / base).sqrt() } else { diff.sqrt() };
    let t_rel = tp
        .iter()
        .zip(&point.t_private)
        .chain(tc.iter().zip(&point.t_common))
        .map(|(a, b)| (a - b).abs() / b.max(1.0))
        .fold(0.0, f64::max);
    power_rel.max(t_rel)
}

/// Run SCA from `start` until the relative power decrease drops below
/// `config.stop_epsilon` or `config.max_sca_iters` is reached.
///
/// Each accepted iterate is `L~ + step (L^ - L~)` with the SINR targets then
/// reset to the exact SINRs of the new beams, which keeps the next expansion
/// point feasible and tight. A failed solve keeps the best iterate so far and
/// sets `trace.degraded`.
pub fn sca_iterate(
    channels: &ChannelSet,
    v: &PhaseShift,
    structure: &DecodingStructure,
    config: &SystemConfig,
    streams: Streams,
    start: &ExpansionPoint,
) -> Result<ScaOutcome> {
    let model = LinkModel::new(channels, v, structure)?;
    check_dims(&model, config)?;
    let step = config.sca_step;
    let mut point = start.clone();
    let mut trace = ScaTrace::default();

    while point.qos_scaled() && trace.restoration_iters < config.max_sca_iters {
        trace.restoration_iters += 1;
        let sub = build_with_model(&model, &point, config, streams);
        let sol = match conic::solve(&sub.program, SOLVE_TOL) {
            Ok(s) if s.is_usable() => s,
            _ => {
                trace.degraded = true;
                break;
            }
        };
        let (hat, _, _) = sub.extract(&sol.x);
        let beams = combine(&point.beams, &hat, step);
        let scale = achieved_qos_scale(&model, &beams, config).min(1.0);
        if scale <= point.qos_scale + 1e-9 {
            break;
        }
        point = repaired(&model, beams, scale);
    }
    trace.qos_reached = !point.qos_scaled();
    let mut current = total_power(&point.beams, &config.power_weights);
    if !trace.qos_reached {
        log::debug!("SCA could not restore the QoS (reached {:.4})", point.qos_scale);
        let rates = point.rates(config.bandwidth_hz);
        return Ok(ScaOutcome { beams: point.beams.clone(), rates, point, trace });
    }

    trace.objective.push(current);
    for _ in 0..config.max_sca_iters {
        if current == 0.0 {
            trace.converged = true;
            break;
        }
        let sub = build_with_model(&model, &point, config, streams);
        let sol = match conic::solve(&sub.program, SOLVE_TOL) {
            Ok(s) if s.is_usable() => s,
            other => {
                log::debug!("SCA subproblem failed: {:?}", other.map(|s| s.status));
                trace.degraded = true;
                break;
            }
        };
        let (hat, tp, tc) = sub.extract(&sol.x);
        let beams = combine(&point.beams, &hat, step);
        let power = total_power(&beams, &config.power_weights);
        if !meets_qos(&model, &beams, config) || power > current * (1.0 + DESCENT_SLACK) {
            trace.degraded = true;
            break;
        }
        let change = relative_step(&point, &hat, &tp, &tc);
        point = repaired(&model, beams, 1.0);
        trace.objective.push(power);
        trace.iterations += 1;
        let decrease = (current - power) / current;
        current = power;
        if decrease < config.stop_epsilon || change < STATIONARY_TOL {
            trace.converged = true;
            break;
        }
    }
    let rates = point.rates(config.bandwidth_hz);
    Ok(ScaOutcome { beams: point.beams.clone(), rates, point, trace })
}

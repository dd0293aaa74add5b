//! Phase-shift design for fixed beamformers.
//!
//! With `v~ = [v; 1]` every received power is affine in the lifted matrix
//! `V = v~ v~^H`, so the SINR constraints become linear in `V`. Dropping the
//! rank-one requirement leaves an SDP; a rank penalty `trace(V) - ||V||_2`,
//! linearized at the incumbent, pushes the solution back towards rank one,
//! and Gaussian randomization extracts unit-modulus candidates.

use rand::Rng;

use crate::beamform::T_FLOOR;
use crate::config::SystemConfig;
use crate::conic::{self, embed_hermitian, Cone, ConicProgram, HermitianVars, LinExpr, Sense, SolveStatus};
use crate::error::{invalid, Result};
use crate::linalg::{complex_gaussian, hermitian_eigen, CMatrix, CVector, C64};
use crate::rs::{BeamformerSet, DecodingStructure, LinkModel, RateAllocation};
use crate::scenario::{ChannelSet, PhaseShift};

const SOLVE_TOL: f64 = 1e-8;
/// Relative SINR shortfall tolerated when screening candidates; about the
/// accuracy of the SDP solve. The following beamforming pass re-imposes the
/// exact QoS.
pub const SCREEN_TOL: f64 = 1e-6;
/// Eigenvalues below this fraction of the largest are treated as zero.
const EIG_CUTOFF: f64 = 1e-12;

/// Frobenius movement of `V`, per unit order, that ends the penalty
/// re-linearization.
const DCA_TOL: f64 = 1e-6;

/// Received-signal decomposition of every (user, stream) pair.
///
/// Index `[k][j]` describes user `k` receiving the stream of user `j`:
/// `b = h_k^H w_j`, `a = H_k^H w_j` and `M = [[a a^H, a b*], [b a^H, 0]]`,
/// so that `|h_eff^H w_j|^2 = |b|^2 + v~^H M v~`.
#[derive(Debug, Clone)]
pub struct LiftingData {
    pub b_private: Vec<Vec<C64>>,
    pub b_common: Vec<Vec<C64>>,
    pub a_private: Vec<Vec<CVector>>,
    pub a_common: Vec<Vec<CVector>>,
    pub m_private: Vec<Vec<CMatrix>>,
    pub m_common: Vec<Vec<CMatrix>>,
}

fn lift_matrix(a: &CVector, b: C64) -> CMatrix {
    let r = a.len();
    let mut m = CMatrix::zeros(r + 1, r + 1);
    m.view_mut((0, 0), (r, r)).copy_from(&(a * a.adjoint()));
    for i in 0..r {
        m[(i, r)] = a[i] * b.conj();
        m[(r, i)] = b * a[i].conj();
    }
    m
}

impl LiftingData {
    pub fn n_users(&self) -> usize {
        self.b_private.len()
    }

    /// Order of the lifted matrix, `R + 1`.
    pub fn order(&self) -> usize {
        self.m_private.first().and_then(|row| row.first()).map_or(1, |m| m.nrows())
    }

    /// `|b|^2 + Tr(M V)` for user `k` receiving stream `j`.
    pub fn received(&self, common: bool, k: usize, j: usize, v: &CMatrix) -> f64 {
        let (b, m) = if common { (self.b_common[k][j], &self.m_common[k][j]) } else { (self.b_private[k][j], &self.m_private[k][j]) };
        b.norm_sqr() + (m * v).trace().re
    }
}

pub fn build_lifting(channels: &ChannelSet, w: &BeamformerSet) -> Result<LiftingData> {
    let k_total = channels.n_users();
    if w.n_users() != k_total || w.private.iter().chain(&w.common).any(|x| x.len() != channels.n_antennas()) {
        return invalid("beamformer dimensions do not match the channels");
    }
    let mut out = LiftingData {
        b_private: Vec::with_capacity(k_total),
        b_common: Vec::with_capacity(k_total),
        a_private: Vec::with_capacity(k_total),
        a_common: Vec::with_capacity(k_total),
        m_private: Vec::with_capacity(k_total),
        m_common: Vec::with_capacity(k_total),
    };
    for k in 0..k_total {
        let h = &channels.direct[k];
        let hc = channels.cascade[k].adjoint();
        for (streams, bs, as_, ms) in [
            (&w.private, &mut out.b_private, &mut out.a_private, &mut out.m_private),
            (&w.common, &mut out.b_common, &mut out.a_common, &mut out.m_common),
        ] {
            let b: Vec<C64> = streams.iter().map(|x| h.dotc(x)).collect();
            let a: Vec<CVector> = streams.iter().map(|x| &hc * x).collect();
            ms.push(a.iter().zip(&b).map(|(a, &b)| lift_matrix(a, b)).collect());
            bs.push(b);
            as_.push(a);
        }
    }
    Ok(out)
}

/// Priority weights `eta_k^o = ||w_k^o||^2 / max_j max(||w_j^p||^2, ||w_j^c||^2)`.
pub fn eta_weights(w: &BeamformerSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let p: Vec<f64> = (0..w.n_users()).map(|k| w.private_power(k)).collect();
    let c: Vec<f64> = (0..w.n_users()).map(|k| w.common_power(k)).collect();
    let top = p.iter().chain(&c).copied().fold(0.0, f64::max);
    if !(top > 0.0) {
        return invalid("priority weights need at least one nonzero beamformer");
    }
    Ok((p.iter().map(|x| x / top).collect(), c.iter().map(|x| x / top).collect()))
}

/// `e1 e1^H` for the unit leading eigenvector of `v0`, phase-normalized so
/// its first non-negligible entry is real and positive.
pub fn spectral_subgradient(v0: &CMatrix) -> CMatrix {
    let (_, vecs) = hermitian_eigen(v0);
    let e = vecs.column(0).into_owned();
    &e * e.adjoint()
}

/// `trace(V) - ||V||_2`; zero exactly when the PSD matrix `V` has rank one.
pub fn rank_gap(v: &CMatrix) -> f64 {
    let (vals, _) = hermitian_eigen(v);
    vals.iter().sum::<f64>() - vals.first().copied().unwrap_or(0.0)
}

/// Lifted program with its variable layout.
#[derive(Debug, Clone)]
pub struct LiftedProgram {
    pub program: ConicProgram,
    pub vars: HermitianVars,
    zeta_p: usize,
    zeta_c: usize,
    n_users: usize,
}

#[derive(Debug, Clone)]
pub struct LiftedSolution {
    pub v: CMatrix,
    pub zeta_private: Vec<f64>,
    pub zeta_common: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
}

impl LiftedProgram {
    /// Program vector for a given `V` and residuals.
    pub fn point(&self, v: &CMatrix, zeta_p: &[f64], zeta_c: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.program.n_vars];
        self.vars.write(v, &mut x);
        x[self.zeta_p..self.zeta_p + self.n_users].copy_from_slice(zeta_p);
        x[self.zeta_c..self.zeta_c + self.n_users].copy_from_slice(zeta_c);
        x
    }

    pub fn solve(&self) -> Result<LiftedSolution> {
        let sol = conic::solve(&self.program, SOLVE_TOL)?;
        let k = self.n_users;
        Ok(LiftedSolution {
            v: self.vars.value(&sol.x),
            zeta_private: sol.x[self.zeta_p..self.zeta_p + k].to_vec(),
            zeta_common: sol.x[self.zeta_c..self.zeta_c + k].to_vec(),
            objective: sol.objective,
            status: sol.status,
        })
    }
}

/// The penalized SDP.
///
/// Maximizes `rho * sum(eta zeta) - (1 - rho) * (trace V - <e1 e1^H, V>)`
/// subject to every active SINR constraint holding with residual `zeta`,
/// `diag(V) = 1` and `V` PSD. Streams whose target sits at the floor carry no
/// rate; their rows are dropped and their residual is pinned to zero.
/// Powers are divided by `noise`, so residuals are in units of the noise.
#[allow(clippy::too_many_arguments)]
pub fn build_sdp(
    lifting: &LiftingData,
    targets: &RateAllocation,
    structure: &DecodingStructure,
    eta: &(Vec<f64>, Vec<f64>),
    v0: &CMatrix,
    rho: f64,
    noise: f64,
) -> Result<LiftedProgram> {
    let k_total = lifting.n_users();
    let n = lifting.order();
    if !(rho > 0.0 && rho <= 1.0) || !(noise > 0.0) {
        return invalid("trade-off must lie in (0, 1] and noise must be positive");
    }
    if v0.nrows() != n || v0.ncols() != n || targets.t_private.len() != k_total || structure.n_users() != k_total {
        return invalid("lifted program dimensions are inconsistent");
    }
    let vars = embed_hermitian(n).vars(0);
    let zeta_p = vars.n_scalars();
    let zeta_c = zeta_p + k_total;
    let mut prog = ConicProgram::new(zeta_c + k_total, Sense::Maximize);

    let received = |common: bool, k: usize, j: usize| -> LinExpr {
        let (b, m) = if common { (lifting.b_common[k][j], &lifting.m_common[k][j]) } else { (lifting.b_private[k][j], &lifting.m_private[k][j]) };
        let mut e = vars.trace_product(m).scaled(1.0 / noise);
        e.add_constant(b.norm_sqr() / noise);
        e
    };

    let mut rows = Vec::new();
    let mut pinned = Vec::new();
    for k in 0..k_total {
        let tp = targets.t_private[k];
        if tp > T_FLOOR {
            let mut interf = LinExpr::constant(1.0);
            for j in (0..k_total).filter(|&j| j != k) {
                interf.add_scaled(&received(false, k, j), 1.0);
            }
            for &l in &structure.not_decoded_by_me[k] {
                interf.add_scaled(&received(true, k, l), 1.0);
            }
            let mut row = received(false, k, k);
            row.add_scaled(&interf, -tp).add_term(zeta_p + k, -1.0);
            rows.push(row);
        } else {
            pinned.push(LinExpr::var(zeta_p + k));
        }
        let tc = targets.t_common[k];
        if tc > T_FLOOR {
            for &i in &structure.decoders[k] {
                let mut interf = LinExpr::constant(1.0);
                for j in 0..k_total {
                    interf.add_scaled(&received(false, i, j), 1.0);
                }
                for &l in structure.not_decoded_by_me[i].iter().chain(structure.after(i, k)) {
                    interf.add_scaled(&received(true, i, l), 1.0);
                }
                let mut row = received(true, i, k);
                row.add_scaled(&interf, -tc).add_term(zeta_c + k, -1.0);
                rows.push(row);
            }
        } else {
            pinned.push(LinExpr::var(zeta_c + k));
        }
    }
    rows.extend((0..2 * k_total).map(|j| LinExpr::var(zeta_p + j)));
    prog.add(Cone::Nonnegative(rows.len()), rows);
    if !pinned.is_empty() {
        prog.add(Cone::Zero(pinned.len()), pinned);
    }
    prog.push(vars.unit_diagonal());
    prog.push(vars.psd());

    // trace(V) = n under the unit diagonal.
    let mut obj = vars.trace_product(&spectral_subgradient(v0)).scaled(1.0 - rho);
    obj.add_constant(-(1.0 - rho) * n as f64);
    for k in 0..k_total {
        obj.add_term(zeta_p + k, rho * eta.0[k]).add_term(zeta_c + k, rho * eta.1[k]);
    }
    prog.set_objective(&obj);
    Ok(LiftedProgram { program: prog, vars, zeta_p, zeta_c, n_users: k_total })
}

/// `v~ v~^H` for `v~ = [v; 1]`.
pub fn lift_phase(v: &PhaseShift) -> CMatrix {
    let r = v.len();
    let vt = CVector::from_fn(r + 1, |i, _| if i < r { v.as_vector()[i] } else { C64::new(1.0, 0.0) });
    &vt * vt.adjoint()
}

/// `count` unit-modulus candidates drawn as `U S^(1/2) z` with complex
/// Gaussian `z`, normalized by the last entry and projected onto the circle.
pub fn gaussian_randomize<R: Rng + ?Sized>(v: &CMatrix, count: usize, rng: &mut R) -> Vec<PhaseShift> {
    let n = v.nrows();
    let (vals, vecs) = hermitian_eigen(v);
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let root: Vec<f64> = vals.iter().map(|&x| if x > EIG_CUTOFF * top { x.sqrt() } else { 0.0 }).collect();
    let factor = CMatrix::from_fn(n, n, |i, j| vecs[(i, j)] * root[j]);
    (0..count)
        .map(|_| {
            let z = CVector::from_fn(n, |_, _| complex_gaussian(rng));
            let vh = &factor * z;
            let last = vh[n - 1];
            let angles: Vec<f64> = (0..n - 1).map(|r| (vh[r] * last.conj()).arg()).collect();
            PhaseShift::from_angles(&angles)
        })
        .collect()
}

/// Unit-modulus projection of the leading eigenvector of `v`, the
/// randomization candidate obtained for `z = e_1`.
pub fn leading_candidate(v: &CMatrix) -> PhaseShift {
    let n = v.nrows();
    let (_, vecs) = hermitian_eigen(v);
    let last = vecs[(n - 1, 0)];
    let angles: Vec<f64> = (0..n - 1).map(|r| (vecs[(r, 0)] * last.conj()).arg()).collect();
    PhaseShift::from_angles(&angles)
}

/// Candidate meeting every active SINR target with the highest sum-rate;
/// the first one wins ties. `None` when no candidate is feasible.
pub fn select_phase_shift(
    candidates: &[PhaseShift],
    w: &BeamformerSet,
    targets: &RateAllocation,
    channels: &ChannelSet,
    structure: &DecodingStructure,
    config: &SystemConfig,
) -> Result<Option<(PhaseShift, f64)>> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, cand) in candidates.iter().enumerate() {
        let model = LinkModel::new(channels, cand, structure)?;
        if !meets_active_targets(&model, w, targets) {
            continue;
        }
        let rate = model.sum_rate(w, config.bandwidth_hz);
        if best.is_none_or(|(_, r)| rate > r) {
            best = Some((idx, rate));
        }
    }
    Ok(best.map(|(idx, r)| (candidates[idx].clone(), r)))
}

fn meets_active_targets(model: &LinkModel, w: &BeamformerSet, t: &RateAllocation) -> bool {
    (0..w.n_users()).all(|k| {
        let p = t.t_private[k] <= T_FLOOR || model.sinr_private(w, k) >= t.t_private[k] * (1.0 - SCREEN_TOL);
        let c = t.t_common[k] <= T_FLOOR || model.min_sinr_common(w, k) >= t.t_common[k] * (1.0 - SCREEN_TOL);
        p && c
    })
}

#[derive(Debug, Clone)]
pub struct PhaseStep {
    /// Chosen phase shift, `None` when the SDP was infeasible or no
    /// candidate passed screening.
    pub selected: Option<PhaseShift>,
    pub sdp_status: SolveStatus,
    pub feasible_candidates: usize,
}

/// One phase update around the incumbent `v`: lift, solve the penalized SDP
/// (re-linearizing the penalty until `V` settles, at most
/// `config.sdp_repetitions` times), then select
/// among the leading-eigenvector candidate and `config.n_randomizations`
/// Gaussian candidates.
pub fn phase_step<R: Rng + ?Sized>(
    channels: &ChannelSet,
    v: &PhaseShift,
    w: &BeamformerSet,
    targets: &RateAllocation,
    structure: &DecodingStructure,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<PhaseStep> {
    let lifting = build_lifting(channels, w)?;
    let eta = match eta_weights(w) {
        Ok(e) => e,
        Err(_) => return Ok(PhaseStep { selected: None, sdp_status: SolveStatus::Failed, feasible_candidates: 0 }),
    };
    let mut v0 = lift_phase(v);
    let mut status = SolveStatus::Failed;
    for _ in 0..config.sdp_repetitions.max(1) {
        let prog = build_sdp(&lifting, targets, structure, &eta, &v0, config.penalty_tradeoff, channels.noise_power_w)?;
        let sol = prog.solve()?;
        status = sol.status;
        if !matches!(status, SolveStatus::Optimal | SolveStatus::Inaccurate) {
            break;
        }
        // A single linearization anchors the penalty at the incumbent and
        // acts as a proximal pull toward it; iterate until V settles.
        let moved = (&sol.v - &v0).norm();
        v0 = sol.v;
        if moved <= DCA_TOL * v0.nrows() as f64 {
            break;
        }
    }
    if !matches!(status, SolveStatus::Optimal | SolveStatus::Inaccurate) {
        return Ok(PhaseStep { selected: None, sdp_status: status, feasible_candidates: 0 });
    }
    let mut candidates = vec![leading_candidate(&v0)];
    candidates.extend(gaussian_randomize(&v0, config.n_randomizations, rng));
    let feasible = candidates
        .iter()
        .filter(|c| LinkModel::new(channels, c, structure).map(|m| meets_active_targets(&m, w, targets)).unwrap_or(false))
        .count();
    let selected = select_phase_shift(&candidates, w, targets, channels, structure, config)?.map(|(v, _)| v);
    Ok(PhaseStep { selected, sdp_status: status, feasible_candidates: feasible })
}

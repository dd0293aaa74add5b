//! Rate-splitting bookkeeping: who decodes which common message, the SINR of
//! every stream, achievable rates and the weighted power objective.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{invalid, Result};
use crate::linalg::{gain, CVector};
use crate::scenario::{ChannelSet, PhaseShift};

/// Common-message decoding sets of every user.
///
/// `order[k]` lists `Phi_k` in decoding sequence: the first entry is decoded
/// first. The users decoded by `i` after `k` (the set `Omega_{i,k}`) are the
/// entries following `k` in `order[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingStructure {
    /// `M_k`: users that decode the common message of `k`, ascending.
    pub decoders: Vec<Vec<usize>>,
    /// `Phi_k`: users whose common message `k` decodes, ascending.
    pub decoded_by_me: Vec<Vec<usize>>,
    /// `Psi_k = K \ Phi_k`, ascending.
    pub not_decoded_by_me: Vec<Vec<usize>>,
    /// `pi_k`: `Phi_k` in decoding order.
    pub order: Vec<Vec<usize>>,
}

impl DecodingStructure {
    /// Build every derived set from per-user decoding sequences.
    pub fn from_orders(order: Vec<Vec<usize>>) -> Result<Self> {
        let k_total = order.len();
        let mut decoders = vec![Vec::new(); k_total];
        let mut decoded_by_me = Vec::with_capacity(k_total);
        let mut not_decoded_by_me = Vec::with_capacity(k_total);
        for (k, seq) in order.iter().enumerate() {
            let mut phi = seq.clone();
            phi.sort_unstable();
            if phi.windows(2).any(|w| w[0] == w[1]) || phi.iter().any(|&j| j >= k_total) {
                return invalid(format!("decoding order of user {k} is not a set of valid users"));
            }
            for &j in &phi {
                decoders[j].push(k);
            }
            not_decoded_by_me.push((0..k_total).filter(|j| phi.binary_search(j).is_err()).collect());
            decoded_by_me.push(phi);
        }
        decoders.iter_mut().for_each(|m| m.sort_unstable());
        let s = Self { decoders, decoded_by_me, not_decoded_by_me, order };
        s.validate(k_total)?;
        Ok(s)
    }

    /// Each user decodes only its own common message.
    pub fn self_only(k_total: usize) -> Self {
        Self::from_orders((0..k_total).map(|k| vec![k]).collect()).expect("self-only structure is valid")
    }

    pub fn n_users(&self) -> usize {
        self.order.len()
    }

    /// `Omega_{i,k}`: users whose common message `i` decodes after that of `k`.
    /// Empty when `k` is not in `Phi_i`.
    pub fn after(&self, i: usize, k: usize) -> &[usize] {
        let seq = &self.order[i];
        match seq.iter().position(|&j| j == k) {
            Some(p) => &seq[p + 1..],
            None => &[],
        }
    }

    pub fn max_group(&self) -> usize {
        self.decoded_by_me.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn validate(&self, k_total: usize) -> Result<()> {
        if self.order.len() != k_total || self.decoders.len() != k_total {
            return invalid("decoding structure size mismatch");
        }
        for k in 0..k_total {
            if !self.decoders[k].contains(&k) {
                return invalid(format!("user {k} does not decode its own common message"));
            }
            let phi: Vec<usize> = (0..k_total).filter(|&j| self.decoders[j].contains(&k)).collect();
            if phi != self.decoded_by_me[k] {
                return invalid(format!("Phi_{k} inconsistent with M"));
            }
            let mut seq = self.order[k].clone();
            seq.sort_unstable();
            if seq != phi {
                return invalid(format!("order of user {k} is not a bijection onto Phi_{k}"));
            }
            let psi: Vec<usize> = (0..k_total).filter(|j| !phi.contains(j)).collect();
            if psi != self.not_decoded_by_me[k] {
                return invalid(format!("Psi_{k} is not the complement of Phi_{k}"));
            }
        }
        Ok(())
    }
}

/// Decoding groups from effective-channel strength.
///
/// User `k` decodes its own common message plus those of the `D-1` other users
/// with the largest `||h_j^eff||`; messages are decoded strongest first. Ties
/// break toward the lower user index.
pub fn build_decoding_structure(channels: &ChannelSet, v: &PhaseShift, group_max: usize) -> Result<DecodingStructure> {
    if group_max == 0 {
        return invalid("decode group size must be at least 1");
    }
    let heff = channels.effective_channels(v)?;
    let norms: Vec<f64> = heff.iter().map(|h| h.norm()).collect();
    let k_total = heff.len();
    let stronger = |a: &usize, b: &usize| norms[*b].partial_cmp(&norms[*a]).unwrap_or(Ordering::Equal).then(a.cmp(b));
    let orders = (0..k_total)
        .map(|k| {
            let mut others: Vec<usize> = (0..k_total).filter(|&j| j != k).collect();
            others.sort_by(stronger);
            let mut phi: Vec<usize> = others.into_iter().take(group_max - 1).collect();
            phi.push(k);
            phi.sort_by(stronger);
            phi
        })
        .collect();
    DecodingStructure::from_orders(orders)
}

/// Aggregate private and common beamformers with per-BS cluster masks.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub private: Vec<CVector>,
    pub common: Vec<CVector>,
    pub n_bs: usize,
    pub antennas_per_bs: usize,
    /// `K_n^p`: users whose private stream BS `n` carries.
    pub cluster_private: Vec<Vec<usize>>,
    /// `K_n^c`: users whose common stream BS `n` carries.
    pub cluster_common: Vec<Vec<usize>>,
}

impl BeamformerSet {
    /// All-zero beamformers with every BS serving every user.
    pub fn zeros(n_bs: usize, antennas_per_bs: usize, n_users: usize) -> Self {
        let full: Vec<Vec<usize>> = vec![(0..n_users).collect(); n_bs];
        Self {
            private: vec![CVector::zeros(n_bs * antennas_per_bs); n_users],
            common: vec![CVector::zeros(n_bs * antennas_per_bs); n_users],
            n_bs,
            antennas_per_bs,
            cluster_private: full.clone(),
            cluster_common: full,
        }
    }

    pub fn for_config(config: &SystemConfig) -> Self {
        Self::zeros(config.n_bs, config.antennas_per_bs, config.n_users)
    }

    pub fn n_users(&self) -> usize {
        self.private.len()
    }

    pub fn serves_private(&self, n: usize, k: usize) -> bool {
        self.cluster_private[n].contains(&k)
    }

    pub fn serves_common(&self, n: usize, k: usize) -> bool {
        self.cluster_common[n].contains(&k)
    }

    /// Zero every block a BS does not transmit.
    pub fn apply_masks(&mut self) {
        let l = self.antennas_per_bs;
        for n in 0..self.n_bs {
            for k in 0..self.n_users() {
                if !self.serves_private(n, k) {
                    self.private[k].rows_mut(n * l, l).fill(Default::default());
                }
                if !self.serves_common(n, k) {
                    self.common[k].rows_mut(n * l, l).fill(Default::default());
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.antennas_per_bs;
        let len = self.n_bs * l;
        if self.common.len() != self.private.len() || self.cluster_private.len() != self.n_bs || self.cluster_common.len() != self.n_bs {
            return invalid("beamformer set shape mismatch");
        }
        for k in 0..self.n_users() {
            for (w, serves) in [(&self.private[k], &self.cluster_private), (&self.common[k], &self.cluster_common)] {
                if w.len() != len {
                    return invalid(format!("beamformer of user {k} has length {}", w.len()));
                }
                if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return invalid(format!("beamformer of user {k} is not finite"));
                }
                for n in 0..self.n_bs {
                    if !serves[n].contains(&k) && w.rows(n * l, l).iter().any(|z| z.norm_sqr() != 0.0) {
                        return invalid(format!("BS {n} outside the cluster of user {k} has a nonzero block"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn private_power(&self, k: usize) -> f64 {
        self.private[k].norm_squared()
    }

    pub fn common_power(&self, k: usize) -> f64 {
        self.common[k].norm_squared()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.private.iter_mut().chain(out.common.iter_mut()).for_each(|w| *w *= num_complex::Complex64::new(c, 0.0));
        out
    }
}

/// Per-user rates (bit/s) and SINR targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAllocation {
    pub rate_private: Vec<f64>,
    pub rate_common: Vec<f64>,
    pub t_private: Vec<f64>,
    pub t_common: Vec<f64>,
}

impl RateAllocation {
    pub fn zeros(k: usize) -> Self {
        Self { rate_private: vec![0.0; k], rate_common: vec![0.0; k], t_private: vec![0.0; k], t_common: vec![0.0; k] }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.rate_private.iter().chain(&self.rate_common).chain(&self.t_private).chain(&self.t_common);
        if all.into_iter().any(|&x| !(x >= 0.0)) {
            return invalid("rates and SINR targets must be non-negative");
        }
        Ok(())
    }
}

/// SINR evaluator over precomputed effective channels.
///
/// All SINR formulas in the crate go through this type so that the SCA, the
/// phase step and the feasibility checks agree exactly.
#[derive(Debug, Clone)]
pub struct LinkModel<'a> {
    pub heff: Vec<CVector>,
    pub noise: f64,
    pub structure: &'a DecodingStructure,
}

impl<'a> LinkModel<'a> {
    pub fn new(channels: &ChannelSet, v: &PhaseShift, structure: &'a DecodingStructure) -> Result<Self> {
        if structure.n_users() != channels.n_users() {
            return invalid("decoding structure and channels disagree on the number of users");
        }
        Ok(Self { heff: channels.effective_channels(v)?, noise: channels.noise_power_w, structure })
    }

    /// `T_i`: all private streams at user `i` plus noise.
    pub fn private_total(&self, w: &BeamformerSet, i: usize) -> f64 {
        w.private.iter().map(|wp| gain(&self.heff[i], wp)).sum::<f64>() + self.noise
    }

    pub fn sinr_private(&self, w: &BeamformerSet, k: usize) -> f64 {
        let h = &self.heff[k];
        let signal = gain(h, &w.private[k]);
        let private_interf: f64 = (0..w.n_users()).filter(|&m| m != k).map(|m| gain(h, &w.private[m])).sum();
        let common_interf: f64 = self.structure.not_decoded_by_me[k].iter().map(|&l| gain(h, &w.common[l])).sum();
        signal / (private_interf + common_interf + self.noise)
    }

    /// SINR of user `i` decoding the common message of `k`.
    pub fn sinr_common(&self, w: &BeamformerSet, i: usize, k: usize) -> Result<f64> {
        if !self.structure.decoders[k].contains(&i) {
            return invalid(format!("user {i} does not decode the common message of user {k}"));
        }
        Ok(self.sinr_common_unchecked(w, i, k))
    }

    fn sinr_common_unchecked(&self, w: &BeamformerSet, i: usize, k: usize) -> f64 {
        let h = &self.heff[i];
        let signal = gain(h, &w.common[k]);
        let psi: f64 = self.structure.not_decoded_by_me[i].iter().map(|&l| gain(h, &w.common[l])).sum();
        let omega: f64 = self.structure.after(i, k).iter().map(|&m| gain(h, &w.common[m])).sum();
        signal / (self.private_total(w, i) + psi + omega)
    }

    /// Smallest common-message SINR of `k` over its decoders.
    pub fn min_sinr_common(&self, w: &BeamformerSet, k: usize) -> f64 {
        self.structure.decoders[k].iter().map(|&i| self.sinr_common_unchecked(w, i, k)).fold(f64::INFINITY, f64::min)
    }

    pub fn achieved_rate(&self, w: &BeamformerSet, k: usize, bandwidth: f64) -> f64 {
        bandwidth * ((1.0 + self.sinr_private(w, k)).log2() + (1.0 + self.min_sinr_common(w, k)).log2())
    }

    pub fn sum_rate(&self, w: &BeamformerSet, bandwidth: f64) -> f64 {
        (0..w.n_users()).map(|k| self.achieved_rate(w, k, bandwidth)).sum()
    }

    /// Whether `w` meets the per-stream SINR targets, with relative slack `tol`.
    pub fn meets_targets(&self, w: &BeamformerSet, t_private: &[f64], t_common: &[f64], tol: f64) -> bool {
        (0..w.n_users()).all(|k| {
            let ok_p = self.sinr_private(w, k) >= t_private[k] * (1.0 - tol);
            let ok_c = t_common[k] <= 0.0 || self.min_sinr_common(w, k) >= t_common[k] * (1.0 - tol);
            ok_p && ok_c
        })
    }
}

pub fn sinr_private(w: &BeamformerSet, v: &PhaseShift, channels: &ChannelSet, structure: &DecodingStructure, k: usize) -> Result<f64> {
    Ok(LinkModel::new(channels, v, structure)?.sinr_private(w, k))
}

pub fn sinr_common(w: &BeamformerSet, v: &PhaseShift, channels: &ChannelSet, structure: &DecodingStructure, i: usize, k: usize) -> Result<f64> {
    LinkModel::new(channels, v, structure)?.sinr_common(w, i, k)
}

/// Weighted total transmit power `sum_k alpha_k (||w_k^p||^2 + ||w_k^c||^2)`.
pub fn total_power(w: &BeamformerSet, weights: &[f64]) -> f64 {
    (0..w.n_users()).map(|k| weights[k] * (w.private_power(k) + w.common_power(k))).sum()
}

pub fn achieved_rate(w: &BeamformerSet, v: &PhaseShift, channels: &ChannelSet, structure: &DecodingStructure, k: usize, bandwidth: f64) -> Result<f64> {
    Ok(LinkModel::new(channels, v, structure)?.achieved_rate(w, k, bandwidth))
}

pub fn sum_rate(w: &BeamformerSet, v: &PhaseShift, channels: &ChannelSet, structure: &DecodingStructure, bandwidth: f64) -> Result<f64> {
    Ok(LinkModel::new(channels, v, structure)?.sum_rate(w, bandwidth))
}

/// Allowed QoS shortfall for a rate floor `r_min`.
pub fn rate_tolerance(r_min: f64) -> f64 {
    1e-6 * r_min + 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserQos {
    pub rate_bps: f64,
    /// `rate_bps - qos_min`; negative means a shortfall.
    pub slack_bps: f64,
    pub passes: bool,
    /// `gamma_k^p >= t_k^p` (only meaningful when targets were supplied).
    pub private_target_met: bool,
    /// `gamma_{i,k}^c >= t_k^c` for every decoder `i`.
    pub common_target_met: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QosReport {
    pub users: Vec<UserQos>,
}

impl QosReport {
    pub fn all_pass(&self) -> bool {
        self.users.iter().all(|u| u.passes)
    }

    pub fn all_targets_met(&self) -> bool {
        self.users.iter().all(|u| u.private_target_met && u.common_target_met)
    }
}

/// Per-user QoS verdicts, plus SINR-versus-target screening when `targets`
/// is given. Without targets the screening fields are `true`.
pub fn check_qos(
    w: &BeamformerSet,
    v: &PhaseShift,
    channels: &ChannelSet,
    structure: &DecodingStructure,
    config: &SystemConfig,
    targets: Option<&RateAllocation>,
) -> Result<QosReport> {
    let model = LinkModel::new(channels, v, structure)?;
    let users = (0..channels.n_users())
        .map(|k| {
            let rate = model.achieved_rate(w, k, config.bandwidth_hz);
            let r_min = config.qos_min_bps[k];
            let (p_ok, c_ok) = match targets {
                None => (true, true),
                Some(t) => (
                    model.sinr_private(w, k) >= t.t_private[k],
                    structure.decoders[k].iter().all(|&i| model.sinr_common_unchecked(w, i, k) >= t.t_common[k]),
                ),
            };
            UserQos { rate_bps: rate, slack_bps: rate - r_min, passes: rate >= r_min - rate_tolerance(r_min), private_target_met: p_ok, common_target_met: c_ok }
        })
        .collect();
    Ok(QosReport { users })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian, CMatrix, C64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_channels(rng: &mut ChaCha8Rng, k: usize, m: usize, r: usize, noise: f64) -> ChannelSet {
        let direct = (0..k).map(|_| CVector::from_fn(m, |_, _| complex_gaussian(rng))).collect();
        let bi = CMatrix::from_fn(m, r, |_, _| complex_gaussian(rng) * 0.5);
        let iu = (0..k).map(|_| CVector::from_fn(r, |_, _| complex_gaussian(rng))).collect();
        ChannelSet::new(direct, bi, iu, noise).unwrap()
    }

    fn random_beams(rng: &mut ChaCha8Rng, k: usize, m: usize) -> BeamformerSet {
        let mut w = BeamformerSet::zeros(1, m, k);
        for x in w.private.iter_mut().chain(w.common.iter_mut()) {
            *x = CVector::from_fn(m, |_, _| complex_gaussian(rng));
        }
        w
    }

    fn cv(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(a, b)| C64::new(a, b)))
    }

    #[test]
    fn self_only_structure() {
        let s = DecodingStructure::self_only(3);
        for k in 0..3 {
            assert_eq!(s.decoded_by_me[k], vec![k]);
            assert_eq!(s.decoders[k], vec![k]);
            assert_eq!(s.not_decoded_by_me[k], (0..3).filter(|&j| j != k).collect::<Vec<_>>());
            assert!(s.after(k, k).is_empty());
        }
    }

    #[test]
    fn group_of_one_is_self_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = random_channels(&mut rng, 4, 3, 2, 1.0);
        let s = build_decoding_structure(&ch, &PhaseShift::ones(2), 1).unwrap();
        assert_eq!(s, DecodingStructure::self_only(4));
    }

    #[test]
    fn two_user_strongest_first() {
        let direct = vec![cv(&[(3.0, 0.0)]), cv(&[(1.0, 0.0)])];
        let ch = ChannelSet::new(direct, CMatrix::zeros(1, 1), vec![cv(&[(0.0, 0.0)]); 2], 1.0).unwrap();
        let s = build_decoding_structure(&ch, &PhaseShift::ones(1), 2).unwrap();
        assert_eq!(s.decoded_by_me[0], vec![0, 1]);
        assert_eq!(s.decoded_by_me[1], vec![0, 1]);
        // User 2 (index 1) decodes user 1's common message first.
        assert_eq!(s.order[1], vec![0, 1]);
        assert_eq!(s.after(1, 0), &[1]);
        assert!(s.after(1, 1).is_empty());
    }

    #[test]
    fn structure_invariant_under_channel_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = random_channels(&mut rng, 5, 4, 3, 1.0);
        let v = PhaseShift::from_angles(&[0.1, 1.0, -2.0]);
        let scale = |c: &ChannelSet, s: f64| {
            let f = C64::new(s, 0.0);
            ChannelSet::new(c.direct.iter().map(|h| h * f).collect(), &c.bs_to_irs * f, c.irs_to_user.clone(), 1.0).unwrap()
        };
        for d in 1..=4 {
            let a = build_decoding_structure(&ch, &v, d).unwrap();
            let b = build_decoding_structure(&scale(&ch, 7.5), &v, d).unwrap();
            assert_eq!(a, b);
            a.validate(5).unwrap();
            assert!(a.max_group() <= d);
        }
    }

    #[test]
    fn single_user_private_sinr() {
        let ch = ChannelSet::new(vec![cv(&[(1.0, 0.0), (0.0, 0.0)])], CMatrix::zeros(2, 1), vec![cv(&[(0.0, 0.0)])], 1.0).unwrap();
        let mut w = BeamformerSet::zeros(1, 2, 1);
        w.private[0] = cv(&[(2.0, 0.0), (0.0, 0.0)]);
        let s = DecodingStructure::self_only(1);
        assert_eq!(sinr_private(&w, &PhaseShift::ones(1), &ch, &s, 0).unwrap(), 4.0);
        w.private[0].fill(C64::new(0.0, 0.0));
        assert_eq!(sinr_private(&w, &PhaseShift::ones(1), &ch, &s, 0).unwrap(), 0.0);
    }

    /// Brute-force SINRs straight from the definitions, looping over every
    /// stream with explicit membership tests.
    fn brute_private(h: &[CVector], w: &BeamformerSet, s: &DecodingStructure, noise: f64, k: usize) -> f64 {
        let k_total = h.len();
        let mut num = 0.0;
        let mut den = noise;
        for m in 0..k_total {
            let g = (h[k].adjoint() * &w.private[m])[(0, 0)].norm_sqr();
            if m == k {
                num = g;
            } else {
                den += g;
            }
            let decoded = s.decoders[m].contains(&k);
            if !decoded {
                den += (h[k].adjoint() * &w.common[m])[(0, 0)].norm_sqr();
            }
        }
        num / den
    }

    fn brute_common(h: &[CVector], w: &BeamformerSet, s: &DecodingStructure, noise: f64, i: usize, k: usize) -> f64 {
        let k_total = h.len();
        let g = |wv: &CVector| (h[i].adjoint() * wv)[(0, 0)].norm_sqr();
        let mut den = noise;
        for j in 0..k_total {
            den += g(&w.private[j]);
        }
        let pos_k = s.order[i].iter().position(|&x| x == k).unwrap();
        for l in 0..k_total {
            let decoded_by_i = s.decoders[l].contains(&i);
            if !decoded_by_i {
                den += g(&w.common[l]);
            } else {
                let pos_l = s.order[i].iter().position(|&x| x == l).unwrap();
                if pos_l > pos_k {
                    den += g(&w.common[l]);
                }
            }
        }
        g(&w.common[k]) / den
    }

    #[test]
    fn sinrs_match_brute_force_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ch = random_channels(&mut rng, 3, 4, 2, 0.3);
        let v = PhaseShift::from_angles(&[0.5, 2.0]);
        let s = build_decoding_structure(&ch, &v, 2).unwrap();
        let w = random_beams(&mut rng, 3, 4);
        let heff = ch.effective_channels(&v).unwrap();
        for k in 0..3 {
            let got = sinr_private(&w, &v, &ch, &s, k).unwrap();
            let want = brute_private(&heff, &w, &s, 0.3, k);
            assert!((got - want).abs() <= 1e-12 * want.max(1.0));
            for &i in &s.decoders[k] {
                let got = sinr_common(&w, &v, &ch, &s, i, k).unwrap();
                let want = brute_common(&heff, &w, &s, 0.3, i, k);
                assert!((got - want).abs() <= 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn common_sinr_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = random_channels(&mut rng, 2, 3, 1, 0.5);
        let v = PhaseShift::ones(1);
        let s = DecodingStructure::from_orders(vec![vec![0, 1], vec![0, 1]]).unwrap();
        let mut w = random_beams(&mut rng, 2, 3);
        // Only user 1's common message is on the air; decoded first so no Omega.
        w.private.iter_mut().for_each(|x| x.fill(C64::new(0.0, 0.0)));
        w.common[1].fill(C64::new(0.0, 0.0));
        let h = ch.effective_channel(1, &v).unwrap();
        let got = sinr_common(&w, &v, &ch, &s, 1, 0).unwrap();
        assert!((got - gain(&h, &w.common[0]) / 0.5).abs() < 1e-12);
        w.common[0].fill(C64::new(0.0, 0.0));
        assert_eq!(sinr_common(&w, &v, &ch, &s, 1, 0).unwrap(), 0.0);
        let s_self = DecodingStructure::self_only(2);
        assert!(sinr_common(&w, &v, &ch, &s_self, 1, 0).is_err());
    }

    #[test]
    fn total_power_values() {
        let mut w = BeamformerSet::zeros(1, 2, 2);
        assert_eq!(total_power(&w, &[1.0, 1.0]), 0.0);
        w.private[1][0] = C64::new(1.0, 1.0);
        assert_eq!(total_power(&w, &[1.0, 1.0]), 2.0);
        assert_eq!(total_power(&w.scaled(2.0), &[1.0, 1.0]), 8.0);
    }

    #[test]
    fn rates_of_zero_beams_are_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = random_channels(&mut rng, 3, 2, 2, 1.0);
        let v = PhaseShift::ones(2);
        let s = build_decoding_structure(&ch, &v, 2).unwrap();
        let w = BeamformerSet::zeros(1, 2, 3);
        assert_eq!(sum_rate(&w, &v, &ch, &s, 1e7).unwrap(), 0.0);
        let cfg = SystemConfig { n_bs: 1, antennas_per_bs: 2, n_reflect: 2, ..SystemConfig::default() }.with_users(3, 0.0);
        assert!(check_qos(&w, &v, &ch, &s, &cfg, Some(&RateAllocation::zeros(3))).unwrap().all_pass());
        assert!(check_qos(&w, &v, &ch, &s, &cfg, Some(&RateAllocation::zeros(3))).unwrap().all_targets_met());
    }

    #[test]
    fn single_user_rate_closed_form() {
        let ch = ChannelSet::new(vec![cv(&[(1.0, 1.0)])], CMatrix::zeros(1, 1), vec![cv(&[(0.0, 0.0)])], 2.0).unwrap();
        let mut w = BeamformerSet::zeros(1, 1, 1);
        w.private[0] = cv(&[(1.0, 0.0)]);
        w.common[0] = cv(&[(0.0, 2.0)]);
        let s = DecodingStructure::self_only(1);
        let v = PhaseShift::ones(1);
        let gp: f64 = 2.0 / 2.0;
        let gc: f64 = 8.0 / (2.0 + 2.0);
        let want = 10.0 * ((1.0 + gp).log2() + (1.0 + gc).log2());
        let got = achieved_rate(&w, &v, &ch, &s, 0, 10.0).unwrap();
        assert!((got - want).abs() < 1e-12);
        assert!((sum_rate(&w, &v, &ch, &s, 10.0).unwrap() - got).abs() < 1e-12);
    }

    #[test]
    fn common_term_is_min_over_decoders() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let ch = random_channels(&mut rng, 3, 3, 2, 0.2);
        let v = PhaseShift::ones(2);
        let s = build_decoding_structure(&ch, &v, 3).unwrap();
        let w = random_beams(&mut rng, 3, 3);
        let model = LinkModel::new(&ch, &v, &s).unwrap();
        for k in 0..3 {
            let rate = model.achieved_rate(&w, k, 1.0);
            let private = (1.0 + model.sinr_private(&w, k)).log2();
            for &i in &s.decoders[k] {
                assert!(rate - private <= (1.0 + model.sinr_common(&w, i, k).unwrap()).log2() + 1e-15);
            }
        }
    }

    #[test]
    fn sum_rate_invariant_under_user_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let ch = random_channels(&mut rng, 3, 2, 2, 0.4);
        let v = PhaseShift::from_angles(&[0.3, -1.2]);
        let s = build_decoding_structure(&ch, &v, 2).unwrap();
        let w = random_beams(&mut rng, 3, 2);
        let perm = [2usize, 0, 1];
        let inv = |j: usize| perm.iter().position(|&p| p == j).unwrap();
        let ch_p = ChannelSet::new(
            perm.iter().map(|&p| ch.direct[p].clone()).collect(),
            ch.bs_to_irs.clone(),
            perm.iter().map(|&p| ch.irs_to_user[p].clone()).collect(),
            0.4,
        )
        .unwrap();
        let s_p = DecodingStructure::from_orders(perm.iter().map(|&p| s.order[p].iter().map(|&j| inv(j)).collect()).collect()).unwrap();
        let mut w_p = w.clone();
        for (new, &old) in perm.iter().enumerate() {
            w_p.private[new] = w.private[old].clone();
            w_p.common[new] = w.common[old].clone();
        }
        let a = sum_rate(&w, &v, &ch, &s, 1e6).unwrap();
        let b = sum_rate(&w_p, &v, &ch_p, &s_p, 1e6).unwrap();
        assert!((a - b).abs() < 1e-6 * a);
    }

    #[test]
    fn check_qos_agrees_with_recomputed_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let ch = random_channels(&mut rng, 4, 3, 2, 0.5);
        let v = PhaseShift::from_angles(&[1.0, 2.0]);
        let s = build_decoding_structure(&ch, &v, 2).unwrap();
        let w = random_beams(&mut rng, 4, 3);
        let cfg = SystemConfig { n_bs: 1, antennas_per_bs: 3, n_reflect: 2, bandwidth_hz: 1e6, ..SystemConfig::default() }.with_users(4, 1.2e6);
        let report = check_qos(&w, &v, &ch, &s, &cfg, None).unwrap();
        for k in 0..4 {
            let rate = achieved_rate(&w, &v, &ch, &s, k, 1e6).unwrap();
            assert_eq!(report.users[k].rate_bps, rate);
            assert_eq!(report.users[k].passes, rate >= 1.2e6 - rate_tolerance(1.2e6));
        }
    }

    #[test]
    fn cluster_masks_zero_blocks() {
        let mut w = BeamformerSet::zeros(2, 2, 2);
        w.private[0] = cv(&[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (1.0, 0.0)]);
        w.cluster_private[1] = vec![1];
        assert!(w.validate().is_err());
        w.apply_masks();
        w.validate().unwrap();
        assert_eq!(w.private_power(0), 2.0);
    }
}

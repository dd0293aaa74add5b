//! Network topologies, the large-scale channel model, small-scale fading and
//! effective-channel composition.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SystemConfig;
use crate::error::{invalid, Error, Result};
use crate::linalg::{complex_gaussian, standard_normal, CMatrix, CVector, C64};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub bs_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    pub irs_position: Point,
}

/// Drop BSs and users uniformly over the square `[-w, w]^2`; the IRS sits at
/// the center.
pub fn sample_topology<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Topology {
    let w = config.area_halfwidth_m;
    let mut draw = || -> Point {
        if w == 0.0 {
            return [0.0, 0.0];
        }
        [rng.gen_range(-w..=w), rng.gen_range(-w..=w)]
    };
    let bs_positions = (0..config.n_bs).map(|_| draw()).collect();
    let user_positions = (0..config.n_users).map(|_| draw()).collect();
    Topology { bs_positions, user_positions, irs_position: [0.0, 0.0] }
}

fn distance_km(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / 1000.0
}

/// Path loss in dB at `distance_km`, clamped below at `min_distance_km`.
pub fn path_loss_db(distance_km: f64, min_distance_km: f64) -> Result<f64> {
    if distance_km.is_nan() || distance_km < 0.0 {
        return invalid(format!("distance must be non-negative, got {distance_km}"));
    }
    let d = distance_km.max(min_distance_km);
    if !(d > 0.0) || !d.is_finite() {
        return invalid(format!("distance after clamping must be positive and finite, got {d}"));
    }
    Ok(148.1 + 37.6 * d.log10())
}

/// Unit-modulus reflection vector of the IRS.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseShift(CVector);

impl PhaseShift {
    pub const MODULUS_TOL: f64 = 1e-9;

    pub fn new(v: CVector) -> Result<Self> {
        if let Some((r, z)) = v.iter().enumerate().find(|(_, z)| (z.norm() - 1.0).abs() > Self::MODULUS_TOL) {
            return invalid(format!("reflection coefficient {r} has modulus {}", z.norm()));
        }
        Ok(Self(v))
    }

    /// All elements at phase zero.
    pub fn ones(len: usize) -> Self {
        Self(CVector::from_element(len, C64::new(1.0, 0.0)))
    }

    pub fn from_angles(theta: &[f64]) -> Self {
        Self(CVector::from_iterator(theta.len(), theta.iter().map(|&t| C64::from_polar(1.0, t))))
    }

    /// Project an arbitrary vector onto the unit-modulus set by keeping phases.
    /// Zero entries map to phase zero.
    pub fn from_phases_of(v: &CVector) -> Self {
        Self(v.map(|z| if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) }))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    /// Phase angles in `[0, 2π)`.
    pub fn angles(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.arg().rem_euclid(std::f64::consts::TAU)).collect()
    }
}

/// Aggregate channel state of one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Direct BS-to-user channels, one `N*L` vector per user.
    pub direct: Vec<CVector>,
    /// Aggregate BS-to-IRS matrix, `N*L x R`.
    pub bs_to_irs: CMatrix,
    /// IRS-to-user channels, one length-`R` vector per user.
    pub irs_to_user: Vec<CVector>,
    /// Cascade `H_k = H_BI diag(h_k^IU)` per user.
    pub cascade: Vec<CMatrix>,
    pub noise_power_w: f64,
}

impl ChannelSet {
    pub fn new(direct: Vec<CVector>, bs_to_irs: CMatrix, irs_to_user: Vec<CVector>, noise_power_w: f64) -> Result<Self> {
        if direct.len() != irs_to_user.len() || direct.is_empty() {
            return invalid("direct and irs_to_user need one entry per user");
        }
        let m = bs_to_irs.nrows();
        let r = bs_to_irs.ncols();
        if direct.iter().any(|h| h.len() != m) || irs_to_user.iter().any(|g| g.len() != r) {
            return invalid("channel dimensions are inconsistent");
        }
        if !(noise_power_w > 0.0) || !noise_power_w.is_finite() {
            return invalid("noise power must be positive and finite");
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !direct.iter().flatten().all(finite) || !bs_to_irs.iter().all(finite) || !irs_to_user.iter().flatten().all(finite) {
            return invalid("channel coefficients must be finite");
        }
        let cascade = irs_to_user.iter().map(|g| compose_cascade(&bs_to_irs, g)).collect();
        Ok(Self { direct, bs_to_irs, irs_to_user, cascade, noise_power_w })
    }

    pub fn n_users(&self) -> usize {
        self.direct.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.bs_to_irs.nrows()
    }

    pub fn n_reflect(&self) -> usize {
        self.bs_to_irs.ncols()
    }

    /// Same direct channels with every reflected path removed.
    pub fn without_irs(&self) -> Self {
        let mut out = self.clone();
        out.bs_to_irs.fill(C64::new(0.0, 0.0));
        out.irs_to_user.iter_mut().for_each(|g| g.fill(C64::new(0.0, 0.0)));
        out.cascade.iter_mut().for_each(|h| h.fill(C64::new(0.0, 0.0)));
        out
    }

    pub fn has_irs(&self) -> bool {
        self.cascade.iter().any(|h| h.iter().any(|z| z.norm_sqr() > 0.0))
    }

    /// `h_k + H_k v`.
    pub fn effective_channel(&self, k: usize, v: &PhaseShift) -> Result<CVector> {
        if k >= self.n_users() {
            return invalid(format!("user index {k} out of range"));
        }
        if v.len() != self.n_reflect() {
            return invalid(format!("phase vector has length {}, expected {}", v.len(), self.n_reflect()));
        }
        Ok(&self.direct[k] + &self.cascade[k] * v.as_vector())
    }

    pub fn effective_channels(&self, v: &PhaseShift) -> Result<Vec<CVector>> {
        (0..self.n_users()).map(|k| self.effective_channel(k, v)).collect()
    }

    /// SHA-256 over every coefficient and the noise power, hex-truncated to
    /// 16 characters. Identifies paired drops in experiment output.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut feed = |z: &C64| {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        };
        self.direct.iter().flatten().for_each(&mut feed);
        self.bs_to_irs.iter().for_each(&mut feed);
        self.irs_to_user.iter().flatten().for_each(&mut feed);
        h.update(self.noise_power_w.to_le_bytes());
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// `H_BI diag(g)`: column `r` of `H_BI` scaled by `g[r]`.
pub fn compose_cascade(bs_to_irs: &CMatrix, irs_to_user: &CVector) -> CMatrix {
    let mut h = bs_to_irs.clone();
    for (r, mut col) in h.column_iter_mut().enumerate() {
        col *= irs_to_user[r];
    }
    h
}

/// Amplitude of one link: path loss plus log-normal shadowing, in linear
/// amplitude units.
fn link_amplitude<R: Rng + ?Sized>(config: &SystemConfig, a: Point, b: Point, rng: &mut R) -> Result<f64> {
    let pl = path_loss_db(distance_km(a, b), config.min_distance_km)?;
    let shadow = if config.shadowing_std_db > 0.0 { config.shadowing_std_db * standard_normal(rng) } else { 0.0 };
    Ok(10f64.powf(-(pl + shadow) / 20.0))
}

fn fading<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> C64 {
    if config.rayleigh_fading {
        complex_gaussian(rng)
    } else {
        C64::new(1.0, 0.0)
    }
}

/// Draw one channel realization for `topology`.
///
/// Every (transmitter, receiver) link gets its own shadowing draw shared by
/// all antenna/element pairs of that link; each coefficient then gets an
/// independent Rayleigh fading draw.
pub fn sample_channels<R: Rng + ?Sized>(config: &SystemConfig, topology: &Topology, rng: &mut R) -> Result<ChannelSet> {
    let l = config.antennas_per_bs;
    let nl = config.n_antennas();
    let r = config.n_reflect;
    if topology.bs_positions.len() != config.n_bs || topology.user_positions.len() != config.n_users {
        return Err(Error::InvalidInput("topology does not match config".into()));
    }

    let mut direct = Vec::with_capacity(config.n_users);
    for &user in &topology.user_positions {
        let mut h = CVector::zeros(nl);
        for (n, &bs) in topology.bs_positions.iter().enumerate() {
            let amp = link_amplitude(config, bs, user, rng)?;
            for a in 0..l {
                h[n * l + a] = fading(config, rng) * amp;
            }
        }
        direct.push(h);
    }

    let mut bs_to_irs = CMatrix::zeros(nl, r);
    for (n, &bs) in topology.bs_positions.iter().enumerate() {
        let amp = link_amplitude(config, bs, topology.irs_position, rng)?;
        for a in 0..l {
            for e in 0..r {
                bs_to_irs[(n * l + a, e)] = fading(config, rng) * amp;
            }
        }
    }

    let mut irs_to_user = Vec::with_capacity(config.n_users);
    for &user in &topology.user_positions {
        let amp = link_amplitude(config, topology.irs_position, user, rng)?;
        irs_to_user.push(CVector::from_fn(r, |_, _| fading(config, rng) * amp));
    }

    ChannelSet::new(direct, bs_to_irs, irs_to_user, config.noise_power_w())
}

//! System-level parameters shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network dimensions, channel model and algorithm knobs for one scenario.
///
/// Powers are in watts and rates in bit/s; dBm only appears at the edges
/// (noise spectral density here, CSV output in the harness).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub n_bs: usize,
    pub antennas_per_bs: usize,
    pub n_users: usize,
    pub n_reflect: usize,
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    /// Per-user rate floor in bit/s.
    pub qos_min_bps: Vec<f64>,
    /// Per-user priority weight on transmit power.
    pub power_weights: Vec<f64>,
    /// Maximum number of common messages a user decodes (its own included).
    pub decode_group_max: usize,
    pub n_randomizations: usize,
    /// Weight on the SINR residuals versus the rank-one penalty, in (0, 1].
    pub penalty_tradeoff: f64,
    /// Convex-combination step of the SCA update, in (0, 1].
    pub sca_step: f64,
    /// Relative power-decrease threshold for both loops.
    pub stop_epsilon: f64,
    pub max_outer_iters: usize,
    pub max_sca_iters: usize,
    /// Cap on penalized SDP solves (penalty re-linearizations) per outer
    /// iteration.
    pub sdp_repetitions: usize,
    pub area_halfwidth_m: f64,
    pub shadowing_std_db: f64,
    pub rayleigh_fading: bool,
    pub min_distance_km: f64,
    pub rng_seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let k = 6;
        Self {
            n_bs: 4,
            antennas_per_bs: 4,
            n_users: k,
            n_reflect: 15,
            bandwidth_hz: 10e6,
            noise_dbm_per_hz: -169.0,
            qos_min_bps: vec![4e6; k],
            power_weights: vec![1.0; k],
            decode_group_max: 2,
            n_randomizations: 25,
            penalty_tradeoff: 0.9,
            sca_step: 1.0,
            stop_epsilon: 1e-3,
            max_outer_iters: 10,
            max_sca_iters: 30,
            sdp_repetitions: 20,
            area_halfwidth_m: 500.0,
            shadowing_std_db: 8.0,
            rayleigh_fading: true,
            min_distance_km: 1e-3,
            rng_seed: 0,
        }
    }
}

impl SystemConfig {
    /// Copy of `self` resized to `k` users with uniform QoS and unit weights.
    pub fn with_users(mut self, k: usize, qos_bps: f64) -> Self {
        self.n_users = k;
        self.qos_min_bps = vec![qos_bps; k];
        self.power_weights = vec![1.0; k];
        self
    }

    /// Parse a TOML document; missing keys take their defaults and unknown
    /// keys are rejected.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Length of the aggregate antenna vector, `N * L`.
    pub fn n_antennas(&self) -> usize {
        self.n_bs * self.antennas_per_bs
    }

    pub fn noise_power_w(&self) -> f64 {
        10f64.powf((self.noise_dbm_per_hz - 30.0) / 10.0) * self.bandwidth_hz
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_bs == 0 || self.antennas_per_bs == 0 || self.n_users == 0 || self.n_reflect == 0 {
            return bad("n_bs, antennas_per_bs, n_users and n_reflect must be >= 1");
        }
        if self.decode_group_max == 0 || self.n_randomizations == 0 {
            return bad("decode_group_max and n_randomizations must be >= 1");
        }
        if !(self.penalty_tradeoff > 0.0 && self.penalty_tradeoff <= 1.0) {
            return bad("penalty_tradeoff must lie in (0, 1]");
        }
        if !(self.sca_step > 0.0 && self.sca_step <= 1.0) {
            return bad("sca_step must lie in (0, 1]");
        }
        if !(self.stop_epsilon > 0.0) {
            return bad("stop_epsilon must be positive");
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz must be positive");
        }
        if self.qos_min_bps.len() != self.n_users || self.power_weights.len() != self.n_users {
            return bad("qos_min_bps and power_weights need one entry per user");
        }
        if self.power_weights.iter().any(|&a| !(a > 0.0)) {
            return bad("power_weights must be positive");
        }
        if self.qos_min_bps.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
            return bad("qos_min_bps must be finite and non-negative");
        }
        if !(self.area_halfwidth_m >= 0.0) || !(self.shadowing_std_db >= 0.0) {
            return bad("area_halfwidth_m and shadowing_std_db must be non-negative");
        }
        if !(self.min_distance_km > 0.0) {
            return bad("min_distance_km must be positive");
        }
        if self.max_sca_iters == 0 || self.sdp_repetitions == 0 {
            return bad("max_sca_iters and sdp_repetitions must be >= 1");
        }
        Ok(())
    }
}

//! Outer alternation between beamforming and phase-shift design, plus the
//! baseline schemes built from the same pieces.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::beamform::{anchor, init_mrc, sca_iterate, ScaTrace, Streams};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::phase::phase_step;
use crate::rs::{build_decoding_structure, check_qos, total_power, BeamformerSet, DecodingStructure, LinkModel};
use crate::scenario::{ChannelSet, PhaseShift};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    RsIrs,
    RsNoirs,
    TinIrs,
    TinNoirs,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::RsIrs, Scheme::RsNoirs, Scheme::TinIrs, Scheme::TinNoirs];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::RsIrs => "rs_irs",
            Scheme::RsNoirs => "rs_noirs",
            Scheme::TinIrs => "tin_irs",
            Scheme::TinNoirs => "tin_noirs",
        }
    }

    pub fn uses_irs(self) -> bool {
        matches!(self, Scheme::RsIrs | Scheme::TinIrs)
    }

    pub fn streams(self) -> Streams {
        match self {
            Scheme::RsIrs | Scheme::RsNoirs => Streams::RateSplitting,
            Scheme::TinIrs | Scheme::TinNoirs => Streams::PrivateOnly,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.label() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown scheme '{s}' (expected rs_irs, rs_noirs, tin_irs or tin_noirs)")))
    }
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub scheme: Scheme,
    pub beams: BeamformerSet,
    pub phase: PhaseShift,
    pub structure: DecodingStructure,
    /// Weighted power (W) after every beamforming pass.
    pub power_trajectory: Vec<f64>,
    /// Number of beamforming passes.
    pub outer_iters: usize,
    pub rates_bps: Vec<f64>,
    pub feasible: bool,
    pub weighted_power_w: f64,
    pub power_w: f64,
    /// Phase updates that passed screening and were adopted.
    pub phase_updates: usize,
    pub sca_traces: Vec<ScaTrace>,
    /// Some subproblem failed and a previous iterate was kept.
    pub degraded: bool,
}

impl OptResult {
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.power_trajectory.windows(2).all(|w| w[1] <= w[0] + slack * w[0].abs())
    }

    pub fn common_power_w(&self) -> f64 {
        (0..self.beams.n_users()).map(|k| self.beams.common_power(k)).sum()
    }
}

/// Joint RS + IRS design from the all-ones phase shift.
pub fn alternating_optimize<R: Rng + ?Sized>(channels: &ChannelSet, config: &SystemConfig, rng: &mut R) -> Result<OptResult> {
    optimize(channels, config, Scheme::RsIrs, Streams::RateSplitting, true, rng)
}

/// Treating interference as noise: no common streams.
pub fn run_tin<R: Rng + ?Sized>(channels: &ChannelSet, config: &SystemConfig, with_irs: bool, rng: &mut R) -> Result<OptResult> {
    if with_irs {
        optimize(channels, config, Scheme::TinIrs, Streams::PrivateOnly, true, rng)
    } else {
        optimize(&channels.without_irs(), config, Scheme::TinNoirs, Streams::PrivateOnly, false, rng)
    }
}

/// Rate splitting with the reflecting surface switched off.
pub fn run_no_irs_rs<R: Rng + ?Sized>(channels: &ChannelSet, config: &SystemConfig, rng: &mut R) -> Result<OptResult> {
    optimize(&channels.without_irs(), config, Scheme::RsNoirs, Streams::RateSplitting, false, rng)
}

pub fn run_scheme<R: Rng + ?Sized>(scheme: Scheme, channels: &ChannelSet, config: &SystemConfig, rng: &mut R) -> Result<OptResult> {
    match scheme {
        Scheme::RsIrs => alternating_optimize(channels, config, rng),
        Scheme::RsNoirs => run_no_irs_rs(channels, config, rng),
        Scheme::TinIrs => run_tin(channels, config, true, rng),
        Scheme::TinNoirs => run_tin(channels, config, false, rng),
    }
}

// The published pseudo-code loops "while the decrease is below epsilon" and
// nests every step under the SDP-feasibility branch. Both are read as slips:
// the loop stops once the decrease falls below epsilon, and an infeasible
// SDP (or no feasible candidate) keeps the previous phases and continues with
// a beamforming pass, which counts towards `max_outer_iters`.
fn optimize<R: Rng + ?Sized>(
    channels: &ChannelSet,
    config: &SystemConfig,
    scheme: Scheme,
    streams: Streams,
    phase_stage: bool,
    rng: &mut R,
) -> Result<OptResult> {
    config.validate()?;
    let mut v = PhaseShift::ones(channels.n_reflect());
    let structure = match streams {
        Streams::RateSplitting => build_decoding_structure(channels, &v, config.decode_group_max)?,
        Streams::PrivateOnly => DecodingStructure::self_only(channels.n_users()),
    };
    let start = init_mrc(channels, &v, &structure, config, streams)?;
    let first = sca_iterate(channels, &v, &structure, config, streams, &start)?;
    let mut traces = vec![first.trace.clone()];
    let mut degraded = first.trace.degraded;
    if !first.trace.qos_reached {
        return finish(channels, config, scheme, first.beams, v, structure, Vec::new(), traces, 0, degraded, false);
    }
    let mut beams = first.beams;
    let mut rates = first.rates;
    let mut trajectory = vec![total_power(&beams, &config.power_weights)];
    let mut updates = 0;
    let phase_stage = phase_stage && channels.has_irs();

    while phase_stage && trajectory.len() < config.max_outer_iters.max(1) {
        let previous = *trajectory.last().expect("trajectory is non-empty");
        if previous == 0.0 {
            break;
        }
        let step = phase_step(channels, &v, &beams, &rates, &structure, config, rng)?;
        if let Some(next) = step.selected {
            v = next;
            updates += 1;
        } else {
            log::debug!("phase step kept the incumbent ({:?}, {} feasible candidates)", step.sdp_status, step.feasible_candidates);
        }
        let start = anchor(channels, &v, &structure, config, beams.clone())?;
        let out = sca_iterate(channels, &v, &structure, config, streams, &start)?;
        degraded |= out.trace.degraded;
        traces.push(out.trace.clone());
        if !out.trace.qos_reached {
            degraded = true;
            break;
        }
        let power = total_power(&out.beams, &config.power_weights);
        beams = out.beams;
        rates = out.rates;
        trajectory.push(power);
        if (previous - power) / previous < config.stop_epsilon {
            break;
        }
    }
    finish(channels, config, scheme, beams, v, structure, trajectory, traces, updates, degraded, true)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    channels: &ChannelSet,
    config: &SystemConfig,
    scheme: Scheme,
    beams: BeamformerSet,
    phase: PhaseShift,
    structure: DecodingStructure,
    power_trajectory: Vec<f64>,
    sca_traces: Vec<ScaTrace>,
    phase_updates: usize,
    degraded: bool,
    reached: bool,
) -> Result<OptResult> {
    let model = LinkModel::new(channels, &phase, &structure)?;
    let rates_bps = (0..beams.n_users()).map(|k| model.achieved_rate(&beams, k, config.bandwidth_hz)).collect();
    let feasible = reached && check_qos(&beams, &phase, channels, &structure, config, None)?.all_pass();
    let weighted_power_w = total_power(&beams, &config.power_weights);
    let power_w = total_power(&beams, &vec![1.0; beams.n_users()]);
    Ok(OptResult {
        scheme,
        outer_iters: power_trajectory.len(),
        beams,
        phase,
        structure,
        power_trajectory,
        rates_bps,
        feasible,
        weighted_power_w,
        power_w,
        phase_updates,
        sca_traces,
        degraded,
    })
}

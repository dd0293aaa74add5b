//! Transmit-power minimization for a rate-splitting, IRS-assisted multi-cell
//! downlink.
//!
//! The crate alternates between two convex subproblems: an inner-convex
//! (SCA) beamforming program for fixed reflection phases, and a lifted
//! semidefinite phase-shift program with a rank-one penalty for fixed
//! beamformers. Both are handed to a shared conic backend.
//!
//! Module map:
//! - [`scenario`]: topologies, path loss, channel draws, effective channels.
//! - [`rs`]: decoding structure, SINRs, rates and the power objective.
//! - [`conic`]: solver-agnostic conic programs and the Clarabel backend.
//! - [`beamform`]: SCA beamforming subproblem and its iteration.
//! - [`phase`]: lifted phase-shift SDP, Gaussian randomization, selection.
//! - [`orchestrator`]: the outer alternation and the baseline schemes.
//! - [`harness`]: Monte Carlo experiments, CSV output and summaries.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

// Links the system OpenBLAS used by the PSD cone.
use openblas_src as _;

pub mod beamform;
pub mod config;
pub mod conic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod orchestrator;
pub mod phase;
pub mod rs;
pub mod scenario;

pub use config::SystemConfig;
pub use error::{Error, Result};

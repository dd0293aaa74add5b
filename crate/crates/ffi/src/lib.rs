//! C ABI over `rsirs-core`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns an
//! [`RsirsStatus`]; on failure the message is kept per thread and can be
//! read with [`rsirs_last_error_message`]. Panics never unwind into C.
//!
//! The header `include/rsirs.h` is regenerated by the build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsirs_core::orchestrator::{run_scheme, OptResult, Scheme};
use rsirs_core::scenario::{sample_channels, sample_topology, ChannelSet};
use rsirs_core::{Error, SystemConfig};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsirsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    InvalidConfig = 3,
    Solver = 4,
    Io = 5,
    Parse = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsirsScheme {
    RsIrs = 0,
    RsNoirs = 1,
    TinIrs = 2,
    TinNoirs = 3,
}

impl From<RsirsScheme> for Scheme {
    fn from(s: RsirsScheme) -> Self {
        match s {
            RsirsScheme::RsIrs => Scheme::RsIrs,
            RsirsScheme::RsNoirs => Scheme::RsNoirs,
            RsirsScheme::TinIrs => Scheme::TinIrs,
            RsirsScheme::TinNoirs => Scheme::TinNoirs,
        }
    }
}

/// System parameters.
pub struct RsirsConfig(SystemConfig);

/// One sampled topology and channel realization plus the config it came from.
pub struct RsirsScenario {
    config: SystemConfig,
    channels: ChannelSet,
}

/// Outcome of one scheme run.
pub struct RsirsResult(OptResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RsirsStatus {
    match e {
        Error::InvalidInput(_) => RsirsStatus::InvalidInput,
        Error::InvalidConfig(_) => RsirsStatus::InvalidConfig,
        Error::Solver(_) => RsirsStatus::Solver,
        Error::Io(_) | Error::Csv(_) => RsirsStatus::Io,
        Error::Parse(_) => RsirsStatus::Parse,
    }
}

/// Run `f`, translating errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (RsirsStatus, String)>>(f: F) -> RsirsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RsirsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            RsirsStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (RsirsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (RsirsStatus, String) {
    (RsirsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (RsirsStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), (RsirsStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message of the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rsirs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default configuration (4 BSs x 4 antennas, 6 users, 15 elements). Never returns null.
#[no_mangle]
pub extern "C" fn rsirs_config_default() -> *mut RsirsConfig {
    Box::into_raw(Box::new(RsirsConfig(SystemConfig::default())))
}

/// Parse a TOML document; absent keys keep their defaults.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsirs_config_from_toml(toml: *const c_char, out: *mut *mut RsirsConfig) -> RsirsStatus {
    guard(|| {
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml).to_str().map_err(|e| (RsirsStatus::Parse, e.to_string()))?;
        let cfg = SystemConfig::from_toml_str(text).map_err(core_err)?;
        cfg.validate().map_err(core_err)?;
        store(out, RsirsConfig(cfg))
    })
}

/// Resize to `n_users` users, each with floor `qos_bps` and unit weight.
///
/// # Safety
/// `config` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn rsirs_config_set_users(config: *mut RsirsConfig, n_users: usize, qos_bps: f64) -> RsirsStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        let next = cfg.0.clone().with_users(n_users, qos_bps);
        next.validate().map_err(core_err)?;
        cfg.0 = next;
        Ok(())
    })
}

/// Set per-user power weights; `len` must equal the user count.
///
/// # Safety
/// `config` must be live and `weights` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rsirs_config_set_power_weights(config: *mut RsirsConfig, weights: *const f64, len: usize) -> RsirsStatus {
    guard(|| {
        let cfg = config.as_mut().ok_or_else(|| null("config"))?;
        if weights.is_null() {
            return Err(null("weights"));
        }
        let mut next = cfg.0.clone();
        next.power_weights = std::slice::from_raw_parts(weights, len).to_vec();
        next.validate().map_err(core_err)?;
        cfg.0 = next;
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library (or be null) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rsirs_config_free(config: *mut RsirsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Draw a topology and channel set from `config` with `seed`.
///
/// # Safety
/// `config` must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsirs_scenario_new(config: *const RsirsConfig, seed: u64, out: *mut *mut RsirsScenario) -> RsirsStatus {
    guard(|| {
        let cfg = &as_ref(config, "config")?.0;
        cfg.validate().map_err(core_err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = sample_topology(cfg, &mut rng);
        let channels = sample_channels(cfg, &topo, &mut rng).map_err(core_err)?;
        store(out, RsirsScenario { config: cfg.clone(), channels })
    })
}

/// # Safety
/// `scenario` must be live.
#[no_mangle]
pub unsafe extern "C" fn rsirs_scenario_n_users(scenario: *const RsirsScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.channels.n_users())
}

/// # Safety
/// `scenario` must come from this library (or be null) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rsirs_scenario_free(scenario: *mut RsirsScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Run `scheme` on `scenario`; `seed` drives the randomization step.
///
/// # Safety
/// `scenario` must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rsirs_optimize(
    scenario: *const RsirsScenario,
    scheme: RsirsScheme,
    seed: u64,
    out: *mut *mut RsirsResult,
) -> RsirsStatus {
    guard(|| {
        let s = as_ref(scenario, "scenario")?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let res = run_scheme(scheme.into(), &s.channels, &s.config, &mut rng).map_err(core_err)?;
        store(out, RsirsResult(res))
    })
}

/// 1 if every QoS floor is met, 0 otherwise (including a null handle).
///
/// # Safety
/// `result` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn rsirs_result_feasible(result: *const RsirsResult) -> i32 {
    result.as_ref().map_or(0, |r| r.0.feasible as i32)
}

/// Unweighted transmit power in watts; NaN for a null handle.
///
/// # Safety
/// `result` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn rsirs_result_power_w(result: *const RsirsResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.power_w)
}

/// Weighted transmit power in watts; NaN for a null handle.
///
/// # Safety
/// `result` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn rsirs_result_weighted_power_w(result: *const RsirsResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.weighted_power_w)
}

/// # Safety
/// `result` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn rsirs_result_outer_iters(result: *const RsirsResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.outer_iters)
}

/// Number of reflecting elements in the returned phase vector.
///
/// # Safety
/// `result` must be live or null.
#[no_mangle]
pub unsafe extern "C" fn rsirs_result_n_phases(result: *const RsirsResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.phase.len())
}

/// Copy phase angles in radians, `[0, 2π)`, into `out[0..len]`.
/// `len` must equal [`rsirs_result_n_phases`].
///
/// # Safety
/// `result` must be live and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rsirs_result_phases(result: *const RsirsResult, out: *mut f64, len: usize) -> RsirsStatus {
    guard(|| {
        let r = as_ref(result, "result")?;
        copy_out(&r.0.phase.angles(), out, len)
    })
}

/// Copy per-user achieved rates in bit/s into `out[0..len]`; `len` must
/// equal the user count.
///
/// # Safety
/// `result` must be live and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rsirs_result_rates(result: *const RsirsResult, out: *mut f64, len: usize) -> RsirsStatus {
    guard(|| {
        let r = as_ref(result, "result")?;
        copy_out(&r.0.rates_bps, out, len)
    })
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), (RsirsStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len != src.len() {
        return Err((RsirsStatus::InvalidInput, format!("buffer holds {len} values, need {}", src.len())));
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(src);
    Ok(())
}

/// # Safety
/// `result` must come from this library (or be null) and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn rsirs_result_free(result: *mut RsirsResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

//! C ABI for the dispatch simulator and policy runtime.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `_free` function. Functions returning `int32_t` use 0 for
//! success and a negative [`ErrorCode`] otherwise; the most recent error
//! message is available per thread through `essdispatch_last_error`.
//!
//! The flat state layout used across this boundary is
//! `[t, price, demand_kw[bus 1..n], soc[1..b], v_ess_pu[1..b]]`,
//! so `state_len = 2 + n + 2 b`.

use essdispatch::env::{self, GridState, RewardConfig};
use essdispatch::eval::{Policy, TrainedPolicy};
use essdispatch::net::NetworkTopology;
use essdispatch::profiles::{self, ProfileSet, SyntheticConfig};
use essdispatch::td3::load_policy;
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::path::PathBuf;
use std::sync::Arc;

/// Status codes returned by fallible functions.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Ok = 0,
    NullArgument = -1,
    InvalidUtf8 = -2,
    Parse = -3,
    Validation = -4,
    PowerFlow = -5,
    DimensionMismatch = -6,
    Io = -7,
    EpisodeFinished = -8,
    BufferTooSmall = -9,
    Internal = -10,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(code: ErrorCode, message: impl Into<String>) -> i32 {
    LAST_ERROR.with(|e| *e.borrow_mut() = message.into());
    code as i32
}

fn clear_error() -> i32 {
    LAST_ERROR.with(|e| e.borrow_mut().clear());
    ErrorCode::Ok as i32
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be NULL (query mode).
#[no_mangle]
pub unsafe extern "C" fn essdispatch_last_error(buf: *mut c_char, len: usize) -> i32 {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() as i32
    })
}

/// Copy the library version string into `buf`; returns its full length.
///
/// # Safety
/// `buf` must point to `len` writable bytes, or be NULL.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_version(buf: *mut c_char, len: usize) -> i32 {
    let version = env!("CARGO_PKG_VERSION");
    let bytes = version.as_bytes();
    if !buf.is_null() && len > 0 {
        let n = bytes.len().min(len - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
        *buf.add(n) = 0;
    }
    bytes.len() as i32
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, i32> {
    if ptr.is_null() {
        return Err(set_error(ErrorCode::NullArgument, "null string argument"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| set_error(ErrorCode::InvalidUtf8, "string is not valid UTF-8"))
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Opaque radial network handle.
pub struct EssNetwork {
    topo: Arc<NetworkTopology>,
}

/// Load a network definition file. Returns NULL on error
/// (see `essdispatch_last_error`).
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_network_load(path: *const c_char) -> *mut EssNetwork {
    let Ok(path) = cstr_arg(path) else {
        return std::ptr::null_mut();
    };
    match essdispatch::net::load_network(PathBuf::from(path)) {
        Ok(topo) => {
            clear_error();
            Box::into_raw(Box::new(EssNetwork {
                topo: Arc::new(topo),
            }))
        }
        Err(e) => {
            set_error(ErrorCode::Parse, e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Apply a reconfiguration case from a case file to an existing network,
/// returning a new handle. NULL on error.
///
/// # Safety
/// `network` must be a live handle from this library; strings as above.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_network_reconfigure(
    network: *const EssNetwork,
    reconfig_path: *const c_char,
    case_id: *const c_char,
) -> *mut EssNetwork {
    if network.is_null() {
        set_error(ErrorCode::NullArgument, "null network handle");
        return std::ptr::null_mut();
    }
    let (Ok(path), Ok(case_id)) = (cstr_arg(reconfig_path), cstr_arg(case_id)) else {
        return std::ptr::null_mut();
    };
    let cases = match essdispatch::net::load_reconfiguration_cases(PathBuf::from(path)) {
        Ok(c) => c,
        Err(e) => {
            set_error(ErrorCode::Parse, e.to_string());
            return std::ptr::null_mut();
        }
    };
    let Some(case) = cases.iter().find(|c| c.id == case_id) else {
        set_error(
            ErrorCode::Validation,
            format!("no reconfiguration case {case_id}"),
        );
        return std::ptr::null_mut();
    };
    let net = &*network;
    match net.topo.apply_reconfiguration(case) {
        Ok(topo) => {
            clear_error();
            Box::into_raw(Box::new(EssNetwork {
                topo: Arc::new(topo),
            }))
        }
        Err(e) => {
            set_error(ErrorCode::Validation, e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `network` must be a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_network_free(network: *mut EssNetwork) {
    if !network.is_null() {
        drop(Box::from_raw(network));
    }
}

/// # Safety
/// `network` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_network_bus_count(network: *const EssNetwork) -> i32 {
    if network.is_null() {
        return set_error(ErrorCode::NullArgument, "null network handle");
    }
    let net = &*network;
    net.topo.n_buses() as i32
}

/// # Safety
/// `network` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_network_line_count(network: *const EssNetwork) -> i32 {
    if network.is_null() {
        return set_error(ErrorCode::NullArgument, "null network handle");
    }
    let net = &*network;
    net.topo.lines.len() as i32
}

/// # Safety
/// `network` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_network_ess_count(network: *const EssNetwork) -> i32 {
    if network.is_null() {
        return set_error(ErrorCode::NullArgument, "null network handle");
    }
    let net = &*network;
    net.topo.ess.len() as i32
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

/// Opaque exogenous-profile handle (price, demand, PV time series).
pub struct EssProfiles {
    set: Arc<ProfileSet>,
}

/// Generate a synthetic profile set for the network.
///
/// # Safety
/// `network` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_profiles_synthetic(
    network: *const EssNetwork,
    days: u32,
    seed: u64,
) -> *mut EssProfiles {
    if network.is_null() {
        set_error(ErrorCode::NullArgument, "null network handle");
        return std::ptr::null_mut();
    }
    let cfg = SyntheticConfig {
        days: days.max(1) as usize,
        seed,
        ..Default::default()
    };
    let net = &*network;
    let set = profiles::synthesize(&net.topo, &cfg);
    clear_error();
    Box::into_raw(Box::new(EssProfiles { set: Arc::new(set) }))
}

/// Load profiles from the documented CSV layout.
///
/// # Safety
/// `network` must be a live handle; `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_profiles_load_csv(
    network: *const EssNetwork,
    path: *const c_char,
) -> *mut EssProfiles {
    if network.is_null() {
        set_error(ErrorCode::NullArgument, "null network handle");
        return std::ptr::null_mut();
    }
    let Ok(path) = cstr_arg(path) else {
        return std::ptr::null_mut();
    };
    let net = &*network;
    match profiles::load_csv(PathBuf::from(path), &net.topo, 96, 0.25) {
        Ok(set) => {
            clear_error();
            Box::into_raw(Box::new(EssProfiles { set: Arc::new(set) }))
        }
        Err(e) => {
            set_error(ErrorCode::Parse, e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `profiles` must be a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_profiles_free(profiles: *mut EssProfiles) {
    if !profiles.is_null() {
        drop(Box::from_raw(profiles));
    }
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

/// Opaque episode session over one network and profile set.
pub struct EssEnv {
    topo: Arc<NetworkTopology>,
    profiles: Arc<ProfileSet>,
    reward_cfg: RewardConfig,
    episode: usize,
    state: Option<GridState>,
    done: bool,
}

fn write_state(state: &GridState, out: &mut [f64]) {
    out[0] = state.t as f64;
    out[1] = state.price;
    let n = state.demand_kw.len();
    let b = state.soc.len();
    out[2..2 + n].copy_from_slice(&state.demand_kw);
    out[2 + n..2 + n + b].copy_from_slice(&state.soc);
    out[2 + n + b..2 + n + 2 * b].copy_from_slice(&state.v_ess_pu);
}

fn read_state(data: &[f64], n: usize, b: usize) -> GridState {
    GridState {
        t: data[0] as usize,
        price: data[1],
        demand_kw: data[2..2 + n].to_vec(),
        soc: data[2 + n..2 + n + b].to_vec(),
        v_ess_pu: data[2 + n + b..2 + n + 2 * b].to_vec(),
    }
}

/// Create an environment with default reward weights.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_env_new(
    network: *const EssNetwork,
    profiles: *const EssProfiles,
) -> *mut EssEnv {
    if network.is_null() || profiles.is_null() {
        set_error(ErrorCode::NullArgument, "null handle");
        return std::ptr::null_mut();
    }
    clear_error();
    let (net, prof) = (&*network, &*profiles);
    Box::into_raw(Box::new(EssEnv {
        topo: net.topo.clone(),
        profiles: prof.set.clone(),
        reward_cfg: RewardConfig::default(),
        episode: 0,
        state: None,
        done: false,
    }))
}

/// # Safety
/// `env` must be a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_env_free(env: *mut EssEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Length of the flat state vector: `2 + n + 2 b`.
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_env_state_len(env: *const EssEnv) -> i32 {
    if env.is_null() {
        return set_error(ErrorCode::NullArgument, "null env handle");
    }
    let e = &*env;
    (2 + e.topo.n_buses() + 2 * e.topo.ess.len()) as i32
}

/// Number of ESS units (= action vector length).
///
/// # Safety
/// `env` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_env_action_len(env: *const EssEnv) -> i32 {
    if env.is_null() {
        return set_error(ErrorCode::NullArgument, "null env handle");
    }
    let e = &*env;
    e.topo.ess.len() as i32
}

/// Reset to the start of `episode` (a day index) and write the initial state.
///
/// # Safety
/// `env` must be a live handle; `state_out` must point to `state_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_env_reset(
    env: *mut EssEnv,
    episode: u32,
    state_out: *mut f64,
    state_len: usize,
) -> i32 {
    if env.is_null() || state_out.is_null() {
        return set_error(ErrorCode::NullArgument, "null argument");
    }
    let e = &mut *env;
    let need = 2 + e.topo.n_buses() + 2 * e.topo.ess.len();
    if state_len < need {
        return set_error(
            ErrorCode::BufferTooSmall,
            format!("state buffer holds {state_len}, need {need}"),
        );
    }
    match env::reset(&e.topo, &e.profiles, episode as usize) {
        Ok(state) => {
            let out = std::slice::from_raw_parts_mut(state_out, need);
            write_state(&state, out);
            e.state = Some(state);
            e.episode = episode as usize;
            e.done = false;
            clear_error()
        }
        Err(err) => set_error(ErrorCode::Validation, err.to_string()),
    }
}

/// Apply ESS setpoints in kW (positive discharges; infeasible requests are
/// clipped). Writes the reward, the done flag and the next state.
///
/// # Safety
/// `env` must be a live, reset handle; `action_kw` must point to
/// `action_len` doubles; `reward_out`/`done_out` must be writable;
/// `state_out` must point to `state_len` writable doubles (or be NULL).
#[no_mangle]
pub unsafe extern "C" fn essdispatch_env_step(
    env: *mut EssEnv,
    action_kw: *const f64,
    action_len: usize,
    reward_out: *mut f64,
    done_out: *mut i32,
    state_out: *mut f64,
    state_len: usize,
) -> i32 {
    if env.is_null() || action_kw.is_null() || reward_out.is_null() || done_out.is_null() {
        return set_error(ErrorCode::NullArgument, "null argument");
    }
    let e = &mut *env;
    let Some(state) = e.state.clone() else {
        return set_error(ErrorCode::Validation, "env_step before env_reset");
    };
    if e.done {
        return set_error(ErrorCode::EpisodeFinished, "episode is finished; reset first");
    }
    let b = e.topo.ess.len();
    if action_len != b {
        return set_error(
            ErrorCode::DimensionMismatch,
            format!("action has {action_len} entries, network has {b} ESS units"),
        );
    }
    let need = 2 + e.topo.n_buses() + 2 * b;
    if !state_out.is_null() && state_len < need {
        return set_error(
            ErrorCode::BufferTooSmall,
            format!("state buffer holds {state_len}, need {need}"),
        );
    }
    let action = env::Action {
        p_ess_kw: std::slice::from_raw_parts(action_kw, action_len).to_vec(),
    };
    match env::step(&state, &action, &e.topo, &e.profiles, e.episode, &e.reward_cfg) {
        Ok(result) => {
            *reward_out = result.reward;
            *done_out = result.done as i32;
            if !state_out.is_null() {
                let out = std::slice::from_raw_parts_mut(state_out, need);
                write_state(&result.next_state, out);
            }
            e.state = Some(result.next_state);
            e.done = result.done;
            clear_error()
        }
        Err(err) => set_error(ErrorCode::PowerFlow, err.to_string()),
    }
}

// ---------------------------------------------------------------------------
// Policy
// ---------------------------------------------------------------------------

/// Opaque checkpointed policy bound to a network.
pub struct EssPolicy {
    inner: TrainedPolicy,
    topo: Arc<NetworkTopology>,
}

/// Load a training checkpoint (base path without the `.ckpt`/`.json`
/// suffix) and bind it to a network. Flat checkpoints fail with a
/// dimension-mismatch error on a different bus set. NULL on error.
///
/// # Safety
/// Handles must be live; `checkpoint_base` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_policy_load(
    checkpoint_base: *const c_char,
    network: *const EssNetwork,
    profiles: *const EssProfiles,
) -> *mut EssPolicy {
    if network.is_null() || profiles.is_null() {
        set_error(ErrorCode::NullArgument, "null handle");
        return std::ptr::null_mut();
    }
    let Ok(base) = cstr_arg(checkpoint_base) else {
        return std::ptr::null_mut();
    };
    let loaded = match load_policy(PathBuf::from(base)) {
        Ok(l) => l,
        Err(e) => {
            set_error(ErrorCode::Io, e.to_string());
            return std::ptr::null_mut();
        }
    };
    let label = format!("{}-ffi", loaded.arch.tag());
    let (net, prof) = (&*network, &*profiles);
    match TrainedPolicy::bind(&loaded, &net.topo, &prof.set, label) {
        Ok(inner) => {
            clear_error();
            Box::into_raw(Box::new(EssPolicy {
                inner,
                topo: net.topo.clone(),
            }))
        }
        Err(e) => {
            set_error(ErrorCode::DimensionMismatch, e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `policy` must be a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_policy_free(policy: *mut EssPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Run the policy on a flat state vector and write the dispatch in kW
/// (already scaled to each unit's power band).
///
/// # Safety
/// `policy` must be a live handle; `state` must point to `state_len`
/// doubles in the documented layout; `action_kw_out` to `action_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn essdispatch_policy_action(
    policy: *mut EssPolicy,
    state: *const f64,
    state_len: usize,
    action_kw_out: *mut f64,
    action_len: usize,
) -> i32 {
    if policy.is_null() || state.is_null() || action_kw_out.is_null() {
        return set_error(ErrorCode::NullArgument, "null argument");
    }
    let p = &mut *policy;
    let n = p.topo.n_buses();
    let b = p.topo.ess.len();
    let need = 2 + n + 2 * b;
    if state_len != need {
        return set_error(
            ErrorCode::DimensionMismatch,
            format!("state has {state_len} entries, need {need}"),
        );
    }
    if action_len != b {
        return set_error(
            ErrorCode::DimensionMismatch,
            format!("action buffer has {action_len} entries, need {b}"),
        );
    }
    let grid_state = read_state(std::slice::from_raw_parts(state, state_len), n, b);
    let raw = p.inner.raw_action(&grid_state);
    let scaled = env::scale_action(&raw, &p.topo.ess);
    std::slice::from_raw_parts_mut(action_kw_out, action_len)
        .copy_from_slice(&scaled.p_ess_kw);
    clear_error()
}

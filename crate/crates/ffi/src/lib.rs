//! C ABI over the boostsim simulator.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `_free` function. Every fallible call returns a
//! [`BoostsimStatus`] and leaves a message for
//! [`boostsim_last_error_message`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use boostsim::{run_seeded_drop, CampaignConfig, DropResult, Error, Mode};

pub const BOOSTSIM_MODE_LTE_ONLY: u32 = 0;
pub const BOOSTSIM_MODE_WIFI_ONLY: u32 = 1;
pub const BOOSTSIM_MODE_LWIP: u32 = 2;
pub const BOOSTSIM_MODE_BOOST: u32 = 3;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoostsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigParse = 3,
    ConfigValidation = 4,
    InvalidArgument = 5,
    Simulation = 6,
    Io = 7,
    Panic = 8,
}

/// Campaign configuration.
pub struct BoostsimConfig(CampaignConfig);

/// Outcome of one simulated drop.
pub struct BoostsimDropResult(DropResult);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: BoostsimStatus, msg: impl Into<String>) -> BoostsimStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> BoostsimStatus {
    let status = match e {
        Error::ConfigParse { .. } => BoostsimStatus::ConfigParse,
        Error::ConfigValidation { .. } => BoostsimStatus::ConfigValidation,
        Error::Io { .. } => BoostsimStatus::Io,
        _ => BoostsimStatus::Simulation,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning a panic into `Panic` instead of unwinding into C.
fn guarded(f: impl FnOnce() -> BoostsimStatus) -> BoostsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == BoostsimStatus::Ok {
                set_error("");
            }
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(BoostsimStatus::Panic, msg)
        }
    }
}

fn mode_from(code: u32) -> Option<Mode> {
    match code {
        BOOSTSIM_MODE_LTE_ONLY => Some(Mode::LteOnly),
        BOOSTSIM_MODE_WIFI_ONLY => Some(Mode::WifiOnly),
        BOOSTSIM_MODE_LWIP => Some(Mode::Lwip),
        BOOSTSIM_MODE_BOOST => Some(Mode::Boost),
        _ => None,
    }
}

fn emit<T>(out: *mut *mut T, value: T) {
    // SAFETY: callers checked `out` for null.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Static description of a status code. Never null.
#[no_mangle]
pub extern "C" fn boostsim_status_string(status: BoostsimStatus) -> *const c_char {
    let s: &'static CStr = match status {
        BoostsimStatus::Ok => c"ok",
        BoostsimStatus::NullPointer => c"null pointer argument",
        BoostsimStatus::InvalidUtf8 => c"string is not valid UTF-8",
        BoostsimStatus::ConfigParse => c"configuration parse error",
        BoostsimStatus::ConfigValidation => c"configuration value out of range",
        BoostsimStatus::InvalidArgument => c"invalid argument",
        BoostsimStatus::Simulation => c"simulation error",
        BoostsimStatus::Io => c"I/O error",
        BoostsimStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// without the terminator, so a caller can size a second attempt.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn boostsim_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: n < len and buf holds len bytes.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Outer size of a packet of `inner_size` bytes after IPsec tunnelling.
#[no_mangle]
pub extern "C" fn boostsim_ipsec_encapsulate(inner_size: u32) -> u32 {
    boostsim::traffic::ipsec_encapsulate(inner_size)
}

/// Default (calibrated) configuration.
///
/// # Safety
/// `out` must be null or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn boostsim_config_default(out: *mut *mut BoostsimConfig) -> BoostsimStatus {
    guarded(|| {
        if out.is_null() {
            return fail(BoostsimStatus::NullPointer, "out is null");
        }
        emit(out, BoostsimConfig(CampaignConfig::default()));
        BoostsimStatus::Ok
    })
}

/// Parses and validates a TOML configuration. Missing keys take defaults.
///
/// # Safety
/// `text` must be null or a NUL-terminated string; `out` must be null or
/// valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn boostsim_config_from_toml(text: *const c_char, out: *mut *mut BoostsimConfig) -> BoostsimStatus {
    guarded(|| {
        if text.is_null() || out.is_null() {
            return fail(BoostsimStatus::NullPointer, "text or out is null");
        }
        // SAFETY: non-null and NUL-terminated per contract.
        let Ok(text) = unsafe { CStr::from_ptr(text) }.to_str() else {
            return fail(BoostsimStatus::InvalidUtf8, "configuration text is not UTF-8");
        };
        match CampaignConfig::from_toml_str(text) {
            Ok(cfg) => {
                emit(out, BoostsimConfig(cfg));
                BoostsimStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Simulated time per drop, seconds.
///
/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn boostsim_config_set_duration(cfg: *mut BoostsimConfig, seconds: f64) -> BoostsimStatus {
    guarded(|| {
        // SAFETY: live handle or null per contract.
        let Some(cfg) = (unsafe { cfg.as_mut() }) else {
            return fail(BoostsimStatus::NullPointer, "cfg is null");
        };
        if !(seconds > 0.0 && seconds.is_finite()) {
            return fail(BoostsimStatus::InvalidArgument, format!("duration must be positive, got {seconds}"));
        }
        cfg.0.campaign.duration = seconds;
        BoostsimStatus::Ok
    })
}

/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn boostsim_config_set_master_seed(cfg: *mut BoostsimConfig, seed: u64) -> BoostsimStatus {
    guarded(|| {
        // SAFETY: live handle or null per contract.
        let Some(cfg) = (unsafe { cfg.as_mut() }) else {
            return fail(BoostsimStatus::NullPointer, "cfg is null");
        };
        cfg.0.campaign.master_seed = seed;
        BoostsimStatus::Ok
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn boostsim_config_free(cfg: *mut BoostsimConfig) {
    if !cfg.is_null() {
        // SAFETY: created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Generates drop `drop_index` of an `n_ues` cell from the configured
/// master seed and runs it in `mode` (one of the `BOOSTSIM_MODE_*` codes).
///
/// # Safety
/// `cfg` must be null or a live handle; `out` must be null or valid for a
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn boostsim_run_drop(
    cfg: *const BoostsimConfig,
    mode: u32,
    n_ues: u32,
    drop_index: u64,
    out: *mut *mut BoostsimDropResult,
) -> BoostsimStatus {
    guarded(|| {
        // SAFETY: live handle or null per contract.
        let Some(cfg) = (unsafe { cfg.as_ref() }) else {
            return fail(BoostsimStatus::NullPointer, "cfg is null");
        };
        if out.is_null() {
            return fail(BoostsimStatus::NullPointer, "out is null");
        }
        let Some(mode) = mode_from(mode) else {
            return fail(BoostsimStatus::InvalidArgument, format!("unknown mode code {mode}"));
        };
        if n_ues == 0 {
            return fail(BoostsimStatus::InvalidArgument, "n_ues must be at least 1");
        }
        match run_seeded_drop(&cfg.0, mode, n_ues as usize, drop_index) {
            Ok(r) => {
                emit(out, BoostsimDropResult(r));
                BoostsimStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Number of UEs in the drop, 0 for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn boostsim_drop_ue_count(result: *const BoostsimDropResult) -> u32 {
    // SAFETY: live handle or null per contract.
    unsafe { result.as_ref() }.map_or(0, |r| r.0.ues.len() as u32)
}

/// Downlink throughput of one UE in Mbps, on the configured basis.
///
/// # Safety
/// `result` must be null or a live handle; `out` must be null or valid for
/// a write.
#[no_mangle]
pub unsafe extern "C" fn boostsim_drop_ue_throughput(
    result: *const BoostsimDropResult,
    cfg: *const BoostsimConfig,
    ue: u32,
    out: *mut f64,
) -> BoostsimStatus {
    guarded(|| {
        // SAFETY: live handles or null per contract.
        let (Some(r), Some(cfg)) = (unsafe { result.as_ref() }, unsafe { cfg.as_ref() }) else {
            return fail(BoostsimStatus::NullPointer, "result or cfg is null");
        };
        if out.is_null() {
            return fail(BoostsimStatus::NullPointer, "out is null");
        }
        if ue as usize >= r.0.ues.len() {
            return fail(BoostsimStatus::InvalidArgument, format!("UE {ue} out of range ({} UEs)", r.0.ues.len()));
        }
        let v = r.0.ue_throughput(ue as usize, cfg.0.campaign.throughput_basis);
        // SAFETY: checked non-null.
        unsafe { *out = v };
        BoostsimStatus::Ok
    })
}

/// Downlink goodput summed over all cells, Mbps. NaN for a null handle.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn boostsim_drop_sum_cell_mbps(result: *const BoostsimDropResult) -> f64 {
    // SAFETY: live handle or null per contract.
    unsafe { result.as_ref() }.map_or(f64::NAN, |r| r.0.sum_cell_throughput())
}

/// Committed path switches in the drop.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn boostsim_drop_switch_count(result: *const BoostsimDropResult) -> u64 {
    // SAFETY: live handle or null per contract.
    unsafe { result.as_ref() }.map_or(0, |r| r.0.switches.len() as u64)
}

/// Wi-Fi collisions in the drop.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn boostsim_drop_collisions(result: *const BoostsimDropResult) -> u64 {
    // SAFETY: live handle or null per contract.
    unsafe { result.as_ref() }.map_or(0, |r| r.0.collisions)
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn boostsim_drop_free(result: *mut BoostsimDropResult) {
    if !result.is_null() {
        // SAFETY: created by Box::into_raw in this crate.
        drop(unsafe { Box::from_raw(result) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_codes_cover_every_mode() {
        let modes: Vec<Mode> = (0..4).filter_map(mode_from).collect();
        assert_eq!(modes, Mode::ALL.to_vec());
        assert_eq!(mode_from(4), None);
    }

    #[test]
    fn status_strings_are_static_and_distinct() {
        let all = [
            BoostsimStatus::Ok,
            BoostsimStatus::NullPointer,
            BoostsimStatus::InvalidUtf8,
            BoostsimStatus::ConfigParse,
            BoostsimStatus::ConfigValidation,
            BoostsimStatus::InvalidArgument,
            BoostsimStatus::Simulation,
            BoostsimStatus::Io,
            BoostsimStatus::Panic,
        ];
        let mut seen = std::collections::HashSet::new();
        for s in all {
            let text = unsafe { CStr::from_ptr(boostsim_status_string(s)) };
            assert!(seen.insert(text.to_owned()), "{text:?}");
        }
    }

    #[test]
    fn panics_become_a_status() {
        assert_eq!(guarded(|| panic!("boom")), BoostsimStatus::Panic);
        LAST_ERROR.with(|e| assert_eq!(*e.borrow(), "boom"));
    }
}

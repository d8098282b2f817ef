//! C ABI for the repute reputation engine.
//!
//! The surface is a single opaque [`ReputeEngine`] handle that buffers rating
//! records and advances the reputation state one recalculation period at a
//! time, plus helpers to read the state back as JSON, hash it canonically and
//! run proposer selection on it. All functions return a [`ReputeStatus`]
//! error code (or null for constructors); a human-readable detail for the
//! most recent error on the calling thread is available via
//! [`repute_last_error`]. Strings returned by this library must be released
//! with [`repute_string_free`].
//!
//! The header `include/repute.h` is generated by cbindgen at build time.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::ptr;

use repute_core::consensus::select_proposer;
use repute_core::engine::compute_period;
use repute_core::model::{
    canonical_hash, validate_record, EngineConfig, RatingRecord, RawRecord, ReputationState,
    Timestamp,
};
use repute_core::storage::SnapshotDoc;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReputeStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// JSON could not be parsed.
    ParseError = 3,
    /// Input violated a model invariant (bad config, bad record, ...).
    ValidationError = 4,
    /// Period end does not advance past the current state time.
    TimeError = 5,
    /// No member carries positive floored reputation.
    NoEligibleProposer = 6,
    /// The caller-provided buffer is too small.
    BufferTooSmall = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

fn fail(status: ReputeStatus, message: impl Into<String>) -> ReputeStatus {
    set_error(message);
    status
}

/// Opaque engine handle: configuration, current reputation state, and the
/// rating records buffered for the next recalculation period.
pub struct ReputeEngine {
    config: EngineConfig,
    state: ReputationState,
    pending: Vec<RatingRecord>,
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, ReputeStatus> {
    if ptr.is_null() {
        return Err(ReputeStatus::NullArgument);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| ReputeStatus::InvalidUtf8)
}

/// Create an engine from a JSON configuration object (pass null for the
/// defaults) anchored at origin tick `origin`. Returns null on failure with
/// `status` (when non-null) and the thread error message set.
///
/// # Safety
/// `config_json`, when non-null, must point to a NUL-terminated string valid
/// for the duration of the call. `status` may be null.
#[no_mangle]
pub unsafe extern "C" fn repute_engine_new(
    config_json: *const c_char,
    origin: u64,
    status: *mut ReputeStatus,
) -> *mut ReputeEngine {
    let report = |s: ReputeStatus| {
        if !status.is_null() {
            *status = s;
        }
    };
    let config = if config_json.is_null() {
        EngineConfig::default()
    } else {
        let text = match read_str(config_json) {
            Ok(t) => t,
            Err(s) => {
                report(fail(s, "config_json is not valid UTF-8"));
                return ptr::null_mut();
            }
        };
        match serde_json::from_str::<EngineConfig>(text) {
            Ok(c) => c,
            Err(e) => {
                report(fail(ReputeStatus::ParseError, format!("bad config: {e}")));
                return ptr::null_mut();
            }
        }
    };
    if let Err(e) = config.validate() {
        report(fail(ReputeStatus::ValidationError, e.to_string()));
        return ptr::null_mut();
    }
    report(ReputeStatus::Ok);
    Box::into_raw(Box::new(ReputeEngine {
        config,
        state: ReputationState::genesis(Timestamp(origin)),
        pending: Vec::new(),
    }))
}

/// Release an engine handle. Null is ignored.
///
/// # Safety
/// `engine` must be a pointer returned by [`repute_engine_new`] that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn repute_engine_free(engine: *mut ReputeEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Buffer one rating record, given as the JSON object used in rating logs
/// (keys kind/from/to/time/value/weight and optional aspect/category/event).
/// The record is validated immediately; it takes effect at the next
/// [`repute_engine_advance`].
///
/// # Safety
/// `engine` must be a live engine handle; `record_json` must be a valid
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn repute_engine_add_rating_json(
    engine: *mut ReputeEngine,
    record_json: *const c_char,
) -> ReputeStatus {
    let Some(engine) = engine.as_mut() else {
        return fail(ReputeStatus::NullArgument, "engine is null");
    };
    let text = match read_str(record_json) {
        Ok(t) => t,
        Err(s) => return fail(s, "record_json is unreadable"),
    };
    let raw: RawRecord = match serde_json::from_str(text) {
        Ok(r) => r,
        Err(e) => return fail(ReputeStatus::ParseError, format!("bad record: {e}")),
    };
    let record = match validate_record(raw) {
        Ok(r) => r,
        Err(e) => return fail(ReputeStatus::ValidationError, e.to_string()),
    };
    if record.time <= engine.state.as_of {
        return fail(
            ReputeStatus::TimeError,
            format!(
                "record time {} is not after state time {}",
                record.time, engine.state.as_of
            ),
        );
    }
    engine.pending.push(record);
    ReputeStatus::Ok
}

/// Number of records buffered for the next period.
///
/// # Safety
/// `engine` must be a live engine handle.
#[no_mangle]
pub unsafe extern "C" fn repute_engine_pending_count(engine: *const ReputeEngine) -> u64 {
    engine.as_ref().map_or(0, |e| e.pending.len() as u64)
}

/// Run one recalculation period over the buffered records, ending at tick
/// `t_n`. On success the buffer is cleared and the state advances.
///
/// # Safety
/// `engine` must be a live engine handle.
#[no_mangle]
pub unsafe extern "C" fn repute_engine_advance(
    engine: *mut ReputeEngine,
    t_n: u64,
) -> ReputeStatus {
    let Some(engine) = engine.as_mut() else {
        return fail(ReputeStatus::NullArgument, "engine is null");
    };
    match compute_period(&engine.pending, &engine.state, Timestamp(t_n), &engine.config) {
        Ok(outcome) => {
            engine.state = outcome.state;
            engine.pending.clear();
            ReputeStatus::Ok
        }
        Err(e) => fail(ReputeStatus::TimeError, e.to_string()),
    }
}

/// Effective reputation of a member: its state entry, or the configured
/// default when the member is unknown.
///
/// # Safety
/// `engine` must be a live engine handle, `member` a valid NUL-terminated
/// string, `out` a writable f64 pointer.
#[no_mangle]
pub unsafe extern "C" fn repute_engine_reputation(
    engine: *const ReputeEngine,
    member: *const c_char,
    out: *mut f64,
) -> ReputeStatus {
    let Some(engine) = engine.as_ref() else {
        return fail(ReputeStatus::NullArgument, "engine is null");
    };
    if out.is_null() {
        return fail(ReputeStatus::NullArgument, "out is null");
    }
    let member = match read_str(member) {
        Ok(m) => m,
        Err(s) => return fail(s, "member is unreadable"),
    };
    *out = engine
        .state
        .reputation_of(&member.into())
        .unwrap_or(engine.config.default_reputation);
    ReputeStatus::Ok
}

/// Current state as the snapshot JSON document
/// `{as_of, origin, entries, hash}`. Free with [`repute_string_free`].
///
/// # Safety
/// `engine` must be a live engine handle; `status` may be null.
#[no_mangle]
pub unsafe extern "C" fn repute_engine_state_json(
    engine: *const ReputeEngine,
    status: *mut ReputeStatus,
) -> *mut c_char {
    let report = |s: ReputeStatus| {
        if !status.is_null() {
            *status = s;
        }
    };
    let Some(engine) = engine.as_ref() else {
        report(fail(ReputeStatus::NullArgument, "engine is null"));
        return ptr::null_mut();
    };
    let doc = match SnapshotDoc::from_state(&engine.state, engine.config.hash_precision) {
        Ok(d) => d,
        Err(e) => {
            report(fail(ReputeStatus::ValidationError, e.to_string()));
            return ptr::null_mut();
        }
    };
    let json = serde_json::to_string(&doc).expect("snapshot serializes");
    report(ReputeStatus::Ok);
    CString::new(json).map_or(ptr::null_mut(), CString::into_raw)
}

unsafe fn copy_to_buffer(text: &str, buf: *mut c_char, len: usize) -> ReputeStatus {
    if buf.is_null() {
        return fail(ReputeStatus::NullArgument, "buffer is null");
    }
    let bytes = text.as_bytes();
    if len < bytes.len() + 1 {
        return fail(
            ReputeStatus::BufferTooSmall,
            format!("need {} bytes, got {len}", bytes.len() + 1),
        );
    }
    ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, bytes.len());
    *buf.add(bytes.len()) = 0;
    ReputeStatus::Ok
}

/// Canonical hex digest of the current state, written NUL-terminated into
/// `buf` (65 bytes suffice).
///
/// # Safety
/// `engine` must be a live engine handle; `buf` must point to `len` writable
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn repute_engine_state_hash(
    engine: *const ReputeEngine,
    buf: *mut c_char,
    len: usize,
) -> ReputeStatus {
    let Some(engine) = engine.as_ref() else {
        return fail(ReputeStatus::NullArgument, "engine is null");
    };
    match canonical_hash(&engine.state, engine.config.hash_precision) {
        Ok(digest) => copy_to_buffer(digest.as_str(), buf, len),
        Err(e) => fail(ReputeStatus::ValidationError, e.to_string()),
    }
}

/// Proof-of-reputation proposer selection over the current state: writes the
/// chosen member id NUL-terminated into `buf`. Selection probability is
/// proportional to floored reputation, deterministic in `seed`.
///
/// # Safety
/// `engine` must be a live engine handle; `buf` must point to `len` writable
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn repute_engine_select_proposer(
    engine: *const ReputeEngine,
    seed: u64,
    buf: *mut c_char,
    len: usize,
) -> ReputeStatus {
    let Some(engine) = engine.as_ref() else {
        return fail(ReputeStatus::NullArgument, "engine is null");
    };
    match select_proposer(&engine.state.entries, seed) {
        Ok(member) => copy_to_buffer(member.as_str(), buf, len),
        Err(e) => fail(ReputeStatus::NoEligibleProposer, e.to_string()),
    }
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be a pointer returned by a repute function and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn repute_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Detail message of the most recent error on this thread, or null. Free
/// with [`repute_string_free`].
#[no_mangle]
pub extern "C" fn repute_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null_mut(), |msg| msg.clone().into_raw())
    })
}

/// Static name of a status code (never freed by the caller).
#[no_mangle]
pub extern "C" fn repute_status_name(status: ReputeStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        ReputeStatus::Ok => b"ok\0",
        ReputeStatus::NullArgument => b"null_argument\0",
        ReputeStatus::InvalidUtf8 => b"invalid_utf8\0",
        ReputeStatus::ParseError => b"parse_error\0",
        ReputeStatus::ValidationError => b"validation_error\0",
        ReputeStatus::TimeError => b"time_error\0",
        ReputeStatus::NoEligibleProposer => b"no_eligible_proposer\0",
        ReputeStatus::BufferTooSmall => b"buffer_too_small\0",
    };
    name.as_ptr() as *const c_char
}

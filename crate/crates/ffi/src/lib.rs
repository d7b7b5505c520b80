//! C ABI over the feedlab server core and statistics toolkit.
//!
//! Conventions:
//! - Every fallible function returns a [`FeedlabStatus`]; on failure the
//!   message is available from [`feedlab_last_error`] on the same thread.
//! - Strings passed in are NUL-terminated UTF-8 and borrowed for the call.
//! - Strings passed out are owned by the caller and released with
//!   [`feedlab_string_free`].
//! - A [`FeedlabHub`] is an opaque handle and is not thread-safe; callers
//!   serialize access to one handle.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;

use feedlab::analytics::{chi_square, cohens_kappa, paired_t, ContingencyTable};
use feedlab::model::{Manifest, RoomCode};
use feedlab::service::{sample_manifest, ConnId, Envelope, Hub, ManualClock, RoomConfig, RoomSetup, SystemClock};
use feedlab::Error;
use serde::Serialize;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedlabStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Validation = 3,
    Sequence = 4,
    UnknownReference = 5,
    Configuration = 6,
    Parse = 7,
    Role = 8,
    Mode = 9,
    Pairing = 10,
    Game = 11,
    Degenerate = 12,
    Input = 13,
    Io = 14,
    Session = 15,
    Panic = 16,
}

impl From<&Error> for FeedlabStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Validation(_) => Self::Validation,
            Error::Sequence { .. } => Self::Sequence,
            Error::UnknownReference { .. } => Self::UnknownReference,
            Error::Configuration(_) => Self::Configuration,
            Error::Parse { .. } => Self::Parse,
            Error::Role(_) => Self::Role,
            Error::Mode(_) => Self::Mode,
            Error::Pairing(_) => Self::Pairing,
            Error::Game(_) => Self::Game,
            Error::Degenerate(_) => Self::Degenerate,
            Error::Input(_) => Self::Input,
            Error::Io(_) => Self::Io,
            Error::Session(_) => Self::Session,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

struct Failure(FeedlabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(FeedlabStatus::from(&e), format!("{}: {e}", e.code()))
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FeedlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FeedlabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            FeedlabStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(FeedlabStatus::NullArgument, format!("{what} is NULL"))
}

/// # Safety
/// `p` is NULL or a valid NUL-terminated string.
unsafe fn opt_str<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    // SAFETY: non-null and NUL-terminated per the caller contract.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map(Some)
        .map_err(|_| Failure(FeedlabStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

/// # Safety
/// As [`opt_str`], but NULL is an error.
unsafe fn req_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    unsafe { opt_str(p, what) }?.ok_or_else(|| null(what))
}

/// # Safety
/// `out` is NULL or valid for one pointer write.
unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    let c = CString::new(s).map_err(|_| Failure(FeedlabStatus::InvalidUtf8, "output contains NUL".into()))?;
    // SAFETY: checked non-null; caller provides a writable slot.
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Opaque server core.
pub struct FeedlabHub {
    hub: Hub,
    manual: Option<ManualClock>,
}

/// Message from the last failing call on this thread, or NULL. The pointer
/// stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn feedlab_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` is NULL or a pointer returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn feedlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: allocated by CString::into_raw in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Creates a hub on the system clock. `data_dir` may be NULL to keep logs
/// in memory only. Returns NULL on failure.
///
/// # Safety
/// `data_dir` is NULL or a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn feedlab_hub_new(seed: u64, data_dir: *const c_char) -> *mut FeedlabHub {
    let mut out = std::ptr::null_mut();
    let status = guard(|| {
        let dir = unsafe { opt_str(data_dir, "data_dir") }?.map(PathBuf::from);
        let hub = Hub::new(Arc::new(SystemClock), seed, dir);
        out = Box::into_raw(Box::new(FeedlabHub { hub, manual: None }));
        Ok(())
    });
    if status == FeedlabStatus::Ok {
        out
    } else {
        std::ptr::null_mut()
    }
}

/// Creates an in-memory hub on a manual clock starting at `start_ms`.
#[no_mangle]
pub extern "C" fn feedlab_hub_new_manual(seed: u64, start_ms: u64) -> *mut FeedlabHub {
    let clock = ManualClock::new(start_ms);
    let hub = Hub::new(Arc::new(clock.clone()), seed, None);
    Box::into_raw(Box::new(FeedlabHub { hub, manual: Some(clock) }))
}

/// Destroys a hub. NULL is ignored.
///
/// # Safety
/// `hub` is NULL or a live handle from `feedlab_hub_new*`.
#[no_mangle]
pub unsafe extern "C" fn feedlab_hub_free(hub: *mut FeedlabHub) {
    if !hub.is_null() {
        // SAFETY: created by Box::into_raw above.
        drop(unsafe { Box::from_raw(hub) });
    }
}

/// # Safety
/// `hub` is NULL or a live handle.
unsafe fn hub_mut<'a>(hub: *mut FeedlabHub) -> Result<&'a mut FeedlabHub, Failure> {
    // SAFETY: caller guarantees a live, exclusively used handle.
    unsafe { hub.as_mut() }.ok_or_else(|| null("hub"))
}

/// Advances a manual-clock hub.
///
/// # Safety
/// `hub` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn feedlab_hub_advance_clock(hub: *mut FeedlabHub, ms: u64) -> FeedlabStatus {
    guard(|| {
        let h = unsafe { hub_mut(hub) }?;
        let clock = h.manual.as_ref().ok_or_else(|| {
            Failure(FeedlabStatus::Configuration, "hub runs on the system clock".into())
        })?;
        clock.advance(ms);
        Ok(())
    })
}

/// Creates a room. `config_json` (a room config object) and
/// `manifest_json` (a manifest document) may be NULL for defaults and the
/// bundled sample manifest. The room code is written to `out_code`.
///
/// # Safety
/// `hub` is a live handle; string arguments are NULL or valid; `out_code`
/// is writable.
#[no_mangle]
pub unsafe extern "C" fn feedlab_hub_create_room(
    hub: *mut FeedlabHub,
    config_json: *const c_char,
    manifest_json: *const c_char,
    out_code: *mut *mut c_char,
) -> FeedlabStatus {
    guard(|| {
        let h = unsafe { hub_mut(hub) }?;
        let config = match unsafe { opt_str(config_json, "config_json") }? {
            Some(text) => RoomConfig::from_json(text)?,
            None => RoomConfig::default(),
        };
        let manifest = match unsafe { opt_str(manifest_json, "manifest_json") }? {
            Some(text) => Manifest::from_json(text)?,
            None => sample_manifest(),
        };
        let code = h.hub.create_room(RoomSetup::new(config, manifest, None)?)?;
        unsafe { write_string(out_code, code.to_string()) }
    })
}

/// Opens a connection and writes its id to `out_conn`.
///
/// # Safety
/// `hub` is a live handle; `out_conn` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedlab_hub_connect(hub: *mut FeedlabHub, out_conn: *mut u64) -> FeedlabStatus {
    guard(|| {
        let h = unsafe { hub_mut(hub) }?;
        if out_conn.is_null() {
            return Err(null("out_conn"));
        }
        // SAFETY: checked non-null.
        unsafe { *out_conn = h.hub.connect().0 };
        Ok(())
    })
}

/// # Safety
/// `hub` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn feedlab_hub_disconnect(hub: *mut FeedlabHub, conn: u64) -> FeedlabStatus {
    guard(|| {
        unsafe { hub_mut(hub) }?.hub.disconnect(ConnId(conn));
        Ok(())
    })
}

#[derive(Serialize)]
struct Frame<'a> {
    conn: u64,
    text: &'a str,
}

fn frames_json(frames: &[Envelope]) -> String {
    let list: Vec<Frame> = frames
        .iter()
        .map(|f| Frame {
            conn: f.conn.0,
            text: &f.text,
        })
        .collect();
    serde_json::to_string(&list).expect("frames always serialize")
}

/// Feeds one client text frame. Replies are written to `out_frames` as a
/// JSON array of `{"conn": id, "text": frame}`. Protocol errors are
/// replies, not failures; the status is only non-zero for bad arguments.
///
/// # Safety
/// `hub` is a live handle; `text` is valid; `out_frames` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedlab_hub_handle(
    hub: *mut FeedlabHub,
    conn: u64,
    text: *const c_char,
    out_frames: *mut *mut c_char,
) -> FeedlabStatus {
    guard(|| {
        let h = unsafe { hub_mut(hub) }?;
        let text = unsafe { req_str(text, "text") }?;
        let frames = h.hub.handle_text(ConnId(conn), text);
        unsafe { write_string(out_frames, frames_json(&frames)) }
    })
}

/// Runs due broadcast ticks; frames are written as in `feedlab_hub_handle`.
///
/// # Safety
/// `hub` is a live handle; `out_frames` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedlab_hub_tick(hub: *mut FeedlabHub, out_frames: *mut *mut c_char) -> FeedlabStatus {
    guard(|| {
        let h = unsafe { hub_mut(hub) }?;
        let frames = h.hub.tick();
        unsafe { write_string(out_frames, frames_json(&frames)) }
    })
}

/// Writes the room's final snapshot JSON to `out_json`.
///
/// # Safety
/// `hub` is a live handle; `room` is valid; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedlab_hub_snapshot(
    hub: *mut FeedlabHub,
    room: *const c_char,
    out_json: *mut *mut c_char,
) -> FeedlabStatus {
    guard(|| {
        let h = unsafe { hub_mut(hub) }?;
        let code = RoomCode::new(unsafe { req_str(room, "room") }?).map_err(Error::from)?;
        let r = h.hub.room(&code).ok_or_else(|| {
            Failure::from(Error::UnknownReference {
                kind: "room",
                id: code.to_string(),
            })
        })?;
        let snap = r.final_snapshot()?;
        unsafe { write_string(out_json, snap.to_json()) }
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeedlabChiSquare {
    pub chi2: f64,
    pub df: u64,
    pub p: f64,
}

/// Chi-square test on a row-major `rows x cols` count matrix. When
/// `out_residuals` is non-NULL it receives `rows * cols` Pearson residuals.
///
/// # Safety
/// `counts` holds `rows * cols` values; `out` is writable;
/// `out_residuals` is NULL or holds `rows * cols` slots.
#[no_mangle]
pub unsafe extern "C" fn feedlab_chi_square(
    counts: *const u64,
    rows: usize,
    cols: usize,
    out: *mut FeedlabChiSquare,
    out_residuals: *mut f64,
) -> FeedlabStatus {
    guard(|| {
        if counts.is_null() || out.is_null() {
            return Err(null("counts or out"));
        }
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(FeedlabStatus::Input, "table too large".into()))?;
        // SAFETY: caller provides rows * cols readable values.
        let flat = unsafe { std::slice::from_raw_parts(counts, n) };
        let matrix = flat.chunks(cols.max(1)).map(<[u64]>::to_vec).collect();
        let result = chi_square(&ContingencyTable::from_counts(matrix)?)?;
        // SAFETY: checked non-null.
        unsafe {
            *out = FeedlabChiSquare {
                chi2: result.chi2,
                df: result.df as u64,
                p: result.p,
            };
        }
        if !out_residuals.is_null() {
            // SAFETY: caller provides rows * cols writable slots.
            let dst = unsafe { std::slice::from_raw_parts_mut(out_residuals, n) };
            for (d, r) in dst.iter_mut().zip(result.residuals.iter().flatten()) {
                *d = *r;
            }
        }
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeedlabPairedT {
    pub n: u64,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: f64,
    pub df: u64,
    pub p_two_tailed: f64,
    pub cohen_d: f64,
}

/// Paired t-test over `n` matched values.
///
/// # Safety
/// `pre` and `post` hold `n` values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedlab_paired_t(
    pre: *const f64,
    post: *const f64,
    n: usize,
    out: *mut FeedlabPairedT,
) -> FeedlabStatus {
    guard(|| {
        if pre.is_null() || post.is_null() || out.is_null() {
            return Err(null("pre, post or out"));
        }
        // SAFETY: caller provides n readable values in each.
        let (a, b) = unsafe { (std::slice::from_raw_parts(pre, n), std::slice::from_raw_parts(post, n)) };
        let r = paired_t(a, b)?;
        // SAFETY: checked non-null.
        unsafe {
            *out = FeedlabPairedT {
                n: r.n as u64,
                mean_diff: r.mean_diff,
                sd_diff: r.sd_diff,
                t: r.t,
                df: r.df as u64,
                p_two_tailed: r.p_two_tailed,
                cohen_d: r.cohen_d,
            };
        }
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeedlabKappa {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub agreement_pct: f64,
}

/// Cohen's kappa over `n` paired string labels.
///
/// # Safety
/// `rater_a` and `rater_b` hold `n` valid strings each; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn feedlab_cohens_kappa(
    rater_a: *const *const c_char,
    rater_b: *const *const c_char,
    n: usize,
    out: *mut FeedlabKappa,
) -> FeedlabStatus {
    guard(|| {
        if rater_a.is_null() || rater_b.is_null() || out.is_null() {
            return Err(null("rater_a, rater_b or out"));
        }
        let read = |p: *const *const c_char| -> Result<Vec<&str>, Failure> {
            // SAFETY: caller provides n string pointers.
            unsafe { std::slice::from_raw_parts(p, n) }
                .iter()
                .map(|s| unsafe { req_str(*s, "label") })
                .collect()
        };
        let k = cohens_kappa(&read(rater_a)?, &read(rater_b)?)?;
        // SAFETY: checked non-null.
        unsafe {
            *out = FeedlabKappa {
                kappa: k.kappa,
                observed_agreement: k.observed_agreement,
                expected_agreement: k.expected_agreement,
                agreement_pct: k.agreement_pct,
            };
        }
        Ok(())
    })
}
